#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/group_lasso.hpp"
#include "rkhsmm/meta_model.hpp"
#include "rkhsmm/parallel.hpp"
#include "rkhsmm/ridge_group_sparse.hpp"

namespace rkhsmm {

/// Strictly descending mu (ridge-group-sparse scale) and gamma values.
template <typename Scalar>
struct TuningGrid {
    std::vector<Scalar> mus;
    std::vector<Scalar> gammas;

    void validate() const {
        if (mus.empty() || gammas.empty()) throw invalid_argument("tuning grid must be nonempty");
        for (std::size_t i = 0; i < mus.size(); ++i) {
            if (!(mus[i] > 0) || !std::isfinite(double(mus[i]))) throw invalid_argument("mu values must be positive");
            if (i && !(mus[i] < mus[i - 1])) throw invalid_argument("mu values must be strictly descending");
        }
        for (std::size_t j = 0; j < gammas.size(); ++j) {
            if (!(gammas[j] >= 0) || !std::isfinite(double(gammas[j])))
                throw invalid_argument("gamma values must be >= 0");
            if (j && !(gammas[j] < gammas[j - 1])) throw invalid_argument("gamma values must be strictly descending");
        }
    }
};

/// One fitted model. `mu` follows the stored-model convention: mu_g = sqrt(n) mu
/// when gamma == 0, the ridge-group-sparse mu otherwise.
template <typename Scalar>
struct FitEntry {
    Scalar mu;
    Scalar gamma;
    MetaModel<Scalar> model;
};

/// Models for every (mu, gamma) pair; entry (i, j) sits at i * gammas.size() + j.
template <typename Scalar>
struct FitPath {
    std::vector<Scalar> mus;  // ridge-group-sparse scale
    std::vector<Scalar> gammas;
    std::vector<FitEntry<Scalar>> entries;

    const FitEntry<Scalar>& at(std::size_t i, std::size_t j) const { return entries.at(i * gammas.size() + j); }
    FitEntry<Scalar>& at(std::size_t i, std::size_t j) { return entries.at(i * gammas.size() + j); }
};

/// mu_i = mu_max / (sqrt(n) frc_i), sorted descending.
template <typename Scalar>
std::vector<Scalar> mu_grid(Scalar mu_max_val, Eigen::Index n, const std::vector<Scalar>& frc) {
    if (frc.empty()) throw invalid_argument("frc must be nonempty");
    std::vector<Scalar> out;
    out.reserve(frc.size());
    for (Scalar f : frc) {
        if (!(f > 0)) throw invalid_argument("frc entries must be positive");
        out.push_back(mu_max_val / (std::sqrt(Scalar(n)) * f));
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

namespace detail {

template <typename Scalar>
std::string pair_context(Scalar mu, Scalar gamma) {
    std::ostringstream os;
    os.precision(17);
    os << "mu=" << mu << " gamma=" << gamma;
    return os.str();
}

} // namespace detail

/// Group lasso along the descending mu path (warm-started), then one
/// ridge-group-sparse fit per (mu, gamma > 0) initialized from the group-lasso
/// model at the same mu. The ridge-group-sparse fits run on `threads` workers.
template <typename Scalar>
FitPath<Scalar> fit_path(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, const TuningGrid<Scalar>& grid,
                         const FitConfig<Scalar>& cfg = {}, unsigned threads = 1) {
    grid.validate();
    const Scalar rootn = std::sqrt(Scalar(grams.n));
    FitPath<Scalar> path;
    path.mus = grid.mus;
    path.gammas = grid.gammas;
    path.entries.resize(grid.mus.size() * grid.gammas.size());

    std::vector<MetaModel<Scalar>> gl(grid.mus.size());
    for (std::size_t i = 0; i < grid.mus.size(); ++i) {
        try {
            gl[i] = group_lasso_fit<Scalar>(Y, grams, rootn * grid.mus[i], cfg, i ? &gl[i - 1] : nullptr);
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), detail::pair_context(grid.mus[i], Scalar(0)));
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t i = 0; i < grid.mus.size(); ++i)
        for (std::size_t j = 0; j < grid.gammas.size(); ++j) {
            if (grid.gammas[j] == 0)
                path.at(i, j) = {rootn * grid.mus[i], Scalar(0), gl[i]};
            else
                tasks.emplace_back(i, j);
        }
    parallel_for(tasks.size(), threads, [&](std::size_t t) {
        const auto [i, j] = tasks[t];
        try {
            path.at(i, j) = {grid.mus[i], grid.gammas[j],
                             rgs_fit<Scalar>(Y, grams, grid.mus[i], grid.gammas[j], gl[i], cfg, false)};
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), detail::pair_context(grid.mus[i], grid.gammas[j]));
        }
    });
    return path;
}

template <typename Scalar>
struct QmaxResult {
    std::vector<Scalar> mus;  // probed mu_g values, in order
    std::vector<int> qs;      // support sizes at those values
    bool found = false;
    Scalar mu_qmax = 0;       // mu_g scale
    FitPath<Scalar> path;     // one row at mu_qmax / sqrt(n), one column per gamma
};

/// Bisection on mu_g in [mu_max / rat, mu_max] for a group-lasso model with exactly
/// qmax active groups, then ridge-group-sparse fits at that mu for every gamma > 0.
/// When no probe hits qmax the upper end of the final bracket is used and
/// `found` stays false.
template <typename Scalar>
QmaxResult<Scalar> fit_qmax(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, std::vector<Scalar> gammas,
                            int qmax, Scalar rat, int num, const FitConfig<Scalar>& cfg = {}, unsigned threads = 1) {
    if (qmax < 1) throw invalid_argument("qmax must be >= 1");
    if (!(rat > 1)) throw invalid_argument("rat must be > 1");
    if (num < 1) throw invalid_argument("num must be >= 1");
    if (gammas.empty()) throw invalid_argument("gamma list must be nonempty");
    std::sort(gammas.begin(), gammas.end(), std::greater<>());
    TuningGrid<Scalar>{{Scalar(1)}, gammas}.validate();

    QmaxResult<Scalar> out;
    const Scalar top = mu_max(Y, grams);
    if (!(top > 0)) throw numeric_failure("mu_max is zero; the response is constant");
    Scalar mu1 = top, mu2 = top / rat;
    MetaModel<Scalar> last, at_mu1;
    bool have_last = false, have_mu1 = false;
    for (int i = 1;; ++i) {
        const Scalar mui = (mu1 + mu2) / 2;
        last = group_lasso_fit<Scalar>(Y, grams, mui, cfg, have_last ? &last : nullptr);
        have_last = true;
        const int q = int(last.n_support());
        out.mus.push_back(mui);
        out.qs.push_back(q);
        if (q > qmax) {
            mu2 = mui;
        } else {
            mu1 = mui;
            at_mu1 = last;
            have_mu1 = true;
        }
        if (q == qmax) {
            out.found = true;
            break;
        }
        if (i > num) break;
    }
    if (!have_mu1) at_mu1 = group_lasso_fit<Scalar>(Y, grams, mu1, cfg, &last);
    out.mu_qmax = mu1;

    const Scalar rootn = std::sqrt(Scalar(grams.n));
    const Scalar mu = mu1 / rootn;
    out.path.mus = {mu};
    out.path.gammas = gammas;
    out.path.entries.resize(gammas.size());
    parallel_for(gammas.size(), threads, [&](std::size_t j) {
        if (gammas[j] == 0) {
            out.path.entries[j] = {mu1, Scalar(0), at_mu1};
            return;
        }
        try {
            out.path.entries[j] = {mu, gammas[j], rgs_fit<Scalar>(Y, grams, mu, gammas[j], at_mu1, cfg, false)};
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), detail::pair_context(mu, gammas[j]));
        }
    });
    return out;
}

/// f0 + sum over the support of cross_v theta_v. `cross[v]` is n_test x n, or
/// n_test x 0 for groups outside the support.
template <typename Scalar>
Vec<Scalar> predict(const MetaModel<Scalar>& m, const std::vector<Mat<Scalar>>& cross) {
    if (cross.size() != std::size_t(m.groups())) throw invalid_argument("predict: group count mismatch");
    Eigen::Index nt = -1;
    for (int v : m.support) {
        const auto& C = cross[v];
        if (C.cols() != m.n()) throw invalid_argument("predict: cross Gram for an active group has the wrong shape");
        if (nt >= 0 && C.rows() != nt) throw invalid_argument("predict: inconsistent test sizes");
        nt = C.rows();
    }
    if (nt < 0 && !cross.empty()) nt = cross.front().rows();
    if (nt < 0) throw invalid_argument("predict: no cross Gram matrices supplied");
    Vec<Scalar> y = Vec<Scalar>::Constant(nt, m.intercept);
    for (int v : m.support) y += cross[v] * m.theta.row(v).transpose();
    return y;
}

template <typename Scalar>
std::vector<bool> support_union(const FitPath<Scalar>& path, std::size_t groups) {
    std::vector<bool> used(groups, false);
    for (const auto& e : path.entries)
        for (int v : e.model.support) used[v] = true;
    return used;
}

/// Test-set mean squared error for every path entry, as a |mus| x |gammas| matrix.
template <typename Scalar>
Mat<Scalar> prediction_error(const FitPath<Scalar>& path, const Mat<Scalar>& Xtrain, const Mat<Scalar>& Xtest,
                             const Vec<Scalar>& Ytest, const GroupSet& groups, KernelKind kind) {
    if (Xtest.rows() == 0) throw invalid_argument("prediction_error: empty test set");
    if (Ytest.size() != Xtest.rows()) throw invalid_argument("prediction_error: test response length mismatch");
    const auto used = support_union(path, groups.size());
    const auto cross = cross_gram(Xtrain, Xtest, groups, kind, &used);
    Mat<Scalar> err(Eigen::Index(path.mus.size()), Eigen::Index(path.gammas.size()));
    for (std::size_t i = 0; i < path.mus.size(); ++i)
        for (std::size_t j = 0; j < path.gammas.size(); ++j)
            err(i, j) = (Ytest - predict(path.at(i, j).model, cross)).squaredNorm() / Scalar(Ytest.size());
    return err;
}

struct Selection {
    std::size_t i = 0;
    std::size_t j = 0;
};

/// Argmin of the error matrix. With descending grids a row-major scan that keeps the
/// first minimum prefers the larger mu, then the larger gamma.
template <typename Scalar>
Selection select_best(const Mat<Scalar>& errors) {
    if (errors.size() == 0) throw invalid_argument("select_best: empty error matrix");
    if (!errors.allFinite()) throw invalid_argument("select_best: non-finite prediction error");
    Selection best;
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < errors.rows(); ++i)
        for (Eigen::Index j = 0; j < errors.cols(); ++j)
            if (errors(i, j) < lo) {
                lo = errors(i, j);
                best = {std::size_t(i), std::size_t(j)};
            }
    return best;
}

template <typename Scalar>
struct TuneResult {
    FitPath<Scalar> path;
    Mat<Scalar> errors;
    Selection best;
    MetaModel<Scalar> model;  // selected model, refit with Step 2 when gamma > 0
};

/// Fits the grid, scores it on the test set and refits the winner.
template <typename Scalar>
TuneResult<Scalar> tune(const DesignData<Scalar>& train, const EigenGram<Scalar>& grams, const Mat<Scalar>& Xtest,
                        const Vec<Scalar>& Ytest, const TuningGrid<Scalar>& grid, const FitConfig<Scalar>& cfg = {},
                        unsigned threads = 1, bool final_step_two = true) {
    TuneResult<Scalar> out;
    out.path = fit_path(train.Y, grams, grid, cfg, threads);
    out.errors = prediction_error(out.path, train.X, Xtest, Ytest, grams.groups, grams.kind);
    out.best = select_best(out.errors);
    const auto& e = out.path.at(out.best.i, out.best.j);
    out.model = e.model;
    if (final_step_two && e.gamma > 0)
        out.model = rgs_fit<Scalar>(train.Y, grams, e.mu, e.gamma, e.model, cfg, true);
    return out;
}

template <typename Scalar>
struct TwoStepResult {
    FitPath<Scalar> step1;
    Mat<Scalar> errors1;
    FitPath<Scalar> step2;
    Mat<Scalar> errors2;
    Selection best;  // indexes step2
    MetaModel<Scalar> model;
};

/// Coarse group-lasso path over frc, then ridge-group-sparse fits on the
/// selected mu and its two neighbours for each gamma > 0.
template <typename Scalar>
TwoStepResult<Scalar> two_step_tune(const DesignData<Scalar>& train, const EigenGram<Scalar>& grams,
                                    const Mat<Scalar>& Xtest, const Vec<Scalar>& Ytest,
                                    const std::vector<Scalar>& frc, std::vector<Scalar> gammas,
                                    const FitConfig<Scalar>& cfg = {}, unsigned threads = 1,
                                    bool final_step_two = true) {
    std::sort(gammas.begin(), gammas.end(), std::greater<>());
    gammas.erase(std::remove(gammas.begin(), gammas.end(), Scalar(0)), gammas.end());
    if (gammas.empty()) throw invalid_argument("two_step_tune: needs at least one gamma > 0");
    TwoStepResult<Scalar> out;
    const auto mus = mu_grid(mu_max(train.Y, grams), grams.n, frc);
    out.step1 = fit_path(train.Y, grams, TuningGrid<Scalar>{mus, {Scalar(0)}}, cfg, threads);
    out.errors1 = prediction_error(out.step1, train.X, Xtest, Ytest, grams.groups, grams.kind);
    const std::size_t i = select_best(out.errors1).i;
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(mus.size() - 1, i + 1);

    out.step2.mus.assign(mus.begin() + lo, mus.begin() + hi + 1);
    out.step2.gammas = gammas;
    out.step2.entries.resize(out.step2.mus.size() * gammas.size());
    parallel_for(out.step2.entries.size(), threads, [&](std::size_t t) {
        const std::size_t r = t / gammas.size(), j = t % gammas.size();
        const Scalar mu = out.step2.mus[r];
        try {
            out.step2.entries[t] = {mu, gammas[j],
                                    rgs_fit<Scalar>(train.Y, grams, mu, gammas[j], out.step1.at(lo + r, 0).model,
                                                    cfg, false)};
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), detail::pair_context(mu, gammas[j]));
        }
    });
    out.errors2 = prediction_error(out.step2, train.X, Xtest, Ytest, grams.groups, grams.kind);
    out.best = select_best(out.errors2);
    const auto& e = out.step2.at(out.best.i, out.best.j);
    out.model = final_step_two ? rgs_fit<Scalar>(train.Y, grams, e.mu, e.gamma, e.model, cfg, true) : e.model;
    return out;
}

} // namespace rkhsmm
