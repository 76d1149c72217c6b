#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gram.hpp"

namespace rkhsmm {

/// Fitted additive meta-model f0 + sum_v K_v theta_v.
template <typename Scalar>
struct MetaModel {
    Scalar intercept = 0;
    Mat<Scalar> theta;   // vMax x n, row v holds theta_v
    Mat<Scalar> fit_v;   // n x vMax, column v holds K_v theta_v
    Vec<Scalar> fitted;  // intercept + row sums of fit_v
    Vec<Scalar> norm_n;  // ||K_v theta_v|| / sqrt(n)
    Vec<Scalar> norm_H;  // ||K_v^{1/2} theta_v||
    std::vector<int> support;  // 0-based active group indices, ascending
    Scalar scr = 0;
    Scalar crit = 0;
    // mu is the group-lasso mu_g for gamma == 0 fits and the ridge-group-sparse mu otherwise.
    Scalar mu = 0;
    Scalar gamma = 0;
    Vec<Scalar> mu_v;     // effective per-group Hilbert-norm weights
    Vec<Scalar> gamma_v;  // effective per-group empirical-norm weights
    int iter = 0;
    bool converged = false;
    Scalar rel_diff_crit = 0;  // relative criterion change over the last sweep
    Scalar rel_diff_par = 0;   // relative coefficient change over the last sweep

    std::size_t n_support() const noexcept { return support.size(); }
    Eigen::Index n() const noexcept { return theta.cols(); }
    Eigen::Index groups() const noexcept { return theta.rows(); }
};

/// Progress record passed to FitConfig::on_sweep after every full sweep.
template <typename Scalar>
struct SweepInfo {
    const char* stage;
    int iter;
    Scalar crit;
    std::size_t active;
    Scalar rel_diff_crit;
    Scalar rel_diff_par;
};

template <typename Scalar>
struct FitConfig {
    int max_iter = 1000;
    Scalar crit_tol = Scalar(1e-4);
    Scalar par_tol = Scalar(1e-4);
    Vec<Scalar> weights_gamma;  // empty means all ones
    Vec<Scalar> weights_mu;     // empty means all ones
    bool unscaled_zero_test = false;
    std::function<void(const SweepInfo<Scalar>&)> on_sweep;

    void validate(std::size_t groups) const {
        if (max_iter < 1) throw invalid_argument("max_iter must be >= 1");
        if (!(crit_tol > 0) || !(par_tol > 0)) throw invalid_argument("tolerances must be positive");
        auto check = [&](const Vec<Scalar>& w, const char* what) {
            if (w.size() == 0) return;
            if (std::size_t(w.size()) != groups)
                throw invalid_argument(std::string(what) + " has length " + std::to_string(w.size()) +
                                       ", expected " + std::to_string(groups));
            if (!(w.array() > 0).all() || !w.allFinite())
                throw invalid_argument(std::string(what) + " entries must be positive and finite");
        };
        check(weights_gamma, "weights_gamma");
        check(weights_mu, "weights_mu");
    }

    Scalar weight_gamma(std::size_t v) const { return weights_gamma.size() ? weights_gamma(v) : Scalar(1); }
    Scalar weight_mu(std::size_t v) const { return weights_mu.size() ? weights_mu(v) : Scalar(1); }
};

namespace detail {

template <typename Scalar>
Scalar hilbert_norm_eig(const Vec<Scalar>& lam, const Vec<Scalar>& w) {
    return std::sqrt((lam.cwiseMax(Scalar(0)).array() * w.array().square()).sum());
}

template <typename Scalar>
Scalar empirical_norm_eig(const Vec<Scalar>& lam, const Vec<Scalar>& w) {
    return (lam.array() * w.array()).matrix().norm();
}

/// Mutable state of block coordinate descent, held in eigen coordinates:
/// theta_v = Q_v w_v and K_v theta_v = Q_v (lambda_v .* w_v).
template <typename Scalar>
struct BlockState {
    const EigenGram<Scalar>* grams = nullptr;
    const Vec<Scalar>* Y = nullptr;
    std::vector<Vec<Scalar>> w;
    std::vector<char> active;
    Mat<Scalar> fit;  // n x vMax
    Vec<Scalar> F;    // sum of fit columns
    Scalar f0 = 0;

    BlockState(const Vec<Scalar>& y, const EigenGram<Scalar>& g) : grams(&g), Y(&y) {
        const Eigen::Index n = g.n;
        if (y.size() != n)
            throw invalid_argument("response length " + std::to_string(y.size()) + " does not match Gram size " +
                                   std::to_string(n));
        if (!y.allFinite()) throw invalid_argument("response contains non-finite values");
        w.assign(g.size(), Vec<Scalar>::Zero(n));
        active.assign(g.size(), 0);
        fit = Mat<Scalar>::Zero(n, Eigen::Index(g.size()));
        F = Vec<Scalar>::Zero(n);
    }

    void load(const MetaModel<Scalar>& m) {
        const Eigen::Index n = grams->n;
        if (m.theta.rows() != Eigen::Index(grams->size()) || m.theta.cols() != n)
            throw invalid_argument("warm-start model does not match the Gram dimensions");
        for (std::size_t v = 0; v < grams->size(); ++v) {
            if (m.theta.row(v).isZero(0)) continue;
            w[v] = (*grams)[v].vectors.transpose() * m.theta.row(v).transpose();
            active[v] = 1;
            fit.col(v) = (*grams)[v].vectors * ((*grams)[v].values.array() * w[v].array()).matrix();
        }
        refresh();
    }

    void refresh() { F = fit.rowwise().sum(); }

    void set_zero(std::size_t v) {
        if (!active[v]) return;
        F -= fit.col(v);
        fit.col(v).setZero();
        w[v].setZero();
        active[v] = 0;
    }

    void set(std::size_t v, Vec<Scalar> wv) {
        const auto& ge = (*grams)[v];
        Vec<Scalar> fv = ge.vectors * (ge.values.array() * wv.array()).matrix();
        F += fv - fit.col(v);
        fit.col(v) = fv;
        w[v] = std::move(wv);
        active[v] = 1;
    }

    /// Eigen coordinates Q_v^T R_v of the partial residual Y - f0 - sum_{w != v} K_w theta_w.
    Vec<Scalar> partial_residual_coords(std::size_t v) const {
        Vec<Scalar> r = (Y->array() - f0).matrix() - F + fit.col(v);
        return (*grams)[v].vectors.transpose() * r;
    }

    void update_intercept() { f0 = (*Y - F).mean(); }

    Scalar scr() const { return ((Y->array() - f0).matrix() - F).squaredNorm(); }

    std::size_t active_count() const {
        std::size_t k = 0;
        for (char a : active) k += a != 0;
        return k;
    }
};

struct BcdOutcome {
    int iter = 0;
    bool converged = false;
    double rel_diff_crit = 0;
    double rel_diff_par = 0;
};

/// Cyclic block coordinate descent over `visit`. Each sweep refits the
/// intercept, then calls update(v) for every listed group in order. Stops when
/// either relative change drops below its tolerance or after max_iter sweeps.
template <typename Scalar, typename Update, typename Crit>
BcdOutcome run_bcd(BlockState<Scalar>& st, const std::vector<std::size_t>& visit, Update&& update, Crit&& crit,
                   const FitConfig<Scalar>& cfg, const char* stage) {
    BcdOutcome out;
    st.update_intercept();
    Scalar prev = crit(st);
    std::vector<Vec<Scalar>> w_prev;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        w_prev = st.w;
        st.refresh();
        st.update_intercept();
        for (std::size_t v : visit) update(v);
        const Scalar now = crit(st);
        if (!std::isfinite(double(now))) throw numeric_failure("criterion became non-finite", stage);
        Scalar diff2 = 0, base2 = 0;
        for (std::size_t v = 0; v < st.w.size(); ++v) {
            diff2 += (st.w[v] - w_prev[v]).squaredNorm();
            base2 += w_prev[v].squaredNorm();
        }
        const Scalar rdc = prev == 0 ? (now == 0 ? Scalar(0) : std::numeric_limits<Scalar>::infinity())
                                     : std::abs(prev - now) / std::abs(prev);
        const Scalar rdp = base2 == 0 ? (diff2 == 0 ? Scalar(0) : std::numeric_limits<Scalar>::infinity())
                                      : std::sqrt(diff2 / base2);
        out.iter = it;
        out.rel_diff_crit = double(rdc);
        out.rel_diff_par = double(rdp);
        if (cfg.on_sweep) cfg.on_sweep({stage, it, now, st.active_count(), rdc, rdp});
        prev = now;
        if (rdc < cfg.crit_tol || rdp < cfg.par_tol) {
            out.converged = true;
            break;
        }
    }
    st.refresh();
    return out;
}

template <typename Scalar>
MetaModel<Scalar> to_model(const BlockState<Scalar>& st) {
    const auto& g = *st.grams;
    const Eigen::Index n = g.n;
    const Eigen::Index V = Eigen::Index(g.size());
    MetaModel<Scalar> m;
    m.intercept = st.f0;
    m.theta = Mat<Scalar>::Zero(V, n);
    m.fit_v = st.fit;
    m.norm_n = Vec<Scalar>::Zero(V);
    m.norm_H = Vec<Scalar>::Zero(V);
    for (Eigen::Index v = 0; v < V; ++v) {
        if (!st.active[v]) continue;
        m.theta.row(v) = (g[v].vectors * st.w[v]).transpose();
        m.norm_n(v) = empirical_norm_eig(g[v].values, st.w[v]) / std::sqrt(Scalar(n));
        m.norm_H(v) = hilbert_norm_eig(g[v].values, st.w[v]);
        if (!m.theta.row(v).isZero(0)) m.support.push_back(int(v));
    }
    m.fitted = (st.fit.rowwise().sum().array() + st.f0).matrix();
    m.scr = st.scr();
    return m;
}

} // namespace detail

} // namespace rkhsmm
