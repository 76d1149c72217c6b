#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/meta_model.hpp"
#include "rkhsmm/root_find.hpp"

namespace rkhsmm {

/// Smallest mu_g for which the group-lasso solution is identically zero:
/// max_v (2/sqrt(n)) ||K_v^{1/2} (Y - mean(Y))||.
template <typename Scalar>
Scalar mu_max(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams) {
    if (Y.size() != grams.n) throw invalid_argument("mu_max: response length does not match Gram size");
    const Vec<Scalar> centered = (Y.array() - Y.mean()).matrix();
    Scalar best = 0;
    for (std::size_t v = 0; v < grams.size(); ++v) {
        const Vec<Scalar> z = grams[v].vectors.transpose() * centered;
        best = std::max(best, detail::hilbert_norm_eig(grams[v].values, z));
    }
    return 2 * best / std::sqrt(Scalar(grams.n));
}

template <typename Scalar>
struct RhoSolution {
    Vec<Scalar> theta;  // eigen coordinates
    Scalar rho;
};

namespace detail {

/// Root rho > 0 of 2 sqrt(sum_i a_i rho^2 / (d_i + rho)^2) = s, which is increasing
/// in rho. Requires 2 sqrt(sum a_i) > s so that a root exists.
template <typename Scalar>
Scalar solve_shift(const Vec<Scalar>& a, const Vec<Scalar>& d, Scalar s, Scalar start) {
    auto y = [&](Scalar rho) { return 2 * std::sqrt((a.array() * (rho / (d.array() + rho)).square()).sum()) - s; };
    auto ydy = [&](Scalar rho) {
        const auto ratio = (rho / (d.array() + rho)).eval();
        const Scalar S = (a.array() * ratio.square()).sum();
        const Scalar dS = (a.array() * 2 * ratio * d.array() / (d.array() + rho).square()).sum();
        const Scalar root = std::sqrt(S);
        return std::pair<Scalar, Scalar>{2 * root - s, root > 0 ? dS / root : Scalar(1)};
    };
    if (!(start > 0) || !std::isfinite(double(start))) start = 1;
    auto bracket = expand_bracket<Scalar>(y, start);
    if (!bracket) throw numeric_failure("rho bracketing left [1e-30, 1e30]");
    if (bracket->lo == bracket->hi) return bracket->lo;
    return newton_bisect<Scalar>(ydy, *bracket, Scalar(1e-13) * s);
}

} // namespace detail

/// Nonzero group-lasso block update in eigen coordinates. Finds rho > 0 with
/// 2 rho ||K^{1/2} (K + rho I)^{-1} R|| = sqrt(n) mu_g, bracketing by factors of 10
/// from 1 or from the warm value sqrt(n) mu_g / (2 ||K^{1/2} theta_old||).
template <typename Scalar>
RhoSolution<Scalar> solve_rho(const Vec<Scalar>& lam, const Vec<Scalar>& z, Scalar mu_g, Eigen::Index n,
                              std::optional<Scalar> warm_theta_norm = std::nullopt) {
    const Vec<Scalar> a = lam.cwiseMax(Scalar(0)).array() * z.array().square();
    const Scalar s = std::sqrt(Scalar(n)) * mu_g;
    Scalar start = 1;
    if (warm_theta_norm && *warm_theta_norm > 0) start = s / (2 * *warm_theta_norm);
    const Scalar rho = detail::solve_shift<Scalar>(a, lam, s, start);
    return {(z.array() / (lam.array() + rho)).matrix(), rho};
}

/// ||Y - f0 - sum K_v theta_v||^2 + sqrt(n) mu_g sum mu'_v ||K_v^{1/2} theta_v||, evaluated from
/// the model's stored theta with the corrected spectra.
template <typename Scalar>
Scalar group_lasso_criterion(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, const MetaModel<Scalar>& m,
                             Scalar mu_g, const Vec<Scalar>& weights_mu = {}) {
    const Eigen::Index n = grams.n;
    if (m.theta.rows() != Eigen::Index(grams.size()) || m.theta.cols() != n || Y.size() != n)
        throw invalid_argument("group_lasso_criterion: dimension mismatch");
    Vec<Scalar> r = (Y.array() - m.intercept).matrix();
    Scalar pen = 0;
    for (std::size_t v = 0; v < grams.size(); ++v) {
        if (m.theta.row(v).isZero(0)) continue;
        const Vec<Scalar> w = grams[v].vectors.transpose() * m.theta.row(v).transpose();
        r -= grams[v].vectors * (grams[v].values.array() * w.array()).matrix();
        pen += (weights_mu.size() ? weights_mu(v) : Scalar(1)) * detail::hilbert_norm_eig(grams[v].values, w);
    }
    return r.squaredNorm() + std::sqrt(Scalar(n)) * mu_g * pen;
}

namespace detail {

template <typename Scalar>
Scalar gl_penalty(const BlockState<Scalar>& st, Scalar mu_g, const FitConfig<Scalar>& cfg) {
    Scalar pen = 0;
    for (std::size_t v = 0; v < st.w.size(); ++v)
        if (st.active[v]) pen += cfg.weight_mu(v) * hilbert_norm_eig((*st.grams)[v].values, st.w[v]);
    return std::sqrt(Scalar(st.grams->n)) * mu_g * pen;
}

} // namespace detail

/// RKHS group lasso by block coordinate descent. Each block is either set to
/// zero, when ||(2/sqrt(n)) K_v^{1/2} R_v|| <= mu_g mu'_v, or updated through solve_rho.
template <typename Scalar>
MetaModel<Scalar> group_lasso_fit(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, Scalar mu_g,
                                  const FitConfig<Scalar>& cfg = {},
                                  const MetaModel<Scalar>* warm = nullptr) {
    if (!(mu_g > 0) || !std::isfinite(double(mu_g))) throw invalid_argument("group_lasso_fit: mu_g must be positive");
    cfg.validate(grams.size());
    detail::BlockState<Scalar> st(Y, grams);
    if (warm) st.load(*warm);
    const Eigen::Index n = grams.n;
    const Scalar two_over_rootn = 2 / std::sqrt(Scalar(n));

    auto update = [&](std::size_t v) {
        const auto& ge = grams[v];
        const Vec<Scalar> z = st.partial_residual_coords(v);
        const Scalar mu_v = mu_g * cfg.weight_mu(v);
        if (two_over_rootn * detail::hilbert_norm_eig(ge.values, z) <= mu_v) {
            st.set_zero(v);
            return;
        }
        std::optional<Scalar> warm_norm;
        if (st.active[v]) warm_norm = detail::hilbert_norm_eig(ge.values, st.w[v]);
        try {
            st.set(v, solve_rho<Scalar>(ge.values, z, mu_v, n, warm_norm).theta);
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), grams.groups[v].name);
        }
    };
    auto crit = [&](const detail::BlockState<Scalar>& s) { return s.scr() + detail::gl_penalty(s, mu_g, cfg); };

    std::vector<std::size_t> all(grams.size());
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
    const auto res = detail::run_bcd(st, all, update, crit, cfg, "group-lasso");

    auto m = detail::to_model(st);
    m.crit = crit(st);
    m.mu = mu_g;
    m.gamma = 0;
    m.mu_v = Vec<Scalar>::Constant(Eigen::Index(grams.size()), mu_g);
    if (cfg.weights_mu.size()) m.mu_v = mu_g * cfg.weights_mu;
    m.gamma_v = Vec<Scalar>::Zero(Eigen::Index(grams.size()));
    m.iter = res.iter;
    m.converged = res.converged;
    m.rel_diff_crit = Scalar(res.rel_diff_crit);
    m.rel_diff_par = Scalar(res.rel_diff_par);
    return m;
}

} // namespace rkhsmm
