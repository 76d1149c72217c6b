#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/group_lasso.hpp"
#include "rkhsmm/meta_model.hpp"
#include "rkhsmm/root_find.hpp"

namespace rkhsmm {

/// J* = min ||2 R - n mu K^{-1} t|| over ||K^{-1/2} t|| <= 1, in eigen coordinates.
/// With u = K^{-1/2} t the problem becomes a trust-region least-squares problem whose
/// boundary solution is u_i(kappa) = 2 c sqrt(lam_i) z_i / (c^2 + kappa lam_i), c = n mu.
template <typename Scalar>
Scalar zero_test_jstar(const Vec<Scalar>& lam, const Vec<Scalar>& z, Scalar mu, Eigen::Index n) {
    if (mu < 0) throw invalid_argument("zero_test_jstar: mu must be >= 0");
    const Scalar c = Scalar(n) * mu;
    if (c == 0) return 2 * z.norm();
    const Vec<Scalar> l = lam.cwiseMax(Scalar(0));
    const Vec<Scalar> a = l.array() * z.array().square();  // lam z^2
    if (2 * std::sqrt(a.sum()) <= c) return 0;
    const Scalar c2 = c * c;
    // h(kappa) = ||u(kappa)||^2 - 1, decreasing in kappa.
    auto h = [&](Scalar kappa) { return (4 * c2 * a.array() / (c2 + kappa * l.array()).square()).sum() - 1; };
    auto neg_h = [&](Scalar kappa) { return -h(kappa); };
    auto fdf = [&](Scalar kappa) {
        const auto den = (c2 + kappa * l.array()).eval();
        const Scalar val = (4 * c2 * a.array() / den.square()).sum() - 1;
        const Scalar der = (8 * c2 * a.array() * l.array() / den.cube()).sum();
        return std::pair<Scalar, Scalar>{-val, der};
    };
    auto bracket = expand_bracket<Scalar>(neg_h, c2);
    if (!bracket) throw numeric_failure("secular equation bracketing failed");
    const Scalar kappa = newton_bisect<Scalar>(fdf, *bracket, Scalar(1e-15));
    const auto scale = (kappa * l.array() / (c2 + kappa * l.array())).eval();
    return 2 * (z.array() * scale).matrix().norm();
}

/// Nonzero ridge-group-sparse block update in eigen coordinates. The minimizer
/// has the form theta_i = z_i / ((1 + alpha) lam_i + beta) with
/// alpha = sqrt(n) gamma / (2 ||K theta||) and beta = n mu / (2 ||K^{1/2} theta||).
/// For fixed alpha, beta solves a monotone scalar equation; alpha is then the root of
/// 2 alpha ||K theta(alpha)|| = sqrt(n) gamma. Returns a zero vector when that root
/// does not exist, in which case theta = 0 is optimal.
template <typename Scalar>
Vec<Scalar> nonzero_update(const Vec<Scalar>& lam, const Vec<Scalar>& z, Scalar mu, Scalar gamma, Eigen::Index n,
                           const Vec<Scalar>& warm_theta = {}) {
    if (mu < 0 || gamma < 0) throw invalid_argument("nonzero_update: mu and gamma must be >= 0");
    const Scalar p = std::sqrt(Scalar(n)) * gamma;
    const Scalar q = Scalar(n) * mu;
    const Vec<Scalar> l = lam.cwiseMax(Scalar(0));
    const Vec<Scalar> a = l.array() * z.array().square();
    if (q > 0 && 2 * std::sqrt(a.sum()) <= q) return Vec<Scalar>::Zero(z.size());

    Scalar beta_start = 1;
    if (warm_theta.size() == z.size() && !warm_theta.isZero(0)) {
        const Scalar b_old = detail::hilbert_norm_eig(lam, warm_theta);
        if (b_old > 0) beta_start = q / (2 * b_old);
    }
    auto theta_at = [&](Scalar alpha, Scalar beta) {
        return Vec<Scalar>(z.array() / ((1 + alpha) * lam.array() + beta));
    };
    auto beta_of = [&](Scalar alpha) {
        if (q == 0) return Scalar(0);
        const Vec<Scalar> d = (1 + alpha) * lam;
        const Scalar beta = detail::solve_shift<Scalar>(a, d, q, beta_start);
        beta_start = beta;
        return beta;
    };

    Scalar alpha = 0;
    if (p > 0) {
        if (q == 0) {
            const Scalar zn = z.norm();
            if (2 * zn <= p) return Vec<Scalar>::Zero(z.size());
            alpha = p / (2 * zn - p);
        } else {
            auto g = [&](Scalar al) {
                const Vec<Scalar> th = theta_at(al, beta_of(al));
                return 2 * al * detail::empirical_norm_eig(lam, th) - p;
            };
            Scalar start = 1;
            if (warm_theta.size() == z.size() && !warm_theta.isZero(0)) {
                const Scalar a_old = detail::empirical_norm_eig(lam, warm_theta);
                if (a_old > 0) start = p / (2 * a_old);
            }
            // No sign change means the block optimum is zero. The inner solve can also
            // run off its range before the outer search does; that case means the same.
            std::optional<Bracket<Scalar>> bracket;
            try {
                bracket = expand_bracket<Scalar>(g, start);
            } catch (const numeric_failure&) {
            }
            if (!bracket) return Vec<Scalar>::Zero(z.size());
            alpha = illinois<Scalar>(g, *bracket, Scalar(1e-14) * p);
        }
    }
    const Scalar beta = beta_of(alpha);
    Vec<Scalar> theta = theta_at(alpha, beta);
    if (!theta.allFinite()) throw numeric_failure("non-finite block update");

    // Stationarity in eigen coordinates: 2 lam (z - lam th) - p lam^2 th / ||lam th|| - q lam th / b = 0.
    const Scalar an = detail::empirical_norm_eig(lam, theta);
    const Scalar bn = detail::hilbert_norm_eig(lam, theta);
    Vec<Scalar> res = 2 * (lam.array() * (z.array() - lam.array() * theta.array())).matrix();
    if (p > 0) res -= (p / an) * (lam.array().square() * theta.array()).matrix();
    if (q > 0) res -= (q / bn) * (lam.array() * theta.array()).matrix();
    const Scalar scale = 2 * (lam.array() * z.array()).matrix().norm();
    if (!(res.norm() <= Scalar(1e-8) * scale))
        throw numeric_failure("block update failed the stationarity check (relative residual " +
                              std::to_string(double(res.norm() / scale)) + ")");
    return theta;
}

/// ||Y - f0 - sum K_v theta_v||^2 + sqrt(n) gamma sum gamma'_v ||K_v theta_v||
///   + n mu sum mu'_v ||K_v^{1/2} theta_v||.
template <typename Scalar>
Scalar rgs_criterion(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, const MetaModel<Scalar>& m, Scalar mu,
                     Scalar gamma, const Vec<Scalar>& weights_gamma = {}, const Vec<Scalar>& weights_mu = {}) {
    const Eigen::Index n = grams.n;
    if (m.theta.rows() != Eigen::Index(grams.size()) || m.theta.cols() != n || Y.size() != n)
        throw invalid_argument("rgs_criterion: dimension mismatch");
    Vec<Scalar> r = (Y.array() - m.intercept).matrix();
    Scalar pen_g = 0, pen_m = 0;
    for (std::size_t v = 0; v < grams.size(); ++v) {
        if (m.theta.row(v).isZero(0)) continue;
        const Vec<Scalar> w = grams[v].vectors.transpose() * m.theta.row(v).transpose();
        r -= grams[v].vectors * (grams[v].values.array() * w.array()).matrix();
        pen_g += (weights_gamma.size() ? weights_gamma(v) : Scalar(1)) * detail::empirical_norm_eig(grams[v].values, w);
        pen_m += (weights_mu.size() ? weights_mu(v) : Scalar(1)) * detail::hilbert_norm_eig(grams[v].values, w);
    }
    return r.squaredNorm() + std::sqrt(Scalar(n)) * gamma * pen_g + Scalar(n) * mu * pen_m;
}

/// RKHS ridge group sparse by two-step block coordinate descent. Step 1 cycles
/// over the support of `init` only; Step 2 (optional) cycles over all groups.
/// A block is zero iff J* <= sqrt(n) gamma gamma'_v (J* <= gamma gamma'_v with
/// cfg.unscaled_zero_test).
template <typename Scalar>
MetaModel<Scalar> rgs_fit(const Vec<Scalar>& Y, const EigenGram<Scalar>& grams, Scalar mu, Scalar gamma,
                          const MetaModel<Scalar>& init, const FitConfig<Scalar>& cfg = {},
                          bool do_step_two = false) {
    if (!(mu >= 0) || !(gamma >= 0) || !std::isfinite(double(mu)) || !std::isfinite(double(gamma)))
        throw invalid_argument("rgs_fit: mu and gamma must be finite and >= 0");
    cfg.validate(grams.size());
    detail::BlockState<Scalar> st(Y, grams);
    st.load(init);
    const Eigen::Index n = grams.n;
    const Scalar rootn = std::sqrt(Scalar(n));

    auto update = [&](std::size_t v) {
        const auto& ge = grams[v];
        const Vec<Scalar> z = st.partial_residual_coords(v);
        const Scalar mu_v = mu * cfg.weight_mu(v);
        const Scalar gamma_v = gamma * cfg.weight_gamma(v);
        const Scalar threshold = cfg.unscaled_zero_test ? gamma_v : rootn * gamma_v;
        try {
            if (zero_test_jstar<Scalar>(ge.values, z, mu_v, n) <= threshold) {
                st.set_zero(v);
                return;
            }
            Vec<Scalar> th = nonzero_update<Scalar>(ge.values, z, mu_v, gamma_v, n,
                                                    st.active[v] ? st.w[v] : Vec<Scalar>());
            if (th.isZero(0))
                st.set_zero(v);
            else
                st.set(v, std::move(th));
        } catch (const numeric_failure& e) {
            throw numeric_failure(e.what(), grams.groups[v].name);
        }
    };
    auto crit = [&](const detail::BlockState<Scalar>& s) {
        Scalar pen_g = 0, pen_m = 0;
        for (std::size_t v = 0; v < s.w.size(); ++v) {
            if (!s.active[v]) continue;
            pen_g += cfg.weight_gamma(v) * detail::empirical_norm_eig(grams[v].values, s.w[v]);
            pen_m += cfg.weight_mu(v) * detail::hilbert_norm_eig(grams[v].values, s.w[v]);
        }
        return s.scr() + rootn * gamma * pen_g + Scalar(n) * mu * pen_m;
    };

    std::vector<std::size_t> step_one(init.support.begin(), init.support.end());
    auto res = detail::run_bcd(st, step_one, update, crit, cfg, "rgs-step1");
    int iters = res.iter;
    bool converged = res.converged;
    if (do_step_two) {
        std::vector<std::size_t> all(grams.size());
        for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
        res = detail::run_bcd(st, all, update, crit, cfg, "rgs-step2");
        iters += res.iter;
        converged = converged && res.converged;
    }

    auto m = detail::to_model(st);
    m.crit = crit(st);
    m.mu = mu;
    m.gamma = gamma;
    const Eigen::Index V = Eigen::Index(grams.size());
    m.mu_v = cfg.weights_mu.size() ? Vec<Scalar>(mu * cfg.weights_mu) : Vec<Scalar>::Constant(V, mu);
    m.gamma_v = cfg.weights_gamma.size() ? Vec<Scalar>(gamma * cfg.weights_gamma) : Vec<Scalar>::Constant(V, gamma);
    m.iter = iters;
    m.converged = converged;
    m.rel_diff_crit = Scalar(res.rel_diff_crit);
    m.rel_diff_par = Scalar(res.rel_diff_par);
    return m;
}

} // namespace rkhsmm
