#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/groups.hpp"

namespace rkhsmm {

template <typename Scalar>
struct GFunctionSpec {
    int d = 5;
    std::vector<Scalar> c;
    Scalar sigma = 0;
    std::uint64_t seed = 1;

    void validate() const {
        if (d < 1) throw invalid_argument("g-function: d must be >= 1");
        if (int(c.size()) != d)
            throw invalid_argument("g-function: expected " + std::to_string(d) + " coefficients, got " +
                                   std::to_string(c.size()));
        for (Scalar ca : c)
            if (!(ca > 0)) throw invalid_argument("g-function: coefficients must be positive");
        if (!(sigma >= 0)) throw invalid_argument("g-function: sigma must be >= 0");
    }
};

/// c = (0.2, 0.6, 0.8, 100, ..., 100).
template <typename Scalar>
std::vector<Scalar> standard_coefficients(int d) {
    std::vector<Scalar> c(std::max(d, 0), Scalar(100));
    const Scalar head[] = {Scalar(0.2), Scalar(0.6), Scalar(0.8)};
    for (int a = 0; a < std::min(d, 3); ++a) c[a] = head[a];
    return c;
}

template <typename Scalar>
GFunctionSpec<Scalar> standard_spec(int d, Scalar sigma = Scalar(0.2), std::uint64_t seed = 1) {
    return {d, standard_coefficients<Scalar>(d), sigma, seed};
}

/// prod_a (|4 x_a - 2| + c_a) / (1 + c_a).
template <typename Derived, typename Scalar>
Scalar g_function(const Eigen::MatrixBase<Derived>& x, const std::vector<Scalar>& c) {
    if (std::size_t(x.size()) != c.size()) throw invalid_argument("g_function: dimension mismatch");
    Scalar out = 1;
    for (Eigen::Index a = 0; a < x.size(); ++a)
        out *= (std::abs(4 * Scalar(x(a)) - 2) + c[a]) / (1 + c[a]);
    return out;
}

template <typename Scalar>
Vec<Scalar> g_function_rows(const Mat<Scalar>& X, const std::vector<Scalar>& c) {
    Vec<Scalar> y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = g_function(X.row(i), c);
    return y;
}

/// Partial variance D_a = 1 / (3 (1 + c_a)^2).
template <typename Scalar>
Scalar gfunction_partial_variance(Scalar c) {
    return Scalar(1) / (3 * (1 + c) * (1 + c));
}

/// S_v = prod_{a in v} D_a / D with D = prod_a (1 + D_a) - 1 over all d variables,
/// for every group of `groups`.
template <typename Scalar>
Vec<Scalar> analytic_sobol(const std::vector<Scalar>& c, const GroupSet& groups) {
    if (int(c.size()) != groups.d) throw invalid_argument("analytic_sobol: coefficient count does not match d");
    std::vector<Scalar> Da(c.size());
    Scalar D = 1;
    for (std::size_t a = 0; a < c.size(); ++a) {
        if (!(c[a] > 0)) throw invalid_argument("analytic_sobol: coefficients must be positive");
        Da[a] = gfunction_partial_variance(c[a]);
        D *= 1 + Da[a];
    }
    D -= 1;
    Vec<Scalar> S(Eigen::Index(groups.size()));
    for (std::size_t v = 0; v < groups.size(); ++v) {
        Scalar p = 1;
        for (int a : groups[v].vars) p *= Da[a - 1];
        S(Eigen::Index(v)) = p / D;
    }
    return S;
}

/// Stratified Latin hypercube on [0,1]^d: column a holds (perm_a(i) + U_i) / n,
/// so every stratum [k/n, (k+1)/n) contains exactly one point per column.
template <typename Scalar, typename Rng>
Mat<Scalar> lhs_sample(Eigen::Index n, Eigen::Index d, Rng& rng) {
    if (n < 1 || d < 1) throw invalid_argument("lhs_sample: n and d must be >= 1");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Mat<Scalar> X(n, d);
    std::vector<Eigen::Index> perm(n);
    for (Eigen::Index a = 0; a < d; ++a) {
        std::iota(perm.begin(), perm.end(), Eigen::Index(0));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < n; ++i) {
            Scalar x = (Scalar(perm[i]) + Scalar(unif(rng))) / Scalar(n);
            X(i, a) = std::min(x, std::nextafter(Scalar(perm[i] + 1) / Scalar(n), Scalar(0)));
        }
    }
    return X;
}

/// Generator for one repetition: independent, reproducible streams per (seed, stream).
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                      std::uint32_t(stream >> 32)};
    return std::mt19937_64(seq);
}

/// X from a Latin hypercube, Y = g(X) + sigma * eps with standard normal eps.
template <typename Scalar, typename Rng>
DesignData<Scalar> generate_dataset(const GFunctionSpec<Scalar>& spec, Eigen::Index n, Rng& rng) {
    spec.validate();
    DesignData<Scalar> data;
    data.X = lhs_sample<Scalar>(n, spec.d, rng);
    data.Y = g_function_rows(data.X, spec.c);
    if (spec.sigma > 0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) data.Y(i) += spec.sigma * Scalar(normal(rng));
    }
    return data;
}

template <typename Scalar>
struct BenchMetrics {
    Scalar gpe = 0;
    Scalar mse = 0;
    Scalar re = 0;
};

/// GPE: mean over repetitions of the per-repetition mean squared prediction error.
template <typename Scalar>
Scalar global_prediction_error(const std::vector<Scalar>& per_rep_mse) {
    if (per_rep_mse.empty()) throw invalid_argument("global_prediction_error: no repetitions");
    return std::accumulate(per_rep_mse.begin(), per_rep_mse.end(), Scalar(0)) / Scalar(per_rep_mse.size());
}

/// MSE = sum_v (b_v^2 + w_v^2) with b_v the bias of the mean estimate and w_v^2 the
/// (1/Nr) spread of the estimates around their mean. `estimates[r]` is the index vector
/// of repetition r.
template <typename Scalar>
Scalar sobol_mse(const std::vector<Vec<Scalar>>& estimates, const Vec<Scalar>& truth) {
    if (estimates.empty()) throw invalid_argument("sobol_mse: no repetitions");
    Vec<Scalar> mean = Vec<Scalar>::Zero(truth.size());
    for (const auto& e : estimates) {
        if (e.size() != truth.size()) throw invalid_argument("sobol_mse: length mismatch");
        mean += e;
    }
    mean /= Scalar(estimates.size());
    Vec<Scalar> var = Vec<Scalar>::Zero(truth.size());
    for (const auto& e : estimates) var += (e - mean).array().square().matrix();
    var /= Scalar(estimates.size());
    return (mean - truth).squaredNorm() + var.sum();
}

/// RE = sum_v |S_hat_v - S_v| / S_v over groups with S_v above `threshold`.
template <typename Scalar>
Scalar relative_error(const Vec<Scalar>& estimate, const Vec<Scalar>& truth, Scalar threshold = Scalar(1e-4)) {
    if (estimate.size() != truth.size()) throw invalid_argument("relative_error: length mismatch");
    Scalar re = 0;
    for (Eigen::Index v = 0; v < truth.size(); ++v)
        if (truth(v) > threshold) re += std::abs(estimate(v) - truth(v)) / truth(v);
    return re;
}

/// Aggregates per-repetition results into the benchmark metrics. RE is
/// computed on the mean of the estimated indices.
template <typename Scalar>
BenchMetrics<Scalar> evaluate_metrics(const std::vector<Scalar>& per_rep_mse, const std::vector<Vec<Scalar>>& estimates,
                                      const Vec<Scalar>& truth, Scalar re_threshold = Scalar(1e-4)) {
    BenchMetrics<Scalar> m;
    m.gpe = global_prediction_error(per_rep_mse);
    m.mse = sobol_mse(estimates, truth);
    Vec<Scalar> mean = Vec<Scalar>::Zero(truth.size());
    for (const auto& e : estimates) mean += e;
    mean /= Scalar(estimates.size());
    m.re = relative_error(mean, truth, re_threshold);
    return m;
}

} // namespace rkhsmm
