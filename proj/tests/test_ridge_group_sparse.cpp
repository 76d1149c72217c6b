#include <doctest.h>

#include "oracle.hpp"
#include "rkhsmm/rkhsmm.hpp"

using namespace rkhsmm;
using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

namespace {

FitConfig<double> tight() {
    FitConfig<double> cfg;
    cfg.crit_tol = 1e-14;
    cfg.par_tol = 1e-12;
    cfg.max_iter = 5000;
    return cfg;
}

VecD vec(std::initializer_list<double> xs) {
    VecD v(Eigen::Index(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

/// Dense grid search of J(t) = ||2R - c K^{-1} t|| over ||K^{-1/2} t|| <= 1 for K = diag(lam), n = 2.
double grid_jstar(const VecD& lam, const VecD& z, double c) {
    double best = 1e300;
    const int N = 800;
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) {
            const double u0 = -1 + 2.0 * i / N, u1 = -1 + 2.0 * j / N;
            if (u0 * u0 + u1 * u1 > 1) continue;
            const double r0 = 2 * z(0) - c * u0 / std::sqrt(lam(0));
            const double r1 = 2 * z(1) - c * u1 / std::sqrt(lam(1));
            best = std::min(best, std::hypot(r0, r1));
        }
    return best;
}

} // namespace

TEST_CASE("J* examples") {
    CHECK(zero_test_jstar(vec({1.0, 2.0}), vec({0.0, 0.0}), 0.3, 4) == 0.0);
    const VecD z = vec({1.0, -2.0, 0.5});
    CHECK(zero_test_jstar(vec({1.0, 0.1, 0.01}), z, 0.0, 3) == doctest::Approx(2 * z.norm()));
    // lam = 1, z = 5, c = n mu = 2: kappa = 16 and J* = 8.
    CHECK(zero_test_jstar(vec({1.0}), vec({5.0}), 2.0, 1) == doctest::Approx(8.0).epsilon(1e-12));
    // Interior minimizer.
    CHECK(zero_test_jstar(vec({1.0}), vec({0.5}), 2.0, 1) == 0.0);
}

TEST_CASE("J* agrees with a grid search over the constraint set") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 6; ++rep) {
        const VecD lam = vec({0.2 + unif(rng), 0.05 + unif(rng)});
        const VecD z = vec({4 * unif(rng) - 2, 4 * unif(rng) - 2});
        const double c = 0.5 + unif(rng);
        const double js = zero_test_jstar(lam, z, c / 2, 2);
        CHECK(js <= grid_jstar(lam, z, c) + 1e-12);
        CHECK(grid_jstar(lam, z, c) - js <= 0.05);
    }
}

TEST_CASE("nonzero update scalar soft threshold") {
    const double n = 4, mu = 0.3, gamma = 0.5;
    const double z = 5;
    auto th = nonzero_update(vec({1.0}), vec({z}), mu, gamma, 4);
    CHECK(th(0) == doctest::Approx(z - (std::sqrt(n) * gamma + n * mu) / 2).epsilon(1e-10));
}

TEST_CASE("nonzero update with gamma = 0 equals solve_rho") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + rep;
        VecD lam(n), z(n);
        for (int i = 0; i < n; ++i) {
            lam(i) = std::pow(10.0, -6 * unif(rng));
            z(i) = 2 * unif(rng) - 1;
        }
        const double knorm = std::sqrt((lam.array() * z.array().square()).sum());
        const double mu = 0.5 * 2 * knorm / n;  // n mu below 2 ||K^{1/2} z||
        auto a = nonzero_update(lam, z, mu, 0.0, n);
        auto b = solve_rho(lam, z, std::sqrt(double(n)) * mu, n).theta;
        CHECK((a - b).norm() <= 1e-9 * b.norm());
    }
}

TEST_CASE("nonzero update satisfies stationarity") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 3 + rep % 20;
        VecD lam(n), z(n);
        for (int i = 0; i < n; ++i) {
            lam(i) = std::pow(10.0, -8 * unif(rng));
            z(i) = 4 * unif(rng) - 2;
        }
        const double mu = 0.3 * unif(rng) * 2 * std::sqrt((lam.array() * z.array().square()).sum()) / n;
        const double gamma = unif(rng) * 0.5;
        const double jstar = zero_test_jstar(lam, z, mu, n);
        if (jstar <= std::sqrt(double(n)) * gamma) continue;
        const VecD th = nonzero_update(lam, z, mu, gamma, n);
        const double p = std::sqrt(double(n)) * gamma, q = n * mu;
        const double a = (lam.array() * th.array()).matrix().norm();
        const double b = std::sqrt((lam.array() * th.array().square()).sum());
        const VecD res = 2 * (lam.array() * (z.array() - lam.array() * th.array())).matrix() -
                        (p / a) * (lam.array().square() * th.array()).matrix() -
                        (q / b) * (lam.array() * th.array()).matrix();
        CHECK(res.norm() <= 1e-8 * 2 * (lam.array() * z.array()).matrix().norm());
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("ridge group sparse criterion") {
    auto data = oracle::random_design(12, 2, 5);
    auto gs = build_group_set(2, 2);
    auto eg = compute_gram(data.X, gs, KernelKind::matern);
    auto gl = group_lasso_fit(data.Y, eg, mu_max(data.Y, eg) / 5, tight());
    const double n = 12, mu = 0.01, gamma = 0.05;
    const auto K = oracle::dense_grams(eg);
    const double dense =
        oracle::dense_criterion(data.Y, K, gl.intercept, oracle::model_theta(gl), std::sqrt(n) * gamma, n * mu);
    CHECK(rgs_criterion(data.Y, eg, gl, mu, gamma) == doctest::Approx(dense).epsilon(1e-12));
    CHECK(rgs_criterion(data.Y, eg, gl, mu, 0.0) ==
          doctest::Approx(group_lasso_criterion(data.Y, eg, gl, std::sqrt(n) * mu)).epsilon(1e-14));
    MetaModel<double> null = gl;
    null.theta.setZero();
    CHECK(rgs_criterion(data.Y, eg, null, mu, gamma) ==
          doctest::Approx((data.Y.array() - gl.intercept).square().sum()).epsilon(1e-14));
}

TEST_CASE("gamma = 0 reduces to the group lasso") {
    auto data = oracle::random_design(30, 3, 44);
    auto gs = build_group_set(3, 2);
    auto eg = compute_gram(data.X, gs, KernelKind::matern);
    const double rootn = std::sqrt(30.0);
    const double mu = mu_max(data.Y, eg) / (rootn * 8);
    auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
    auto rgs = rgs_fit(data.Y, eg, mu, 0.0, gl, tight(), true);
    CHECK(rgs.crit == doctest::Approx(gl.crit).epsilon(1e-6));
    CHECK(rgs.support == gl.support);
}

TEST_CASE("ridge group sparse matches the smoothed Newton oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        const int n = 10;
        auto data = oracle::random_design(n, 2, 300 + seed);
        auto gs = build_group_set(2, 2);
        auto eg = compute_gram(data.X, gs, KernelKind::matern);
        const double rootn = std::sqrt(double(n));
        const double mu = mu_max(data.Y, eg) / (rootn * 6);
        const double gamma = 0.02 * double(seed);
        auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
        auto m = rgs_fit(data.Y, eg, mu, gamma, gl, tight(), true);
        const auto K = oracle::dense_grams(eg);
        auto ref = oracle::smoothed_newton(data.Y, K, rootn * gamma, n * mu);
        CHECK(m.crit <= ref.crit * (1 + 1e-5));
        CHECK(std::abs(m.crit - ref.crit) <= 1e-5 * ref.crit);
        CHECK(rgs_criterion(data.Y, eg, m, mu, gamma) == doctest::Approx(m.crit).epsilon(1e-12));
    }
}

TEST_CASE("step one stays inside the initial support") {
    auto data = oracle::random_design(40, 4, 77);
    auto gs = build_group_set(4, 2);
    auto eg = compute_gram(data.X, gs, KernelKind::matern);
    const double rootn = std::sqrt(40.0);
    const double mu = mu_max(data.Y, eg) / (rootn * 6);
    auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
    for (double gamma : {0.2, 0.05, 0.005}) {
        auto m = rgs_fit(data.Y, eg, mu, gamma, gl, tight(), false);
        for (int v : m.support) CHECK(std::find(gl.support.begin(), gl.support.end(), v) != gl.support.end());
        CHECK(m.n_support() <= gl.n_support());
    }
}

TEST_CASE("sweep monotonicity and step-two idempotence") {
    auto data = oracle::random_design(35, 3, 8);
    auto gs = build_group_set(3, 3);
    auto eg = compute_gram(data.X, gs, KernelKind::brownian);
    const double rootn = std::sqrt(35.0);
    const double mu = mu_max(data.Y, eg) / (rootn * 10);
    auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
    auto cfg = tight();
    std::vector<double> crits;
    std::string stage;
    cfg.on_sweep = [&](const SweepInfo<double>& s) {
        if (stage != s.stage) crits.clear();
        stage = s.stage;
        if (!crits.empty()) CHECK(s.crit <= crits.back() * (1 + 1e-12));
        crits.push_back(s.crit);
    };
    auto once = rgs_fit(data.Y, eg, mu, 0.05, gl, cfg, true);
    cfg.on_sweep = nullptr;
    auto twice = rgs_fit(data.Y, eg, mu, 0.05, once, cfg, true);
    CHECK(std::abs(twice.crit - once.crit) <= 1e-10 * once.crit);
}

TEST_CASE("zero blocks are locally optimal") {
    auto data = oracle::random_design(25, 3, 91);
    auto gs = build_group_set(3, 2);
    auto eg = compute_gram(data.X, gs, KernelKind::matern);
    const double rootn = std::sqrt(25.0);
    const double mu = mu_max(data.Y, eg) / (rootn * 4);
    const double gamma = 0.1;
    auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
    auto m = rgs_fit(data.Y, eg, mu, gamma, gl, tight(), true);
    const auto K = oracle::dense_grams(eg);
    const double base = rgs_criterion(data.Y, eg, m, mu, gamma);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    int zeros = 0;
    for (std::size_t v = 0; v < gs.size(); ++v) {
        if (!m.theta.row(v).isZero(0)) continue;
        ++zeros;
        for (int k = 0; k < 20; ++k) {
            VecD d(25);
            for (auto& x : d) x = normal(rng);
            d *= 1e-4 / d.norm();
            MetaModel<double> p = m;
            p.theta.row(v) = d.transpose();
            CHECK(rgs_criterion(data.Y, eg, p, mu, gamma) >= base * (1 - 1e-12));
        }
    }
    CHECK(zeros > 0);
}

TEST_CASE("literal zero threshold keeps at least as many groups") {
    auto data = oracle::random_design(30, 3, 13);
    auto gs = build_group_set(3, 2);
    auto eg = compute_gram(data.X, gs, KernelKind::matern);
    const double rootn = std::sqrt(30.0);
    const double mu = mu_max(data.Y, eg) / (rootn * 8);
    auto gl = group_lasso_fit(data.Y, eg, rootn * mu, tight());
    auto cfg = tight();
    auto scaled = rgs_fit(data.Y, eg, mu, 0.2, gl, cfg, false);
    cfg.unscaled_zero_test = true;
    auto literal = rgs_fit(data.Y, eg, mu, 0.2, gl, cfg, false);
    CHECK(literal.n_support() >= scaled.n_support());
}

TEST_CASE("argument validation") {
    auto data = oracle::random_design(10, 2, 1);
    auto eg = compute_gram(data.X, build_group_set(2, 1), KernelKind::matern);
    auto gl = group_lasso_fit(data.Y, eg, mu_max(data.Y, eg) / 2, tight());
    CHECK_THROWS_AS(rgs_fit(data.Y, eg, -1.0, 0.1, gl), rkhsmm::invalid_argument);
    CHECK_THROWS_AS(zero_test_jstar(vec({1.0}), vec({1.0}), -0.1, 1), rkhsmm::invalid_argument);
}
