#include <doctest.h>

#include <numeric>

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

struct Problem {
    DesignData<double> train;
    DesignData<double> test;
    EigenGram<double> grams;
};

Problem make_problem(int n, int d, int dmax, std::uint64_t seed, KernelKind kind = KernelKind::matern) {
    Problem p;
    p.train = oracle::random_design(n, d, seed);
    p.test = oracle::random_design(n, d, seed + 1000);
    p.grams = compute_gram(p.train.X, build_group_set(d, dmax), kind);
    return p;
}

} // namespace

TEST_CASE("mu grid") {
    const auto g = mu_grid(3.0, 25, std::vector<double>{16, 4, 64, 8, 32});
    REQUIRE(g.size() == 5);
    CHECK(g[0] == doctest::Approx(3.0 / (5 * 4)).epsilon(1e-15));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mu_grid(2.5, 1, std::vector<double>{1.0})[0] == 2.5);
    CHECK_THROWS_AS(mu_grid(1.0, 4, std::vector<double>{1.0, 0.0}), rkhsmm::invalid_argument);
    CHECK_THROWS_AS(mu_grid(1.0, 4, std::vector<double>{}), rkhsmm::invalid_argument);
}

TEST_CASE("tuning grid validation") {
    CHECK_NOTHROW(TuningGrid<double>{{2, 1}, {0.1, 0}}.validate());
    CHECK_THROWS_AS((TuningGrid<double>{{1, 2}, {0}}.validate()), rkhsmm::invalid_argument);
    CHECK_THROWS_AS((TuningGrid<double>{{1}, {0, 0.1}}.validate()), rkhsmm::invalid_argument);
    CHECK_THROWS_AS((TuningGrid<double>{{1}, {-0.1}}.validate()), rkhsmm::invalid_argument);
    CHECK_THROWS_AS((TuningGrid<double>{{}, {0}}.validate()), rkhsmm::invalid_argument);
}

TEST_CASE("fit path shape and group-lasso entries") {
    auto p = make_problem(30, 3, 2, 5);
    const double rootn = std::sqrt(30.0);
    const auto mus = mu_grid(mu_max(p.train.Y, p.grams), 30, std::vector<double>{2, 4, 8});
    TuningGrid<double> grid{mus, {0.1, 0.01, 0}};
    auto path = fit_path(p.train.Y, p.grams, grid, tight());
    REQUIRE(path.entries.size() == 9);
    for (std::size_t i = 0; i < mus.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const auto& e = path.at(i, j);
            if (grid.gammas[j] == 0) {
                CHECK(e.mu == doctest::Approx(rootn * mus[i]).epsilon(1e-15));
                CHECK(e.model.mu == e.mu);
                CHECK(e.model.gamma == 0);
                auto direct = group_lasso_fit(p.train.Y, p.grams, rootn * mus[i], tight());
                CHECK(direct.crit == doctest::Approx(e.model.crit).epsilon(1e-12));
                CHECK(direct.support == e.model.support);
            } else {
                CHECK(e.mu == mus[i]);
                CHECK(e.gamma == grid.gammas[j]);
                CHECK(e.model.mu == e.mu);
                CHECK(e.model.gamma == e.gamma);
            }
        }
}

TEST_CASE("path above mu_max gives the null model") {
    auto p = make_problem(20, 2, 2, 6);
    const double mm = mu_max(p.train.Y, p.grams);
    auto path = fit_path(p.train.Y, p.grams, TuningGrid<double>{{mm / std::sqrt(20.0) * 1.001}, {0}}, tight());
    CHECK(path.entries.size() == 1);
    CHECK(path.entries[0].model.support.empty());
}

TEST_CASE("path fitting is deterministic across thread counts") {
    auto p = make_problem(25, 3, 2, 7);
    const auto mus = mu_grid(mu_max(p.train.Y, p.grams), 25, std::vector<double>{3, 6, 12});
    TuningGrid<double> grid{mus, {0.2, 0.05, 0}};
    auto a = fit_path(p.train.Y, p.grams, grid, {}, 1);
    auto b = fit_path(p.train.Y, p.grams, grid, {}, 4);
    for (std::size_t t = 0; t < a.entries.size(); ++t) {
        CHECK(a.entries[t].model.theta == b.entries[t].model.theta);
        CHECK(a.entries[t].model.crit == b.entries[t].model.crit);
        CHECK(a.entries[t].model.intercept == b.entries[t].model.intercept);
    }
}

TEST_CASE("predict") {
    auto p = make_problem(20, 2, 2, 8);
    const auto& gs = p.grams.groups;
    MetaModel<double> null;
    null.intercept = 1.25;
    null.theta = MatD::Zero(Eigen::Index(gs.size()), 20);
    auto cross = cross_gram(p.train.X, p.test.X, gs, KernelKind::matern);
    CHECK((predict(null, cross).array() == 1.25).all());

    // Single active group with theta = e_1.
    MetaModel<double> one = null;
    one.support = {1};
    one.theta(1, 0) = 1;
    const VecD y = predict(one, cross);
    for (Eigen::Index j = 0; j < p.test.n(); ++j)
        CHECK(y(j) == doctest::Approx(1.25 + centered_kernel(KernelKind::matern, p.train.X(0, 1), p.test.X(j, 1))));

    // At the training points the prediction reproduces the fit up to the correction shift.
    auto m = group_lasso_fit(p.train.Y, p.grams, mu_max(p.train.Y, p.grams) / 8, tight());
    auto self = cross_gram(p.train.X, p.train.X, gs, KernelKind::matern);
    double bound = 1e-8;
    for (int v : m.support) bound += p.grams[v].epsilon * m.theta.row(v).cwiseAbs().sum();
    CHECK((predict(m, self) - m.fitted).cwiseAbs().maxCoeff() <= bound);

    std::vector<MatD> wrong(gs.size() - 1);
    CHECK_THROWS_AS(predict(m, wrong), rkhsmm::invalid_argument);
}

TEST_CASE("prediction error of the null model") {
    auto p = make_problem(15, 2, 1, 9);
    const double mm = mu_max(p.train.Y, p.grams);
    auto path = fit_path(p.train.Y, p.grams, TuningGrid<double>{{mm / std::sqrt(15.0) * 2}, {0}});
    auto err = prediction_error(path, p.train.X, p.test.X, p.test.Y, p.grams.groups, KernelKind::matern);
    REQUIRE(err.rows() == 1);
    REQUIRE(err.cols() == 1);
    const double f0 = p.train.Y.mean();
    CHECK(err(0, 0) == doctest::Approx((p.test.Y.array() - f0).square().mean()).epsilon(1e-13));
    CHECK_THROWS_AS(prediction_error(path, p.train.X, p.test.X, VecD(VecD::Zero(3)), p.grams.groups,
                                     KernelKind::matern),
                    rkhsmm::invalid_argument);
}

TEST_CASE("select_best") {
    MatD one(1, 1);
    one << 0.4;
    CHECK(select_best(one).i == 0);
    MatD flat = MatD::Constant(3, 4, 0.7);
    auto s = select_best(flat);
    CHECK(s.i == 0);
    CHECK(s.j == 0);
    MatD e(2, 3);
    e << 0.5, 0.3, 0.3, 0.2, 0.4, 0.2;
    s = select_best(e);
    CHECK(s.i == 1);
    CHECK(s.j == 0);
    e(0, 0) = std::nan("");
    CHECK_THROWS_AS(select_best(e), rkhsmm::invalid_argument);

    // Pure argmin is permutation invariant when the minimum is unique.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatD r(5, 4);
    for (Eigen::Index k = 0; k < r.size(); ++k) r(k) = unif(rng);
    const auto b = select_best(r);
    std::vector<int> rp(5), cp(4);
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(cp.begin(), cp.end(), 0);
    std::shuffle(rp.begin(), rp.end(), rng);
    std::shuffle(cp.begin(), cp.end(), rng);
    MatD q(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) q(i, j) = r(rp[i], cp[j]);
    const auto bq = select_best(q);
    CHECK(std::size_t(rp[bq.i]) == b.i);
    CHECK(std::size_t(cp[bq.j]) == b.j);
}

TEST_CASE("qmax bisection") {
    auto p = make_problem(30, 3, 2, 10);
    const double mm = mu_max(p.train.Y, p.grams);
    auto res = fit_qmax(p.train.Y, p.grams, std::vector<double>{0, 0.1}, 2, 100.0, 30, tight());
    REQUIRE(!res.mus.empty());
    CHECK(res.mus.size() == res.qs.size());
    double hi = mm, lo = mm / 100;
    for (std::size_t k = 0; k < res.mus.size(); ++k) {
        CHECK(res.mus[k] <= hi);
        CHECK(res.mus[k] >= lo);
        if (res.qs[k] > 2)
            lo = res.mus[k];
        else
            hi = res.mus[k];
    }
    REQUIRE(res.path.entries.size() == 2);
    CHECK(res.path.gammas[0] == 0.1);
    if (res.found) {
        CHECK(res.qs.back() == 2);
        CHECK(res.mu_qmax == res.mus.back());
        const auto& gl = res.path.at(0, 1);
        CHECK(gl.model.n_support() == 2);
        CHECK(gl.mu == res.mu_qmax);
    }
    for (const auto& e : res.path.entries) CHECK(e.model.n_support() <= 2);

    // More groups than exist: never found, probes bounded by num + 1.
    auto none = fit_qmax(p.train.Y, p.grams, std::vector<double>{0}, 50, 10.0, 4);
    CHECK_FALSE(none.found);
    CHECK(none.mus.size() == 5);
    CHECK_THROWS_AS(fit_qmax(p.train.Y, p.grams, std::vector<double>{0}, 0, 10.0, 4), rkhsmm::invalid_argument);
    CHECK_THROWS_AS(fit_qmax(p.train.Y, p.grams, std::vector<double>{0}, 1, 1.0, 4), rkhsmm::invalid_argument);
}

TEST_CASE("tune and two-step tuning") {
    auto p = make_problem(40, 3, 2, 11);
    const auto mus = mu_grid(mu_max(p.train.Y, p.grams), 40, std::vector<double>{2, 4, 8, 16});
    TuningGrid<double> grid{mus, {0.1, 0.01, 0}};
    auto t = tune(p.train, p.grams, p.test.X, p.test.Y, grid);
    CHECK(t.errors.rows() == 4);
    CHECK(t.errors.cols() == 3);
    CHECK(t.errors(t.best.i, t.best.j) == t.errors.minCoeff());
    const auto& chosen = t.path.at(t.best.i, t.best.j);
    CHECK(t.model.mu == chosen.mu);
    CHECK(t.model.gamma == chosen.gamma);
    if (chosen.gamma > 0) CHECK(t.model.crit <= chosen.model.crit * (1 + 1e-9));

    auto ts = two_step_tune(p.train, p.grams, p.test.X, p.test.Y, std::vector<double>{2, 4, 8, 16, 32},
                            std::vector<double>{0.01, 0.1, 0});
    CHECK(ts.errors1.rows() == 5);
    CHECK(ts.errors1.cols() == 1);
    CHECK(ts.step2.gammas == std::vector<double>{0.1, 0.01});
    CHECK(ts.step2.mus.size() >= 2);
    CHECK(ts.step2.mus.size() <= 3);
    const std::size_t i1 = select_best(ts.errors1).i;
    CHECK(std::find(ts.step2.mus.begin(), ts.step2.mus.end(), ts.step1.mus[i1]) != ts.step2.mus.end());
    CHECK(ts.model.gamma > 0);
    CHECK_THROWS_AS(two_step_tune(p.train, p.grams, p.test.X, p.test.Y, std::vector<double>{2},
                                  std::vector<double>{0}),
                    rkhsmm::invalid_argument);
}
