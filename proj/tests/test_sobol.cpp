#include <doctest.h>

#include "oracle.hpp"
#include "rkhsmm/rkhsmm.hpp"

using namespace rkhsmm;
using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

namespace {

MetaModel<double> synthetic(const GroupSet& gs, Eigen::Index n, const std::vector<int>& support, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MetaModel<double> m;
    m.theta = MatD::Zero(Eigen::Index(gs.size()), n);
    m.fit_v = MatD::Zero(n, Eigen::Index(gs.size()));
    m.support = support;
    for (int v : support)
        for (Eigen::Index i = 0; i < n; ++i) m.fit_v(i, v) = (v + 1) * normal(rng);
    return m;
}

} // namespace

TEST_CASE("null model has zero indices") {
    auto gs = build_group_set(3, 2);
    auto rep = empirical_sobol(synthetic(gs, 10, {}, 1), gs);
    CHECK(rep.indices.isZero(0));
    CHECK(rep.total_by_var.isZero(0));
}

TEST_CASE("single active group gets index one") {
    auto gs = build_group_set(3, 2);
    auto rep = empirical_sobol(synthetic(gs, 10, {4}, 2), gs);
    CHECK(rep.indices(4) == 1.0);
    CHECK(rep.indices.sum() == 1.0);
    // v1.3
    CHECK(rep.total_by_var(0) == 1.0);
    CHECK(rep.total_by_var(1) == 0.0);
    CHECK(rep.total_by_var(2) == 1.0);
}

TEST_CASE("indices use the unbiased variance of each component") {
    auto gs = build_group_set(2, 2);
    auto m = synthetic(gs, 7, {0, 2}, 3);
    auto rep = empirical_sobol(m, gs);
    auto var = [&](int v) {
        const VecD c = m.fit_v.col(v);
        return (c.array() - c.mean()).square().sum() / 6.0;
    };
    CHECK(rep.indices(0) == doctest::Approx(var(0) / (var(0) + var(2))).epsilon(1e-14));
    CHECK(rep.indices(1) == 0.0);
}

TEST_CASE("normalization, totals and scale invariance") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto gs = build_group_set(4, 3);
        std::vector<int> support;
        for (int v = 0; v < int(gs.size()); ++v)
            if ((v + seed) % 3 != 0) support.push_back(v);
        auto m = synthetic(gs, 12, support, seed);
        auto rep = empirical_sobol(m, gs);
        CHECK(std::abs(rep.indices.sum() - 1) <= 1e-12);
        CHECK(rep.indices.minCoeff() >= 0);
        for (std::size_t v = 0; v < gs.size(); ++v)
            if (std::find(support.begin(), support.end(), int(v)) == support.end()) CHECK(rep.indices(v) == 0);
        CHECK(rep.total_by_var.maxCoeff() <= 1 + 1e-12);
        for (int a = 1; a <= 4; ++a) {
            double s = 0;
            for (std::size_t v = 0; v < gs.size(); ++v)
                if (std::find(gs[v].vars.begin(), gs[v].vars.end(), a) != gs[v].vars.end()) s += rep.indices(v);
            CHECK(rep.total_by_var(a - 1) == doctest::Approx(s).epsilon(1e-15));
        }
        auto scaled = m;
        scaled.fit_v *= -3.7;
        auto rs = empirical_sobol(scaled, gs);
        CHECK((rs.indices - rep.indices).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("noise-floor components are dropped") {
    auto gs = build_group_set(2, 1);
    auto m = synthetic(gs, 10, {0, 1}, 4);
    m.fit_v.col(1) *= 1e-9;
    auto rep = empirical_sobol(m, gs);
    CHECK(rep.indices(0) == 1.0);
    CHECK(rep.indices(1) == 0.0);
}

TEST_CASE("fitted model Sobol indices") {
    auto data = oracle::random_design(40, 3, 5);
    auto test = oracle::random_design(40, 3, 55);
    auto eg = compute_gram(data.X, build_group_set(3, 2), KernelKind::matern);
    const auto mus = mu_grid(mu_max(data.Y, eg), 40, std::vector<double>{2, 4, 8});
    auto path = fit_path(data.Y, eg, TuningGrid<double>{mus, {0.1, 0}});
    auto err = prediction_error(path, data.X, test.X, test.Y, eg.groups, KernelKind::matern);
    auto best = best_model_sobol(path, err, eg.groups);
    const auto s = select_best(err);
    auto direct = empirical_sobol(path.at(s.i, s.j).model, eg.groups);
    CHECK(best.indices == direct.indices);
    auto all = path_sobol(path, eg.groups);
    REQUIRE(all.size() == path.entries.size());
    for (const auto& r : all)
        if (r.indices.sum() > 0) CHECK(std::abs(r.indices.sum() - 1) <= 1e-12);
    CHECK_THROWS_AS(best_model_sobol(path, MatD(MatD::Zero(1, 1)), eg.groups), rkhsmm::invalid_argument);
    CHECK_THROWS_AS(empirical_sobol(path.entries[0].model, build_group_set(3, 1)), rkhsmm::invalid_argument);
}
