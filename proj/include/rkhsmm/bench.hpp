#pragma once

#include <cstdint>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/gfunction.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/model_select.hpp"
#include "rkhsmm/parallel.hpp"
#include "rkhsmm/sobol.hpp"

namespace rkhsmm {

template <typename Scalar>
struct BenchConfig {
    GFunctionSpec<Scalar> spec;
    Eigen::Index n = 100;       // training size; the selection set has the same size unless n_test > 0
    Eigen::Index n_test = 0;
    Eigen::Index n_eval = 1000; // noiseless evaluation design
    int dmax = 3;
    KernelKind kind = KernelKind::matern;
    int reps = 10;
    std::vector<Scalar> frc{4, 8, 16, 32, 64};
    std::vector<Scalar> gammas{Scalar(0.2), Scalar(0.1), Scalar(0.01), Scalar(0.005), Scalar(0)};
    bool two_step = false;
    FitConfig<Scalar> fit;
    unsigned threads = 1;
    // Upper bound on Gram storage held at once when repetitions run concurrently.
    std::size_t memory_budget = std::size_t(1) << 30;
};

template <typename Scalar>
struct BenchRep {
    Scalar mu = 0;
    Scalar gamma = 0;
    Scalar prediction_mse = 0;
    std::size_t n_support = 0;
    Vec<Scalar> sobol;
};

template <typename Scalar>
struct BenchResult {
    GroupSet groups;
    Vec<Scalar> truth;
    Vec<Scalar> mean_sobol;
    std::vector<BenchRep<Scalar>> reps;
    BenchMetrics<Scalar> metrics;
};

/// One repetition: training, selection and evaluation designs from stream `r`,
/// grid tuning (or two-step tuning), then error and Sobol indices of the selected model.
template <typename Scalar>
BenchRep<Scalar> run_bench_rep(const BenchConfig<Scalar>& cfg, const GroupSet& groups, int r, unsigned threads) {
    auto rng = stream_rng(cfg.spec.seed, std::uint64_t(r));
    const auto train = generate_dataset(cfg.spec, cfg.n, rng);
    const auto test = generate_dataset(cfg.spec, cfg.n_test > 0 ? cfg.n_test : cfg.n, rng);
    const Mat<Scalar> Xeval = lhs_sample<Scalar>(cfg.n_eval, cfg.spec.d, rng);
    const Vec<Scalar> Yeval = g_function_rows(Xeval, cfg.spec.c);

    const auto grams = compute_gram(train.X, groups, cfg.kind, true, Scalar(1e-8), threads);
    BenchRep<Scalar> rep;
    MetaModel<Scalar> model;
    if (cfg.two_step) {
        auto res = two_step_tune(train, grams, test.X, test.Y, cfg.frc, cfg.gammas, cfg.fit, threads);
        const auto& e = res.step2.at(res.best.i, res.best.j);
        rep.mu = e.mu;
        rep.gamma = e.gamma;
        model = std::move(res.model);
    } else {
        const auto mus = mu_grid(mu_max(train.Y, grams), grams.n, cfg.frc);
        auto gammas = cfg.gammas;
        std::sort(gammas.begin(), gammas.end(), std::greater<>());
        auto res = tune(train, grams, test.X, test.Y, TuningGrid<Scalar>{mus, gammas}, cfg.fit, threads);
        const auto& e = res.path.at(res.best.i, res.best.j);
        rep.mu = e.mu;
        rep.gamma = e.gamma;
        model = std::move(res.model);
    }
    std::vector<bool> used(groups.size(), false);
    for (int v : model.support) used[v] = true;
    const auto cross = cross_gram(train.X, Xeval, groups, cfg.kind, &used);
    rep.prediction_mse = (predict(model, cross) - Yeval).squaredNorm() / Scalar(cfg.n_eval);
    rep.n_support = model.n_support();
    rep.sobol = empirical_sobol(model, groups).indices;
    return rep;
}

/// g-function benchmark over `reps` independent repetitions.
template <typename Scalar>
BenchResult<Scalar> run_benchmark(const BenchConfig<Scalar>& cfg) {
    cfg.spec.validate();
    if (cfg.reps < 1) throw invalid_argument("bench: reps must be >= 1");
    if (cfg.n < 2 || cfg.n_eval < 1) throw invalid_argument("bench: n must be >= 2 and n_eval >= 1");
    BenchResult<Scalar> out;
    out.groups = build_group_set(cfg.spec.d, cfg.dmax);
    out.truth = analytic_sobol(cfg.spec.c, out.groups);
    out.reps.resize(std::size_t(cfg.reps));

    // Repetitions run side by side only while their Gram storage fits the budget.
    const std::size_t per_rep = out.groups.size() * std::size_t(cfg.n) * std::size_t(cfg.n) * 2 * sizeof(Scalar);
    const unsigned threads = std::max(1u, cfg.threads);
    const unsigned side_by_side = static_cast<unsigned>(std::clamp<std::size_t>(
        cfg.memory_budget / std::max<std::size_t>(per_rep, 1), 1, std::min<std::size_t>(threads, cfg.reps)));
    const unsigned inner = std::max(1u, threads / side_by_side);
    parallel_for(out.reps.size(), side_by_side, [&](std::size_t r) {
        out.reps[r] = run_bench_rep(cfg, out.groups, int(r), inner);
    });

    std::vector<Scalar> mse;
    std::vector<Vec<Scalar>> est;
    for (const auto& r : out.reps) {
        mse.push_back(r.prediction_mse);
        est.push_back(r.sobol);
    }
    out.metrics = evaluate_metrics(mse, est, out.truth);
    out.mean_sobol = Vec<Scalar>::Zero(out.truth.size());
    for (const auto& e : est) out.mean_sobol += e;
    out.mean_sobol /= Scalar(est.size());
    return out;
}

} // namespace rkhsmm
