#pragma once

#include <cmath>
#include <vector>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/groups.hpp"
#include "rkhsmm/meta_model.hpp"
#include "rkhsmm/model_select.hpp"

namespace rkhsmm {

template <typename Scalar>
struct SobolReport {
    Vec<Scalar> indices;       // one per group, zero outside the support
    Vec<Scalar> total_by_var;  // S_T for variables 1..d
    bool support_only = true;
};

/// S_T_a = sum of indices over groups containing a.
template <typename Scalar>
Vec<Scalar> total_indices(const Vec<Scalar>& indices, const GroupSet& groups) {
    Vec<Scalar> tot = Vec<Scalar>::Zero(groups.d);
    for (std::size_t v = 0; v < groups.size(); ++v)
        for (int a : groups[v].vars) tot(a - 1) += indices(Eigen::Index(v));
    return tot;
}

/// Empirical Sobol indices: unbiased sample variances of the fitted group
/// components, normalized to sum to one over the support.
template <typename Scalar>
SobolReport<Scalar> empirical_sobol(const MetaModel<Scalar>& m, const GroupSet& groups) {
    if (std::size_t(m.fit_v.cols()) != groups.size())
        throw invalid_argument("empirical_sobol: model has " + std::to_string(m.fit_v.cols()) + " groups, expected " +
                               std::to_string(groups.size()));
    const Eigen::Index n = m.fit_v.rows();
    if (n < 2) throw invalid_argument("empirical_sobol: needs at least two training points");
    SobolReport<Scalar> rep;
    rep.indices = Vec<Scalar>::Zero(Eigen::Index(groups.size()));
    for (int v : m.support) {
        const auto col = m.fit_v.col(v);
        rep.indices(v) = (col.array() - col.mean()).square().sum() / Scalar(n - 1);
    }
    const Scalar top = rep.indices.size() ? rep.indices.maxCoeff() : Scalar(0);
    if (top > 0) {
        rep.indices = (rep.indices.array() < Scalar(1e-15) * top).select(Scalar(0), rep.indices);
        rep.indices /= rep.indices.sum();
    }
    rep.total_by_var = total_indices(rep.indices, groups);
    return rep;
}

/// Indices of the lowest-error model of a path.
template <typename Scalar>
SobolReport<Scalar> best_model_sobol(const FitPath<Scalar>& path, const Mat<Scalar>& errors, const GroupSet& groups) {
    if (errors.rows() != Eigen::Index(path.mus.size()) || errors.cols() != Eigen::Index(path.gammas.size()))
        throw invalid_argument("best_model_sobol: error matrix does not match the path");
    const auto s = select_best(errors);
    return empirical_sobol(path.at(s.i, s.j).model, groups);
}

/// Indices of every model of a path, in entry order.
template <typename Scalar>
std::vector<SobolReport<Scalar>> path_sobol(const FitPath<Scalar>& path, const GroupSet& groups) {
    std::vector<SobolReport<Scalar>> out;
    out.reserve(path.entries.size());
    for (const auto& e : path.entries) out.push_back(empirical_sobol(e.model, groups));
    return out;
}

} // namespace rkhsmm
