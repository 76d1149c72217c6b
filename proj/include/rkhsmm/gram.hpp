#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rkhsmm/errors.hpp"
#include "rkhsmm/groups.hpp"
#include "rkhsmm/kernel.hpp"
#include "rkhsmm/parallel.hpp"

namespace rkhsmm {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Inputs X (n x d, entries in [0,1]) and response Y (length n).
template <typename Scalar>
struct DesignData {
    Mat<Scalar> X;
    Vec<Scalar> Y;

    Eigen::Index n() const noexcept { return X.rows(); }
    Eigen::Index d() const noexcept { return X.cols(); }
};

template <typename Derived>
void validate_unit_cube(const Eigen::MatrixBase<Derived>& X, const char* what) {
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const auto x = X(i, j);
            if (!(x >= 0 && x <= 1))
                throw invalid_argument(std::string(what) + ": entry (" + std::to_string(i + 1) + "," +
                                       std::to_string(j + 1) + ") is outside [0,1]");
        }
}

template <typename Scalar>
void validate_design(const DesignData<Scalar>& data) {
    if (data.n() < 2) throw invalid_argument("design must have at least two observations");
    if (data.Y.size() != data.n())
        throw invalid_argument("response length " + std::to_string(data.Y.size()) +
                               " does not match design rows " + std::to_string(data.n()));
    validate_unit_cube(data.X, "design");
}

/// Eigendecomposition of one group's Gram matrix. `values` are descending and
/// `vectors` holds the matching orthonormal eigenvectors as columns.
template <typename Scalar>
struct GroupEigen {
    Vec<Scalar> values;
    Mat<Scalar> vectors;
    bool corrected = false;
    Scalar epsilon = 0;  // shift added to every eigenvalue when corrected

    Mat<Scalar> reconstruct() const {
        return vectors * values.asDiagonal() * vectors.transpose();
    }
};

/// Per-group spectral data of the (corrected) Gram matrices K_v.
template <typename Scalar>
struct EigenGram {
    KernelKind kind = KernelKind::matern;
    GroupSet groups;
    std::vector<GroupEigen<Scalar>> eig;
    Eigen::Index n = 0;
    bool correction = true;
    Scalar tol = Scalar(1e-8);

    std::size_t size() const noexcept { return eig.size(); }
    const GroupEigen<Scalar>& operator[](std::size_t v) const { return eig[v]; }
};

/// (K_a)_{ij} = k0(x_i, x_j) for one input column.
template <typename Derived>
Mat<typename Derived::Scalar> univariate_gram(KernelKind kind, const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.size();
    Vec<Scalar> mean(n);
    for (Eigen::Index i = 0; i < n; ++i) mean(i) = kernel_mean(kind, x(i));
    const Scalar total = kernel_double_mean<Scalar>(kind);
    Mat<Scalar> K(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) {
            const Scalar k = base_kernel(kind, x(i), x(j)) - mean(i) * mean(j) / total;
            K(i, j) = k;
            K(j, i) = k;
        }
    return K;
}

/// Rectangular version: entry (j, i) = k0(train_i, test_j).
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> univariate_cross_gram(KernelKind kind,
                                                     const Eigen::MatrixBase<DerivedA>& train,
                                                     const Eigen::MatrixBase<DerivedB>& test) {
    using Scalar = typename DerivedA::Scalar;
    const Scalar total = kernel_double_mean<Scalar>(kind);
    Vec<Scalar> mtrain(train.size()), mtest(test.size());
    for (Eigen::Index i = 0; i < train.size(); ++i) mtrain(i) = kernel_mean(kind, train(i));
    for (Eigen::Index j = 0; j < test.size(); ++j) mtest(j) = kernel_mean(kind, test(j));
    Mat<Scalar> K(test.size(), train.size());
    for (Eigen::Index i = 0; i < train.size(); ++i)
        for (Eigen::Index j = 0; j < test.size(); ++j)
            K(j, i) = base_kernel(kind, train(i), test(j)) - mtrain(i) * mtest(j) / total;
    return K;
}

namespace detail {

template <typename Scalar>
Mat<Scalar> hadamard_group(const std::vector<Mat<Scalar>>& per_var, const Group& g) {
    Mat<Scalar> K = per_var[g.vars.front() - 1];
    for (std::size_t k = 1; k < g.vars.size(); ++k) K.array() *= per_var[g.vars[k] - 1].array();
    return K;
}

template <typename Scalar>
GroupEigen<Scalar> decompose(Mat<Scalar> K, bool correction, Scalar tol, const std::string& name) {
    if (!K.allFinite()) throw numeric_failure("non-finite kernel value in Gram matrix", name);
    K = Scalar(0.5) * (K + K.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(K);
    if (solver.info() != Eigen::Success) throw numeric_failure("eigendecomposition failed", name);
    const Eigen::Index n = K.rows();
    GroupEigen<Scalar> out;
    // Eigen returns ascending order; store descending.
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    const Scalar lmax = out.values(0);
    if (!(lmax > 0)) throw numeric_failure("Gram matrix has no positive eigenvalue", name);
    if (correction && out.values(n - 1) < lmax * tol) {
        out.epsilon = lmax * tol;
        // Negative eigenvalues of a PSD kernel matrix are round-off; clamp before shifting.
        out.values = out.values.cwiseMax(Scalar(0)).array() + out.epsilon;
        out.corrected = true;
    }
    return out;
}

} // namespace detail

/// Builds K_v for every group (Hadamard products of the univariate centered Gram
/// matrices), symmetrizes and eigendecomposes each one. With `correction`, a
/// matrix whose smallest eigenvalue is below lambda_max * tol has all its
/// eigenvalues shifted by lambda_max * tol.
template <typename Derived>
EigenGram<typename Derived::Scalar> compute_gram(const Eigen::MatrixBase<Derived>& X, const GroupSet& groups,
                                                 KernelKind kind, bool correction = true,
                                                 typename Derived::Scalar tol = 1e-8,
                                                 unsigned threads = 1) {
    using Scalar = typename Derived::Scalar;
    if (!(tol > 0)) throw invalid_argument("compute_gram: tol must be positive");
    if (X.cols() != groups.d)
        throw invalid_argument("compute_gram: design has " + std::to_string(X.cols()) +
                               " columns but the group set expects " + std::to_string(groups.d));
    if (X.rows() < 1) throw invalid_argument("compute_gram: empty design");
    validate_unit_cube(X, "design");

    std::vector<Mat<Scalar>> per_var(groups.d);
    parallel_for(per_var.size(), threads,
                 [&](std::size_t a) { per_var[a] = univariate_gram(kind, X.col(Eigen::Index(a))); });

    EigenGram<Scalar> out;
    out.kind = kind;
    out.groups = groups;
    out.n = X.rows();
    out.correction = correction;
    out.tol = tol;
    out.eig.resize(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t v) {
        out.eig[v] = detail::decompose(detail::hadamard_group(per_var, groups[v]), correction, tol,
                                       groups[v].name);
    });
    return out;
}

/// Uncorrected K_v as a dense matrix (testing and diagnostics).
template <typename Derived>
Mat<typename Derived::Scalar> group_gram(const Eigen::MatrixBase<Derived>& X, const Group& g, KernelKind kind) {
    using Scalar = typename Derived::Scalar;
    Mat<Scalar> K = univariate_gram(kind, X.col(g.vars.front() - 1));
    for (std::size_t k = 1; k < g.vars.size(); ++k)
        K.array() *= univariate_gram(kind, X.col(g.vars[k] - 1)).array();
    return K;
}

/// Per-group n_test x n cross Gram matrices k_v(X_train_i, X_test_j). No
/// correction is applied. When `only` is given, groups outside it are n_test x 0.
template <typename DerivedA, typename DerivedB>
std::vector<Mat<typename DerivedA::Scalar>> cross_gram(const Eigen::MatrixBase<DerivedA>& Xtrain,
                                                       const Eigen::MatrixBase<DerivedB>& Xtest,
                                                       const GroupSet& groups, KernelKind kind,
                                                       const std::vector<bool>* only = nullptr) {
    using Scalar = typename DerivedA::Scalar;
    if (Xtest.cols() != Xtrain.cols() || Xtrain.cols() != groups.d)
        throw invalid_argument("cross_gram: column mismatch (train " + std::to_string(Xtrain.cols()) +
                               ", test " + std::to_string(Xtest.cols()) + ", groups " +
                               std::to_string(groups.d) + ")");
    validate_unit_cube(Xtest, "test design");
    std::vector<bool> needed_var(groups.d, false);
    for (std::size_t v = 0; v < groups.size(); ++v)
        if (!only || (*only)[v])
            for (int a : groups[v].vars) needed_var[a - 1] = true;
    std::vector<Mat<Scalar>> per_var(groups.d);
    for (int a = 0; a < groups.d; ++a)
        if (needed_var[a]) per_var[a] = univariate_cross_gram(kind, Xtrain.col(a), Xtest.col(a));
    std::vector<Mat<Scalar>> out(groups.size(), Mat<Scalar>(Xtest.rows(), 0));
    for (std::size_t v = 0; v < groups.size(); ++v)
        if (!only || (*only)[v]) out[v] = detail::hadamard_group(per_var, groups[v]);
    return out;
}

} // namespace rkhsmm
