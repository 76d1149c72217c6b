#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "rkhsmm/errors.hpp"

namespace rkhsmm {

enum class KernelKind { linear, quadratic, brownian, matern, gaussian };

inline constexpr KernelKind all_kernel_kinds[] = {KernelKind::linear, KernelKind::quadratic,
                                                  KernelKind::brownian, KernelKind::matern,
                                                  KernelKind::gaussian};

inline std::string_view kernel_name(KernelKind kind) {
    switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::quadratic: return "quad";
    case KernelKind::brownian: return "brownian";
    case KernelKind::matern: return "matern";
    case KernelKind::gaussian: return "gaussian";
    }
    return "unknown";
}

inline KernelKind parse_kernel(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "quad" || name == "quadratic") return KernelKind::quadratic;
    if (name == "brownian") return KernelKind::brownian;
    if (name == "matern") return KernelKind::matern;
    if (name == "gaussian") return KernelKind::gaussian;
    throw invalid_argument("unknown kernel '" + std::string(name) +
                           "' (expected linear, quad, brownian, matern or gaussian)");
}

/// Univariate reproducing kernel k(u, v) on [0,1].
template <typename Scalar>
Scalar base_kernel(KernelKind kind, Scalar u, Scalar v) {
    using std::abs;
    using std::exp;
    switch (kind) {
    case KernelKind::linear: return u * v + Scalar(1);
    case KernelKind::quadratic: {
        const Scalar t = u * v + Scalar(1);
        return t * t;
    }
    case KernelKind::brownian: return std::min(u, v) + Scalar(1);
    case KernelKind::matern: {
        const Scalar r = Scalar(2) * abs(u - v);
        return (Scalar(1) + r) * exp(-r);
    }
    case KernelKind::gaussian: {
        const Scalar r = u - v;
        return exp(Scalar(-2) * r * r);
    }
    }
    return Scalar(0);
}

/// E_U k(x, U) for U uniform on [0,1]. Closed forms for every kind.
template <typename Scalar>
Scalar kernel_mean(KernelKind kind, Scalar x) {
    using std::erf;
    using std::exp;
    using std::sqrt;
    switch (kind) {
    case KernelKind::linear: return Scalar(1) + x / Scalar(2);
    case KernelKind::quadratic: return Scalar(1) + x + x * x / Scalar(3);
    case KernelKind::brownian: return Scalar(1) + x - x * x / Scalar(2);
    case KernelKind::matern:
        // int_0^s (1+2t) e^{-2t} dt = 1 - (1+s) e^{-2s}, split at u = x
        return Scalar(2) - (Scalar(1) + x) * exp(Scalar(-2) * x) -
               (Scalar(2) - x) * exp(Scalar(-2) * (Scalar(1) - x));
    case KernelKind::gaussian: {
        const Scalar r2 = sqrt(Scalar(2));
        return sqrt(std::numbers::pi_v<Scalar> / Scalar(8)) *
               (erf(r2 * (Scalar(1) - x)) + erf(r2 * x));
    }
    }
    return Scalar(0);
}

/// E_{U,V} k(U, V) for U, V independent uniform on [0,1].
template <typename Scalar>
Scalar kernel_double_mean(KernelKind kind) {
    using std::erf;
    using std::exp;
    using std::sqrt;
    switch (kind) {
    case KernelKind::linear: return Scalar(5) / Scalar(4);
    case KernelKind::quadratic: return Scalar(29) / Scalar(18);
    case KernelKind::brownian: return Scalar(4) / Scalar(3);
    case KernelKind::matern: return Scalar(1) / Scalar(2) + Scalar(5) / Scalar(2) * exp(Scalar(-2));
    case KernelKind::gaussian:
        return sqrt(std::numbers::pi_v<Scalar> / Scalar(2)) * erf(sqrt(Scalar(2))) -
               (Scalar(1) - exp(Scalar(-2))) / Scalar(2);
    }
    return Scalar(1);
}

/// Kernel of the zero-mean subspace under the uniform law:
/// k0(x, y) = k(x, y) - E k(x, U) E k(y, U) / E k(U, V).
template <typename Scalar>
Scalar centered_kernel(KernelKind kind, Scalar x, Scalar y) {
    return base_kernel(kind, x, y) -
           kernel_mean(kind, x) * kernel_mean(kind, y) / kernel_double_mean<Scalar>(kind);
}

} // namespace rkhsmm
