#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace rkhsmm {

/// A sign-change interval for an increasing function: f(lo) < 0 < f(hi).
/// lo == hi signals an exact root found while bracketing.
template <typename Scalar>
struct Bracket {
    Scalar lo;
    Scalar hi;
};

/// Grows or shrinks `start` by factors of 10 until the sign of f changes.
/// Returns nullopt when the search leaves [floor, ceiling].
template <typename Scalar, typename F>
std::optional<Bracket<Scalar>> expand_bracket(F&& f, Scalar start, Scalar floor = Scalar(1e-30),
                                              Scalar ceiling = Scalar(1e30)) {
    Scalar x = start;
    Scalar fx = f(x);
    if (fx == 0) return Bracket<Scalar>{x, x};
    if (fx < 0) {
        Scalar lo = x;
        while (fx < 0) {
            lo = x;
            x *= 10;
            if (x > ceiling) return std::nullopt;
            fx = f(x);
        }
        return Bracket<Scalar>{lo, x};
    }
    Scalar hi = x;
    while (fx > 0) {
        hi = x;
        x /= 10;
        if (x < floor) return std::nullopt;
        fx = f(x);
    }
    return Bracket<Scalar>{x, hi};
}

/// Root of an increasing function on a bracket by Newton steps, falling back to
/// bisection whenever a step leaves the current interval. `fdf(x)` returns
/// {f(x), f'(x)}.
template <typename Scalar, typename FdF>
Scalar newton_bisect(FdF&& fdf, Bracket<Scalar> b, Scalar ftol, Scalar xtol_rel = Scalar(1e-15),
                     int max_iter = 300) {
    Scalar lo = b.lo, hi = b.hi;
    if (lo == hi) return lo;
    Scalar x = (lo + hi) / 2;
    for (int it = 0; it < max_iter; ++it) {
        const auto [fx, dfx] = fdf(x);
        if (std::abs(fx) <= ftol) return x;
        if (fx < 0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= xtol_rel * hi) return (lo + hi) / 2;
        Scalar next = x - fx / dfx;
        if (!(next > lo && next < hi)) next = (lo + hi) / 2;
        x = next;
    }
    return x;
}

/// Derivative-free root of f on a sign-change bracket (Illinois variant of
/// regula falsi, with a bisection step whenever progress stalls).
template <typename Scalar, typename F>
Scalar illinois(F&& f, Bracket<Scalar> b, Scalar ftol, Scalar xtol_rel = Scalar(1e-15), int max_iter = 400) {
    Scalar lo = b.lo, hi = b.hi;
    if (lo == hi) return lo;
    Scalar flo = f(lo), fhi = f(hi);
    int side = 0;
    for (int it = 0; it < max_iter; ++it) {
        Scalar x = (lo * fhi - hi * flo) / (fhi - flo);
        const Scalar width = hi - lo;
        if (!(x > lo && x < hi) || it % 8 == 7) x = (lo + hi) / 2;
        const Scalar fx = f(x);
        if (std::abs(fx) <= ftol) return x;
        if (fx < 0) {
            lo = x;
            flo = fx;
            if (side == -1) fhi /= 2;
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if (side == 1) flo /= 2;
            side = 1;
        }
        if (hi - lo <= xtol_rel * std::abs(hi)) break;
        if (hi - lo > width / 2 && it % 8 == 6) side = 0;
    }
    return (lo + hi) / 2;
}

} // namespace rkhsmm
