#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <utility>
#include <vector>

namespace qgraph::detail {

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

struct MinResult {
    double x = 0.0;
    double fx = 0.0;
};

/// Golden-section minimisation of a unimodal function on [a, b].
template <class F>
MinResult golden_min(F&& f, double a, double b, double x_tol, int max_iter = 200) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > x_tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? MinResult{c, fc} : MinResult{d, fd};
}

/// Bisection on the sign of f over [a, b] with f(a), f(b) of opposite sign.
/// Stops once b - a <= x_tol or the midpoint stops moving.
template <class F>
double bisect_sign(F&& f, double a, double b, double fa, double x_tol, int max_iter = 300) {
    const int sa = sign_of(fa);
    for (int it = 0; it < max_iter && (b - a) > x_tol; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double fm = f(m);
        if (fm == 0.0) return m;
        if (sign_of(fm) == sa) {
            a = m;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Composite Simpson rule on uniformly spaced samples (odd count).
inline double simpson(std::span<const double> values, double h) {
    const std::size_t n = values.size();
    if (n < 3) return n == 2 ? 0.5 * h * (values[0] + values[1]) : 0.0;
    double s = values.front() + values.back();
    for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * values[i];
    return s * h / 3.0;
}

/// Splits [0, n) into contiguous chunks over at most `threads` workers.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
}

}  // namespace qgraph::detail
