#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qgraph/graph.hpp"

namespace qgraph::fixtures {

/// Random connected graph: a random tree on `n` vertices plus `beta` extra
/// edges (parallel edges allowed, no self-loops). At least one vertex keeps
/// degree one so the Dirichlet spectrum starts away from zero.
inline MetricGraph random_graph(std::mt19937_64& gen, std::size_t n, std::size_t beta, double lmin = 0.3,
                                double lmax = 1.3) {
    std::uniform_real_distribution<double> len(lmin, lmax);
    if (beta > 0) n = std::max<std::size_t>(n, 3);
    MetricGraph g;
    for (std::size_t v = 0; v < n; ++v) g.vertices.push_back({"v" + std::to_string(v)});
    auto add = [&](std::size_t a, std::size_t b) {
        g.edges.push_back({"e" + std::to_string(g.edges.size()), a, b, len(gen), ConstantPotential{}});
    };
    for (std::size_t v = 1; v < n; ++v) add(std::uniform_int_distribution<std::size_t>(0, v - 1)(gen), v);
    for (std::size_t i = 0; i < beta; ++i) {
        // keep vertex n-1 a leaf
        std::uniform_int_distribution<std::size_t> pick(0, n - 2);
        std::size_t a = pick(gen);
        std::size_t b = pick(gen);
        while (b == a) b = pick(gen);
        add(a, b);
    }
    if (g.degree(n - 1) != 1) {
        g.vertices.push_back({"v" + std::to_string(n)});
        add(n - 1, n);
    }
    return g;
}

/// Random tree with `n_edges` edges.
inline MetricGraph random_tree(std::mt19937_64& gen, std::size_t n_edges, double lmin = 0.3, double lmax = 1.3) {
    return random_graph(gen, n_edges + 1, 0, lmin, lmax);
}

/// Positive roots of h on (a, b) by a uniform scan and bisection.
inline std::vector<double> scalar_roots(const std::function<double(double)>& h, double a, double b,
                                        std::size_t want, double step = 1e-3) {
    std::vector<double> roots;
    double x0 = a;
    double h0 = h(x0);
    for (double x1 = a + step; x1 <= b && roots.size() < want; x1 += step) {
        const double h1 = h(x1);
        if (h0 == 0.0) {
            roots.push_back(x0);
        } else if ((h0 < 0) != (h1 < 0)) {
            double lo = x0;
            double hi = x1;
            double hlo = h0;
            for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
                const double mid = 0.5 * (lo + hi);
                const double hm = h(mid);
                if ((hm < 0) == (hlo < 0)) {
                    lo = mid;
                    hlo = hm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        x0 = x1;
        h0 = h1;
    }
    return roots;
}

/// Eigenvalues of the star G(s, eps) with Dirichlet ends, from the symmetric
/// family sin(k eps) cos(k) + s sin(k) cos(k eps) = 0 and the family of modes
/// vanishing at the centre, k = n pi / eps with multiplicity s - 1.
inline std::vector<double> star_oracle(int s, double eps, std::size_t count) {
    auto h = [&](double k) { return std::sin(k * eps) * std::cos(k) + s * std::sin(k) * std::cos(k * eps); };
    const double kmax = 4.0 * static_cast<double>(count + 2);
    std::vector<double> lam;
    for (double k : scalar_roots(h, 1e-6, kmax, count)) lam.push_back(k * k);
    for (int n = 1; n * M_PI / eps < kmax; ++n) {
        for (int r = 0; r < s - 1; ++r) lam.push_back(std::pow(n * M_PI / eps, 2));
    }
    std::sort(lam.begin(), lam.end());
    lam.resize(std::min(lam.size(), count));
    return lam;
}

/// Eigenvalues of the ladder I(m, eps) from the two half-graph equations
/// (odd and even under the reflection swapping v1 and v4) and the modes
/// supported on the parallel edges, k = n pi / eps with multiplicity m - 1.
inline std::vector<double> ladder_oracle(int m, double eps, std::size_t count) {
    auto odd = [&](double k) { return std::cos(k / 2) * std::sin(k * eps / 2) + m * std::sin(k / 2) * std::cos(k * eps / 2); };
    auto even = [&](double k) { return std::cos(k / 2) * std::cos(k * eps / 2) - m * std::sin(k / 2) * std::sin(k * eps / 2); };
    const double kmax = 4.0 * static_cast<double>(count + 2);
    std::vector<double> lam;
    for (double k : scalar_roots(odd, 1e-6, kmax, count)) lam.push_back(k * k);
    for (double k : scalar_roots(even, 1e-6, kmax, count)) lam.push_back(k * k);
    for (int n = 1; n * M_PI / eps < kmax; ++n) {
        for (int r = 0; r < m - 1; ++r) lam.push_back(std::pow(n * M_PI / eps, 2));
    }
    std::sort(lam.begin(), lam.end());
    lam.resize(std::min(lam.size(), count));
    return lam;
}

}  // namespace qgraph::fixtures
