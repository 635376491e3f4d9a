#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qgraph/errors.hpp"

namespace qgraph {

struct ConstantPotential {
    double value = 0.0;
    friend bool operator==(const ConstantPotential&, const ConstantPotential&) = default;
};

/// Potential given by samples of a C1 function on [0, l_e]. Values between
/// samples come from a cubic Hermite interpolant whose nodal slopes are the
/// three-point finite differences (or the supplied endpoint derivatives).
struct SampledPotential {
    std::vector<double> x;
    std::vector<double> w;
    std::optional<double> dw0;
    std::optional<double> dw1;

    friend bool operator==(const SampledPotential&, const SampledPotential&) = default;

    [[nodiscard]] double slope(std::size_t i) const {
        const std::size_t n = x.size();
        if (i == 0) {
            return dw0 ? *dw0 : (w[1] - w[0]) / (x[1] - x[0]);
        }
        if (i == n - 1) {
            return dw1 ? *dw1 : (w[n - 1] - w[n - 2]) / (x[n - 1] - x[n - 2]);
        }
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        const double d0 = (w[i] - w[i - 1]) / h0;
        const double d1 = (w[i + 1] - w[i]) / h1;
        return (h1 * d0 + h0 * d1) / (h0 + h1);
    }

    [[nodiscard]] double operator()(double xq) const {
        const auto it = std::upper_bound(x.begin(), x.end(), xq);
        std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
        i = std::min(i, x.size() - 2);
        const double h = x[i + 1] - x[i];
        const double t = (xq - x[i]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * w[i] + (t3 - 2 * t2 + t) * h * slope(i) +
               (-2 * t3 + 3 * t2) * w[i + 1] + (t3 - t2) * h * slope(i + 1);
    }

    [[nodiscard]] double min_value() const { return *std::min_element(w.begin(), w.end()); }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : w) m = std::max(m, std::abs(v));
        return m;
    }
};

using Potential = std::variant<ConstantPotential, SampledPotential>;

inline double potential_min(const Potential& p) {
    if (const auto* c = std::get_if<ConstantPotential>(&p)) return c->value;
    return std::get<SampledPotential>(p).min_value();
}

inline double potential_max_abs(const Potential& p) {
    if (const auto* c = std::get_if<ConstantPotential>(&p)) return std::abs(c->value);
    return std::get<SampledPotential>(p).max_abs();
}

inline double potential_at(const Potential& p, double x) {
    if (const auto* c = std::get_if<ConstantPotential>(&p)) return c->value;
    return std::get<SampledPotential>(p)(x);
}

enum class BoundaryCondition { dirichlet, neumann };

struct Vertex {
    std::string id;
    friend bool operator==(const Vertex&, const Vertex&) = default;
};

/// An edge is the interval [0, length]; x = 0 sits at `from`, x = length at `to`.
struct Edge {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double length = 1.0;
    Potential potential = ConstantPotential{};

    [[nodiscard]] bool is_loop() const { return from == to; }
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// One attachment of an edge to a vertex. A loop contributes two ends.
struct EdgeEnd {
    std::size_t edge = 0;
    int side = 0;  // 0 for x = 0, 1 for x = length
    friend bool operator==(const EdgeEnd&, const EdgeEnd&) = default;
};

struct MetricGraph {
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    /// Conditions on degree-one vertices, keyed by vertex index. Missing
    /// entries mean Dirichlet.
    std::map<std::size_t, BoundaryCondition> boundary;

    friend bool operator==(const MetricGraph&, const MetricGraph&) = default;

    [[nodiscard]] std::vector<EdgeEnd> incident_ends(std::size_t v) const {
        std::vector<EdgeEnd> ends;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (edges[e].from == v) ends.push_back({e, 0});
            if (edges[e].to == v) ends.push_back({e, 1});
        }
        return ends;
    }

    [[nodiscard]] std::size_t degree(std::size_t v) const {
        std::size_t d = 0;
        for (const auto& e : edges) {
            d += (e.from == v) + (e.to == v);
        }
        return d;
    }

    [[nodiscard]] bool is_boundary(std::size_t v) const { return degree(v) == 1; }

    [[nodiscard]] BoundaryCondition condition(std::size_t v) const {
        const auto it = boundary.find(v);
        return it == boundary.end() ? BoundaryCondition::dirichlet : it->second;
    }

    [[nodiscard]] std::optional<std::size_t> vertex_index(const std::string& id) const {
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            if (vertices[i].id == id) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::optional<std::size_t> edge_index(const std::string& id) const {
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (edges[i].id == id) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::vector<std::size_t> boundary_vertices() const {
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            if (degree(v) == 1) out.push_back(v);
        }
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> inner_vertices() const {
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            if (degree(v) >= 2) out.push_back(v);
        }
        return out;
    }

    [[nodiscard]] double total_length() const {
        double l = 0.0;
        for (const auto& e : edges) l += e.length;
        return l;
    }

    [[nodiscard]] double min_potential() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& e : edges) m = std::min(m, potential_min(e.potential));
        return edges.empty() ? 0.0 : m;
    }

    [[nodiscard]] double max_abs_potential() const {
        double m = 0.0;
        for (const auto& e : edges) m = std::max(m, potential_max_abs(e.potential));
        return m;
    }

    [[nodiscard]] bool has_neumann() const {
        for (const auto& [v, c] : boundary) {
            if (c == BoundaryCondition::neumann && degree(v) == 1) return true;
        }
        return false;
    }
};

struct ValidationReport {
    bool valid = true;
    bool connected = true;
    bool neumann_present = false;
    std::size_t n_vertices = 0;
    std::size_t n_edges = 0;
    std::size_t n_boundary = 0;
    std::size_t n_inner = 0;
    std::vector<std::string> issues;
};

namespace detail {

inline bool is_connected(const MetricGraph& g) {
    if (g.vertices.empty()) return false;
    std::vector<std::size_t> parent(g.vertices.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& e : g.edges) {
        if (e.from < parent.size() && e.to < parent.size()) parent[find(e.from)] = find(e.to);
    }
    const std::size_t root = find(0);
    for (std::size_t v = 1; v < g.vertices.size(); ++v) {
        if (find(v) != root) return false;
    }
    return true;
}

}  // namespace detail

inline ValidationReport validate(const MetricGraph& g) {
    ValidationReport r;
    r.n_vertices = g.vertices.size();
    r.n_edges = g.edges.size();
    auto fail = [&](std::string msg) {
        r.valid = false;
        r.issues.push_back(std::move(msg));
    };
    if (g.vertices.empty()) fail("graph has no vertices");
    if (g.edges.empty()) fail("graph has no edges");

    std::map<std::string, int> seen;
    for (const auto& v : g.vertices) {
        if (++seen[v.id] == 2) fail("duplicate vertex id '" + v.id + "'");
    }
    seen.clear();
    bool endpoints_ok = true;
    for (const auto& e : g.edges) {
        if (++seen[e.id] == 2) fail("duplicate edge id '" + e.id + "'");
        if (e.from >= g.vertices.size() || e.to >= g.vertices.size()) {
            fail("edge '" + e.id + "' references an unknown vertex");
            endpoints_ok = false;
            continue;
        }
        if (!(e.length > 0.0) || !std::isfinite(e.length)) {
            fail("edge '" + e.id + "' has non-positive length");
        }
        if (const auto* s = std::get_if<SampledPotential>(&e.potential)) {
            if (s->x.size() < 2 || s->x.size() != s->w.size()) {
                fail("edge '" + e.id + "' potential needs at least 2 samples");
            } else {
                bool increasing = true;
                for (std::size_t i = 1; i < s->x.size(); ++i) increasing &= s->x[i] > s->x[i - 1];
                if (!increasing) fail("edge '" + e.id + "' potential grid is not strictly increasing");
                const double tol = 1e-12 * std::max(1.0, e.length);
                if (std::abs(s->x.front()) > tol || std::abs(s->x.back() - e.length) > tol) {
                    fail("edge '" + e.id + "' potential grid does not cover [0, length]");
                }
            }
        }
    }
    if (endpoints_ok && !g.vertices.empty()) {
        r.connected = detail::is_connected(g);
        if (!r.connected) fail("graph is not connected");
        for (std::size_t v = 0; v < g.vertices.size(); ++v) {
            const std::size_t d = g.degree(v);
            if (d == 0) continue;
            (d == 1 ? r.n_boundary : r.n_inner) += 1;
        }
        for (const auto& [v, c] : g.boundary) {
            if (v >= g.vertices.size()) {
                fail("boundary condition on unknown vertex");
            } else if (g.degree(v) != 1) {
                fail("boundary condition on vertex '" + g.vertices[v].id + "' of degree " +
                     std::to_string(g.degree(v)));
            } else if (c == BoundaryCondition::neumann) {
                r.neumann_present = true;
            }
        }
    }
    return r;
}

struct GraphTopology {
    long beta = 0;
    std::size_t n_boundary = 0;
    std::size_t n_inner = 0;
    long degree_sum_excess = 0;  // sum over inner vertices of deg(v) - 2

    /// The right-hand side |V_b| + 2 beta - 2 of the degree identity.
    [[nodiscard]] long excess_identity() const {
        return static_cast<long>(n_boundary) + 2 * beta - 2;
    }
};

inline GraphTopology topology(const MetricGraph& g) {
    const auto report = validate(g);
    if (!report.valid) throw InvalidGraph("topology of invalid graph: " + report.issues.front());
    GraphTopology t;
    t.beta = static_cast<long>(g.edges.size()) - static_cast<long>(g.vertices.size()) + 1;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto d = static_cast<long>(g.degree(v));
        if (d == 1) {
            ++t.n_boundary;
        } else {
            ++t.n_inner;
            t.degree_sum_excess += d - 2;
        }
    }
    return t;
}

inline MetricGraph build_interval(double length = 1.0) {
    if (!(length > 0.0)) throw InvalidArgument("interval length must be positive");
    MetricGraph g;
    g.vertices = {{"v0"}, {"v1"}};
    g.edges = {{"e0", 0, 1, length, ConstantPotential{}}};
    return g;
}

/// G(s, eps): one edge of length 1 and s edges of length eps sharing a
/// centre vertex. Small edges run from the centre to their free ends.
inline MetricGraph build_star(int s, double eps) {
    if (s < 1) throw InvalidArgument("star needs s >= 1");
    if (!(eps > 0.0)) throw InvalidArgument("star needs eps > 0");
    MetricGraph g;
    g.vertices.push_back({"c"});
    g.vertices.push_back({"b0"});
    g.edges.push_back({"long", 1, 0, 1.0, ConstantPotential{}});
    for (int i = 1; i <= s; ++i) {
        g.vertices.push_back({"b" + std::to_string(i)});
        g.edges.push_back({"s" + std::to_string(i), 0, static_cast<std::size_t>(i) + 1, eps,
                           ConstantPotential{}});
    }
    return g;
}

/// I(m, eps): boundary vertices v1, v4, inner vertices v2, v3 joined by m
/// parallel edges of length eps; e1 = (v1, v2), e2 = (v3, v4) of length 1/2.
inline MetricGraph build_ladder(int m, double eps) {
    if (m < 2) throw InvalidArgument("ladder needs m >= 2");
    if (!(eps > 0.0)) throw InvalidArgument("ladder needs eps > 0");
    MetricGraph g;
    g.vertices = {{"v1"}, {"v2"}, {"v3"}, {"v4"}};
    g.edges.push_back({"e1", 0, 1, 0.5, ConstantPotential{}});
    g.edges.push_back({"e2", 2, 3, 0.5, ConstantPotential{}});
    for (int j = 1; j <= m; ++j) {
        g.edges.push_back({"p" + std::to_string(j), 1, 2, eps, ConstantPotential{}});
    }
    return g;
}

enum class PerturbScope {
    short_edges,  // every edge shorter than the longest one (all edges if equilateral)
    all_edges,
};

namespace detail {

/// Uniform double in the open interval (0, 1) from 53 random bits.
inline double open_unit(std::mt19937_64& gen) {
    return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Replaces each designated edge length l by a draw from (l, l + delta).
/// Draws come from a seeded mt19937_64, so the output is a pure function
/// of (graph, delta, seed, scope).
inline MetricGraph perturb_lengths(const MetricGraph& g, double delta, std::uint64_t seed,
                                   PerturbScope scope = PerturbScope::short_edges) {
    if (delta < 0.0) throw InvalidArgument("perturbation delta must be non-negative");
    MetricGraph out = g;
    if (delta == 0.0) return out;
    double longest = 0.0;
    for (const auto& e : g.edges) longest = std::max(longest, e.length);
    bool any_short = false;
    for (const auto& e : g.edges) any_short |= e.length < longest;
    std::mt19937_64 gen(seed);
    for (auto& e : out.edges) {
        const bool designated =
            scope == PerturbScope::all_edges || !any_short || e.length < longest;
        if (!designated) continue;
        // Scale of the sampled potential grid follows the edge.
        const double old_length = e.length;
        e.length = old_length + delta * detail::open_unit(gen);
        if (auto* s = std::get_if<SampledPotential>(&e.potential)) {
            for (double& x : s->x) x *= e.length / old_length;
        }
    }
    return out;
}

}  // namespace qgraph
