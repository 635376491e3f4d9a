#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qgraph/detail/numerics.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/spectral.hpp"
#include "qgraph/tolerances.hpp"

namespace qgraph {

struct Term {
    std::size_t index = 0;  // 1-based eigenfunction index
    double coeff = 0.0;
    friend bool operator==(const Term&, const Term&) = default;
};

/// Parses "k1:a1,k2:a2,..." into terms (indices 1-based).
inline std::vector<Term> parse_combo(const std::string& text) {
    std::vector<Term> terms;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidArgument("combo item '" + item + "' is not index:coefficient");
        try {
            std::size_t used = 0;
            const long k = std::stol(item.substr(0, colon), &used);
            if (used != colon || k < 1) throw InvalidArgument("bad combo index in '" + item + "'");
            const std::string rest = item.substr(colon + 1);
            const double a = std::stod(rest, &used);
            if (used != rest.size()) throw InvalidArgument("bad combo coefficient in '" + item + "'");
            terms.push_back({static_cast<std::size_t>(k), a});
        } catch (const std::logic_error&) {
            throw InvalidArgument("cannot parse combo item '" + item + "'");
        }
    }
    if (terms.empty()) throw InvalidArgument("empty combo");
    return terms;
}

/// F = sum_i a_i f_{k_i} over a computed spectrum. Indices strictly
/// increase and every coefficient is non-zero.
class FunctionOnGraph {
public:
    FunctionOnGraph(std::shared_ptr<const Spectrum> spectrum, std::vector<Term> terms)
        : spectrum_(std::move(spectrum)), terms_(std::move(terms)) {
        if (!spectrum_) throw InvalidArgument("function needs a spectrum");
        if (terms_.empty()) throw InvalidArgument("function needs at least one term");
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (terms_[i].coeff == 0.0 || !std::isfinite(terms_[i].coeff)) {
                throw InvalidArgument("combination coefficients must be non-zero and finite");
            }
            if (i > 0 && terms_[i].index <= terms_[i - 1].index) {
                throw InvalidArgument("combination indices must be strictly increasing");
            }
            static_cast<void>(spectrum_->at(terms_[i].index));  // range check
        }
    }

    [[nodiscard]] const Spectrum& spectrum() const { return *spectrum_; }
    [[nodiscard]] const std::shared_ptr<const Spectrum>& spectrum_ptr() const { return spectrum_; }
    [[nodiscard]] const MetricGraph& graph() const { return *spectrum_->graph; }
    [[nodiscard]] std::span<const Term> terms() const { return terms_; }
    [[nodiscard]] const Eigenpair& pair(std::size_t i) const { return spectrum_->at(terms_[i].index); }
    [[nodiscard]] double lambda_max() const { return pair(terms_.size() - 1).lambda; }
    [[nodiscard]] double lambda_min() const { return pair(0).lambda; }

    [[nodiscard]] FunctionOnGraph with_coefficients(std::span<const double> coeffs) const {
        auto t = terms_;
        for (std::size_t i = 0; i < t.size(); ++i) t[i].coeff = coeffs[i];
        return {spectrum_, std::move(t)};
    }

    [[nodiscard]] double evaluate(std::size_t e, double x) const {
        check(e, x);
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) s += terms_[i].coeff * pair(i).value(e, x);
        return s;
    }

    [[nodiscard]] double derivative(std::size_t e, double x) const {
        check(e, x);
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) s += terms_[i].coeff * pair(i).derivative(e, x);
        return s;
    }

    [[nodiscard]] double second_derivative(std::size_t e, double x) const {
        check(e, x);
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) s += terms_[i].coeff * pair(i).second_derivative(e, x);
        return s;
    }

    /// sum_i |a_i f_i(x)|: the scale against which cancellation in F(x) is judged.
    [[nodiscard]] double magnitude(std::size_t e, double x) const {
        check(e, x);
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) s += std::abs(terms_[i].coeff * pair(i).value(e, x));
        return s;
    }

    [[nodiscard]] double vertex_magnitude(std::size_t v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            s += std::abs(terms_[i].coeff * qgraph::vertex_value(graph(), pair(i), v));
        }
        return s;
    }

    /// Value at a vertex (well defined by continuity at inner vertices).
    [[nodiscard]] double vertex_value(std::size_t v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) s += terms_[i].coeff * qgraph::vertex_value(graph(), pair(i), v);
        return s;
    }

private:
    void check(std::size_t e, double x) const {
        const auto& g = graph();
        if (e >= g.edges.size()) throw InvalidArgument("edge index out of range");
        const double l = g.edges[e].length;
        if (!(x >= -1e-14 * l && x <= l * (1 + 1e-14))) {
            throw InvalidArgument("x = " + std::to_string(x) + " outside [0, " + std::to_string(l) + "]");
        }
    }

    std::shared_ptr<const Spectrum> spectrum_;
    std::vector<Term> terms_;
};

enum class ZeroKind { transversal, tangential };

struct ZeroLocus {
    std::optional<std::size_t> edge;    // set for edge-interior zeros
    double x = 0.0;
    std::optional<std::size_t> vertex;  // set for inner-vertex zeros
    ZeroKind kind = ZeroKind::transversal;
    double residual = 0.0;              // |F| at the refined point

    [[nodiscard]] bool at_vertex() const { return vertex.has_value(); }
};

struct NodalReport {
    std::vector<ZeroLocus> loci;
    std::size_t total = 0;
    std::vector<std::size_t> per_edge;
    bool tangential_present = false;
    bool vertex_zero_present = false;
    bool approximate = false;
    double sup_norm = 0.0;
    std::vector<std::string> diagnostics;
};

namespace detail {

/// Samples per edge: 32 per half-wavelength at the top eigenvalue, >= 64.
inline std::size_t nodal_intervals(double length, double lambda_max, double min_w, double density_factor) {
    const double k = std::sqrt(std::max(lambda_max - min_w, 0.0));
    auto n = static_cast<std::size_t>(std::ceil(32.0 * density_factor * length * k / std::numbers::pi));
    return std::max<std::size_t>(n, static_cast<std::size_t>(64 * density_factor));
}

struct EdgeSamples {
    std::vector<double> x;
    std::vector<double> f;
    std::vector<double> floor;  // rounding floor of F at each sample
};

}  // namespace detail

struct NodalOptions {
    Tolerances tol;
    double density_factor = 1.0;  // multiplies the sampling density
};

/// Locates and classifies the zeros of F away from boundary vertices.
///
/// Each edge is sampled densely; sign changes are bisected, sampled minima
/// of |F| are refined by golden section (turning up either a hidden pair of
/// crossings or a tangential zero), and zeros at or within x_tol of an inner
/// vertex collapse into a single vertex locus.
inline NodalReport count_zeros(const FunctionOnGraph& F, const NodalOptions& opt = {}) {
    const auto& g = F.graph();
    const auto& tol = opt.tol;
    const std::size_t ne = g.edges.size();
    std::vector<detail::EdgeSamples> samples(ne);
    double sup = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
        const double l = g.edges[e].length;
        const auto n = detail::nodal_intervals(l, F.lambda_max(), potential_min(g.edges[e].potential),
                                               opt.density_factor);
        auto& s = samples[e];
        s.x.resize(n + 1);
        s.f.resize(n + 1);
        s.floor.resize(n + 1);
        for (std::size_t j = 0; j <= n; ++j) {
            s.x[j] = l * static_cast<double>(j) / static_cast<double>(n);
            s.f[j] = F.evaluate(e, s.x[j]);
            s.floor[j] = tol.tangential_rel * F.magnitude(e, s.x[j]);
            sup = std::max(sup, std::abs(s.f[j]));
        }
    }
    NodalReport rep;
    rep.sup_norm = sup;
    rep.per_edge.assign(ne, 0);
    if (!(sup > 0.0)) throw NodalError("function vanishes identically on the graph");
    // Values below tangential_rel * sum|a_i f_i(x)| (plus a few ulps of the
    // sup norm) are indistinguishable from zero.
    const double abs_floor = 64.0 * std::numeric_limits<double>::epsilon() * sup;
    for (auto& s : samples) {
        for (double& fl : s.floor) fl += abs_floor;
    }

    std::vector<std::vector<ZeroLocus>> edge_loci(ne);
    std::vector<bool> vertex_hit(g.vertices.size(), false);
    std::vector<double> vertex_res(g.vertices.size(), 0.0);

    for (std::size_t e = 0; e < ne; ++e) {
        const auto& s = samples[e];
        const double l = g.edges[e].length;
        const double xtol = tol.x_rel * l;
        const std::size_t n = s.x.size() - 1;
        double edge_max = 0.0;
        for (double v : s.f) edge_max = std::max(edge_max, std::abs(v));
        if (edge_max <= tol.degenerate_edge_rel * sup) {
            throw NodalError("function vanishes identically on edge '" + g.edges[e].id + "'");
        }
        auto f = [&](double x) { return F.evaluate(e, std::clamp(x, 0.0, l)); };
        auto floor_at = [&](double x) { return tol.tangential_rel * F.magnitude(e, std::clamp(x, 0.0, l)) + abs_floor; };
        std::vector<int> sg(n + 1);
        for (std::size_t j = 0; j <= n; ++j) sg[j] = std::abs(s.f[j]) <= s.floor[j] ? 0 : detail::sign_of(s.f[j]);
        // At a vanishing boundary end the sign just inside comes from the
        // derivative; otherwise a zero in the first cell would go unseen.
        if (sg[0] == 0 && g.degree(g.edges[e].from) == 1) sg[0] = detail::sign_of(F.derivative(e, 0.0));
        if (sg[n] == 0 && g.degree(g.edges[e].to) == 1) sg[n] = -detail::sign_of(F.derivative(e, l));
        auto sgn_at = [&](std::size_t j) { return sg[j]; };
        auto& out = edge_loci[e];
        auto transversal = [&](double a, double b, double fa) {
            const double x = detail::bisect_sign(f, a, b, fa, xtol);
            out.push_back({e, x, std::nullopt, ZeroKind::transversal, std::abs(f(x))});
        };
        auto tangential = [&](double a, double b, int sign) {
            const auto m = detail::golden_min([&](double x) { return sign * f(x); }, a, b, xtol);
            out.push_back({e, m.x, std::nullopt, ZeroKind::tangential, std::abs(m.fx)});
        };

        std::optional<std::size_t> last;
        for (std::size_t j = 0; j <= n; ++j) {
            const int sj = sgn_at(j);
            if (sj == 0) continue;
            if (last) {
                const int sl = sgn_at(*last);
                if (sj != sl) {
                    transversal(s.x[*last], s.x[j], static_cast<double>(sl));
                } else if (j > *last + 1) {
                    tangential(s.x[*last], s.x[j], sl);
                }
            }
            last = j;
        }

        // Sampled minima of |F| without a sign change.
        for (std::size_t j = 1; j < n; ++j) {
            const int sj = sgn_at(j);
            if (sj == 0 || sgn_at(j - 1) != sj || sgn_at(j + 1) != sj) continue;
            const double a = std::abs(s.f[j]);
            if (!(a <= std::abs(s.f[j - 1]) && a <= std::abs(s.f[j + 1]))) continue;
            if (a == std::abs(s.f[j - 1]) && a == std::abs(s.f[j + 1])) continue;
            std::optional<double> flip;
            auto signed_f = [&](double x) {
                const double v = f(x);
                if (!flip && sj * v < 0.0 && std::abs(v) > floor_at(x)) flip = x;
                return sj * v;
            };
            const auto m = detail::golden_min(signed_f, s.x[j - 1], s.x[j + 1], xtol);
            if (flip) {
                transversal(s.x[j - 1], *flip, static_cast<double>(sj));
                transversal(*flip, s.x[j + 1], f(*flip));
            } else if (std::abs(m.fx) <= floor_at(m.x)) {
                out.push_back({e, m.x, std::nullopt, ZeroKind::tangential, std::abs(m.fx)});
            }
        }

        std::sort(out.begin(), out.end(), [](const ZeroLocus& a, const ZeroLocus& b) { return a.x < b.x; });
        // Neighbouring crossings separated by a bump below the noise floor
        // are one tangential zero.
        std::vector<ZeroLocus> merged;
        for (const auto& z : out) {
            if (!merged.empty()) {
                auto& prev = merged.back();
                double bump = 0.0;
                bool below = true;
                for (int i = 1; i < 8; ++i) {
                    const double xb = prev.x + (z.x - prev.x) * i / 8.0;
                    const double fb = std::abs(f(xb));
                    bump = std::max(bump, fb);
                    below &= fb <= floor_at(xb);
                }
                if (below) {
                    prev.x = 0.5 * (prev.x + z.x);
                    prev.kind = ZeroKind::tangential;
                    prev.residual = std::max({prev.residual, z.residual, bump});
                    continue;
                }
                if (z.x - prev.x <= 4.0 * xtol) {
                    rep.approximate = true;
                    rep.diagnostics.push_back("unresolved zero cluster on edge '" + g.edges[e].id + "' near x = " +
                                              std::to_string(z.x));
                }
            }
            merged.push_back(z);
        }

        // Zeros at the ends belong to the vertex (or are dropped at the boundary).
        const double cell = s.x[1];
        std::vector<ZeroLocus> kept;
        for (const auto& z : merged) {
            const std::array<std::pair<std::size_t, double>, 2> ends{
                std::pair{g.edges[e].from, z.x}, std::pair{g.edges[e].to, l - z.x}};
            bool absorbed = false;
            for (const auto& [v, dist] : ends) {
                const bool inner = g.degree(v) >= 2;
                const bool vertex_small =
                    std::abs(F.vertex_value(v)) <= tol.vertex_zero_rel * F.vertex_magnitude(v) + abs_floor;
                if (dist <= xtol || (inner && vertex_small && dist < cell)) {
                    if (inner) {
                        vertex_hit[v] = true;
                        vertex_res[v] = std::max(vertex_res[v], z.residual);
                    }
                    absorbed = true;
                    break;
                }
            }
            if (!absorbed) kept.push_back(z);
        }
        edge_loci[e] = std::move(kept);
    }

    for (std::size_t e = 0; e < ne; ++e) {
        rep.per_edge[e] = edge_loci[e].size();
        for (const auto& z : edge_loci[e]) {
            rep.tangential_present |= z.kind == ZeroKind::tangential;
            rep.loci.push_back(z);
        }
    }
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        if (g.degree(v) < 2) continue;
        const double fv = F.vertex_value(v);
        if (!(vertex_hit[v] || std::abs(fv) <= tol.vertex_zero_rel * F.vertex_magnitude(v) + abs_floor)) continue;
        // Sign of F just inside each incident edge decides the kind.
        int pos = 0;
        int neg = 0;
        for (const auto& end : g.incident_ends(v)) {
            const auto& s = samples[end.edge];
            const std::size_t n = s.f.size() - 1;
            for (std::size_t k = 1; k < n; ++k) {
                const std::size_t idx = end.side == 0 ? k : n - k;
                const double val = s.f[idx];
                if (std::abs(val) > s.floor[idx]) {
                    (val > 0 ? pos : neg) += 1;
                    break;
                }
            }
        }
        ZeroLocus z;
        z.vertex = v;
        z.kind = (pos > 0 && neg > 0) ? ZeroKind::transversal : ZeroKind::tangential;
        z.residual = std::max(std::abs(fv), vertex_res[v]);
        rep.vertex_zero_present = true;
        rep.tangential_present |= z.kind == ZeroKind::tangential;
        rep.loci.push_back(z);
    }
    rep.total = rep.loci.size();
    return rep;
}

/// Independent cross-check: sign changes on a uniform interior grid per
/// edge plus inner vertices where |F| is negligible. Blind to tangential
/// zeros by construction.
inline std::size_t brute_force_count(const FunctionOnGraph& F, std::size_t samples_per_edge,
                                     const Tolerances& tol = {}) {
    if (samples_per_edge < 1000) throw InvalidArgument("brute_force_count needs >= 1000 samples per edge");
    const auto& g = F.graph();
    std::vector<std::vector<double>> vals(g.edges.size());
    double sup = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const double l = g.edges[e].length;
        for (std::size_t j = 1; j < samples_per_edge; ++j) {
            const double v = F.evaluate(e, l * static_cast<double>(j) / static_cast<double>(samples_per_edge));
            vals[e].push_back(v);
            sup = std::max(sup, std::abs(v));
        }
    }
    std::size_t count = 0;
    for (const auto& row : vals) {
        int prev = 0;
        for (double v : row) {
            const int s = detail::sign_of(v);
            if (s == 0) continue;
            if (prev != 0 && s != prev) ++count;
            prev = s;
        }
    }
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        if (g.degree(v) >= 2 && std::abs(F.vertex_value(v)) <= tol.vertex_zero_rel * sup) ++count;
    }
    return count;
}

}  // namespace qgraph
