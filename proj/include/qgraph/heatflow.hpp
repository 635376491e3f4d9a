#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qgraph/detail/numerics.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/nodal.hpp"
#include "qgraph/spectral.hpp"
#include "qgraph/tolerances.hpp"

namespace qgraph {

// g(x, y) = sum_i a_i exp(-lambda_i y) f_i(x). At every y the function is
// evaluated as exp(lambda_ref y) g with lambda_ref chosen so that the largest
// exponential is exactly 1; zero sets do not see the positive factor.

enum class EventKind { E1, E2, E3, E4, E5, E6, unknown };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::E1: return "E1";
        case EventKind::E2: return "E2";
        case EventKind::E3: return "E3";
        case EventKind::E4: return "E4";
        case EventKind::E5: return "E5";
        case EventKind::E6: return "E6";
        case EventKind::unknown: return "unknown";
    }
    return "?";
}

struct EventSite {
    std::optional<std::size_t> vertex;  // boundary or inner vertex
    std::optional<std::size_t> edge;    // edge-interior site
    double x = 0.0;
};

struct NodalEvent {
    double y = 0.0;
    double y_lo = 0.0;  // bracket the event was refined to
    double y_hi = 0.0;
    EventKind kind = EventKind::unknown;
    EventSite site;
    long delta = 0;  // change of the nodal count as y increases through the event
    std::size_t lines_in = 0;   // loci ending at the site
    std::size_t lines_out = 0;  // loci leaving the site
    std::size_t tangential_in = 0;
    std::size_t tangential_out = 0;
    std::string note;
};

struct TraceSlice {
    double y = 0.0;
    bool refined = false;  // inserted by event localisation, not on the base grid
    NodalReport report;
    std::vector<long> curve;  // curve id per locus in report.loci
};

struct HeatFlowTrace {
    std::shared_ptr<const Spectrum> spectrum;
    std::vector<Term> terms;
    double dy = 0.0;
    double y_scale = 0.0;  // 1 / (lambda_kM - lambda_k1), or 1/lambda for one term
    std::vector<TraceSlice> slices;
    std::vector<NodalEvent> events;
    std::size_t n_low = 0;   // N(f_kM)
    std::size_t n_high = 0;  // N(f_k1)
    std::size_t n_zero = 0;  // N(F) at y = 0
    bool low_converged = false;
    bool high_converged = false;
    long next_curve = 0;

    [[nodiscard]] double y_min() const { return slices.front().y; }
    [[nodiscard]] double y_max() const { return slices.back().y; }
};

struct HeatFlowOptions {
    std::optional<double> y_min;
    std::optional<double> y_max;  // both set: fixed range; otherwise adaptive
    unsigned threads = 1;
    Tolerances tol;
    std::size_t stable_steps = 20;
    double dominance = 1e-6;  // sub-dominant coefficient ratio required at the extremes
    std::size_t max_steps = 100000;
};

namespace detail {

class HeatFunction {
public:
    HeatFunction(std::shared_ptr<const Spectrum> spec, std::vector<Term> terms)
        : spec_(std::move(spec)), terms_(std::move(terms)) {
        static_cast<void>(FunctionOnGraph(spec_, terms_));  // validates the combination
        for (const auto& t : terms_) lambdas_.push_back(spec_->at(t.index).lambda);
    }

    [[nodiscard]] double lambda_ref(double y) const { return y >= 0.0 ? lambdas_.front() : lambdas_.back(); }

    /// Scaled coefficients at y; underflowed terms come back as zero.
    [[nodiscard]] std::vector<double> coefficients(double y) const {
        const double ref = lambda_ref(y);
        std::vector<double> c(terms_.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = terms_[i].coeff * std::exp(-(lambdas_[i] - ref) * y);
        return c;
    }

    [[nodiscard]] FunctionOnGraph at(double y) const {
        const auto c = coefficients(y);
        std::vector<Term> t;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] != 0.0) t.push_back({terms_[i].index, c[i]});
        }
        return {spec_, std::move(t)};
    }

    /// Largest |c_i / c_dom| over the sub-dominant terms at y.
    [[nodiscard]] double subdominance(double y) const {
        const auto c = coefficients(y);
        const std::size_t dom = y >= 0.0 ? 0 : c.size() - 1;
        double r = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i != dom) r = std::max(r, std::abs(c[i] / c[dom]));
        }
        return r;
    }

    [[nodiscard]] double log_range(double y) const {
        return (lambdas_.back() - lambdas_.front()) * std::abs(y) / std::log(10.0);
    }

    /// dx/dy of the zero curve through (e, x) at height y: -g_y / g_x.
    [[nodiscard]] double velocity(double y, std::size_t e, double x) const {
        const auto c = coefficients(y);
        const double ref = lambda_ref(y);
        double gx = 0.0;
        double gy = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const auto& p = spec_->at(terms_[i].index);
            gx += c[i] * p.derivative(e, x);
            gy -= (lambdas_[i] - ref) * c[i] * p.value(e, x);
        }
        if (gx == 0.0) return std::numeric_limits<double>::infinity();
        return -gy / gx;
    }

    /// Vertex coefficients b_i = a_i f_i(v), ordered by eigenvalue.
    [[nodiscard]] std::vector<double> vertex_coefficients(std::size_t v) const {
        std::vector<double> b;
        for (const auto& t : terms_) b.push_back(t.coeff * vertex_value(*spec_->graph, spec_->at(t.index), v));
        return b;
    }

    [[nodiscard]] const std::vector<double>& lambdas() const { return lambdas_; }
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
    [[nodiscard]] const Spectrum& spectrum() const { return *spec_; }

private:
    std::shared_ptr<const Spectrum> spec_;
    std::vector<Term> terms_;
    std::vector<double> lambdas_;
};

/// Sign-preserving evaluation of h(y) = sum b_i exp(-lambda_i y), rescaled so
/// the dominant exponential is 1. Also returns the scale sum |b_i| e^(...).
inline std::pair<double, double> exp_sum(std::span<const double> b, std::span<const double> lam, double y) {
    double ref = y >= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] == 0.0) continue;
        ref = y >= 0.0 ? std::min(ref, lam[i]) : std::max(ref, lam[i]);
    }
    double h = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] == 0.0) continue;
        const double t = b[i] * std::exp(-(lam[i] - ref) * y);
        h += t;
        s += std::abs(t);
    }
    return {h, s};
}

struct Matching {
    std::vector<long> b_to_a;  // index into A per B locus, -1 if unmatched
    std::vector<bool> a_used;
};

}  // namespace detail

struct ExpSumBound {
    std::size_t vertex = 0;
    std::vector<double> lambdas;
    std::vector<double> coefficients;  // a_i f_i(v), dropped terms set to zero
    std::size_t sign_changes = 0;      // C
    std::vector<double> zeros;         // located zeros of g_v
    double y_lo = 0.0;
    double y_hi = 0.0;
    bool within_bound = true;
};

/// Zeros of g_v(y) on [y_lo, y_hi] by a scan at `step` and bisection, compared
/// with the number of sign changes in the coefficient sequence.
inline ExpSumBound vertex_crossing_bound(const detail::HeatFunction& h, std::size_t v, double y_lo, double y_hi,
                                         double step, const Tolerances& tol = {}) {
    ExpSumBound r;
    r.vertex = v;
    r.lambdas = h.lambdas();
    r.coefficients = h.vertex_coefficients(v);
    r.y_lo = y_lo;
    r.y_hi = y_hi;
    double big = 0.0;
    for (double b : r.coefficients) big = std::max(big, std::abs(b));
    for (double& b : r.coefficients) {
        if (std::abs(b) <= tol.exp_coeff_rel * big) b = 0.0;
    }
    int prev = 0;
    for (double b : r.coefficients) {
        const int s = detail::sign_of(b);
        if (s == 0) continue;
        if (prev != 0 && s != prev) ++r.sign_changes;
        prev = s;
    }
    if (big == 0.0) return r;
    auto hv = [&](double y) { return detail::exp_sum(r.coefficients, r.lambdas, y).first; };
    const auto n = static_cast<std::size_t>(std::ceil((y_hi - y_lo) / step));
    double ya = y_lo;
    double ha = hv(ya);
    for (std::size_t i = 1; i <= n; ++i) {
        const double yb = std::min(y_hi, y_lo + static_cast<double>(i) * step);
        const double hb = hv(yb);
        if (ha == 0.0) {
            r.zeros.push_back(ya);
        } else if (detail::sign_of(hb) == -detail::sign_of(ha)) {
            const double ytol = tol.heat_y_rel * std::max({std::abs(ya), std::abs(yb), step});
            r.zeros.push_back(detail::bisect_sign(hv, ya, yb, ha, ytol));
        }
        ya = yb;
        ha = hb;
    }
    r.within_bound = r.zeros.size() <= r.sign_changes;
    return r;
}

inline ExpSumBound vertex_crossing_bound(const FunctionOnGraph& F, std::size_t v, double y_lo, double y_hi,
                                         const Tolerances& tol = {}) {
    const auto& t = F.terms();
    const detail::HeatFunction h(F.spectrum_ptr(), {t.begin(), t.end()});
    const double spread = h.lambdas().back() - h.lambdas().front();
    const double step = 0.025 / (spread > 0.0 ? spread : std::max(std::abs(h.lambdas().front()), 1.0));
    return vertex_crossing_bound(h, v, y_lo, y_hi, step, tol);
}

namespace detail {

class TraceBuilder {
public:
    TraceBuilder(const HeatFunction& h, const HeatFlowOptions& opt, double y_scale)
        : h_(h), opt_(opt), y_scale_(y_scale) {}

    [[nodiscard]] NodalReport report(double y) const { return count_zeros(h_.at(y), {opt_.tol}); }

    /// Matches loci of A (at ya) to loci of B (at yb) along predicted curve motion.
    [[nodiscard]] Matching match(const NodalReport& A, double ya, const NodalReport& B, double yb,
                                 double extra_radius = 0.0) const {
        const auto& g = h_.spectrum().graph;
        const double dy = yb - ya;
        Matching m;
        m.b_to_a.assign(B.loci.size(), -1);
        m.a_used.assign(A.loci.size(), false);
        struct Cand {
            double cost;
            std::size_t a, b;
        };
        std::vector<Cand> cands;
        std::vector<double> va(A.loci.size(), 0.0);
        std::vector<double> vb(B.loci.size(), 0.0);
        for (std::size_t i = 0; i < A.loci.size(); ++i) {
            if (A.loci[i].edge) va[i] = h_.velocity(ya, *A.loci[i].edge, A.loci[i].x);
        }
        for (std::size_t j = 0; j < B.loci.size(); ++j) {
            if (B.loci[j].edge) vb[j] = h_.velocity(yb, *B.loci[j].edge, B.loci[j].x);
        }
        for (std::size_t i = 0; i < A.loci.size(); ++i) {
            const auto& za = A.loci[i];
            for (std::size_t j = 0; j < B.loci.size(); ++j) {
                const auto& zb = B.loci[j];
                if (za.vertex || zb.vertex) {
                    if (za.vertex && zb.vertex && *za.vertex == *zb.vertex) cands.push_back({0.0, i, j});
                    continue;
                }
                if (*za.edge != *zb.edge || za.kind != zb.kind) continue;
                const double l = g->edges[*za.edge].length;
                const double fa = std::isfinite(va[i]) ? za.x + va[i] * dy : za.x;
                const double fb = std::isfinite(vb[j]) ? zb.x - vb[j] * dy : zb.x;
                const double speed = std::max(std::isfinite(va[i]) ? std::abs(va[i]) : 0.0,
                                              std::isfinite(vb[j]) ? std::abs(vb[j]) : 0.0);
                const double radius = 4.0 * speed * std::abs(dy) + 1e3 * opt_.tol.x_rel * l + extra_radius * l;
                const double d = std::min(std::abs(zb.x - fa), std::abs(za.x - fb));
                if (d <= radius) cands.push_back({d, i, j});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& p, const Cand& q) { return p.cost < q.cost; });
        for (const auto& c : cands) {
            if (m.a_used[c.a] || m.b_to_a[c.b] >= 0) continue;
            m.a_used[c.a] = true;
            m.b_to_a[c.b] = static_cast<long>(c.a);
        }
        return m;
    }

    static bool complete(const Matching& m) {
        return std::all_of(m.a_used.begin(), m.a_used.end(), [](bool u) { return u; }) &&
               std::all_of(m.b_to_a.begin(), m.b_to_a.end(), [](long a) { return a >= 0; });
    }

    [[nodiscard]] double y_tol(double y) const { return opt_.tol.heat_y_rel * std::max(std::abs(y), y_scale_); }

    /// Resolves the interval (A, B], appending refined slices and events in order.
    void resolve(const TraceSlice& A, TraceSlice B, HeatFlowTrace& out, int depth = 0) {
        const auto m = match(A.report, A.y, B.report, B.y);
        if (complete(m) || depth > 80) {
            if (!complete(m)) classify(A, B, m, out);
            assign_ids(A, B, m, out);
            out.slices.push_back(std::move(B));
            return;
        }
        if (B.y - A.y <= y_tol(B.y)) {
            // Second chance for loci that only moved within a vanishing y step.
            const auto m2 = match(A.report, A.y, B.report, B.y, 1e-3);
            if (!complete(m2)) classify(A, B, m2, out);
            assign_ids(A, B, m2, out);
            out.slices.push_back(std::move(B));
            return;
        }
        TraceSlice mid;
        mid.y = 0.5 * (A.y + B.y);
        mid.refined = true;
        mid.report = report(mid.y);
        resolve(A, mid, out, depth + 1);
        const TraceSlice left = out.slices.back();
        resolve(left, std::move(B), out, depth + 1);
    }

private:
    void assign_ids(const TraceSlice& A, TraceSlice& B, const Matching& m, HeatFlowTrace& out) const {
        B.curve.assign(B.report.loci.size(), -1);
        for (std::size_t j = 0; j < B.report.loci.size(); ++j) {
            B.curve[j] = m.b_to_a[j] >= 0 ? A.curve[static_cast<std::size_t>(m.b_to_a[j])] : out.next_curve++;
        }
    }

    struct Unmatched {
        const ZeroLocus* z;
        bool before;  // from A (terminates) or from B (appears)
    };

    void classify(const TraceSlice& A, const TraceSlice& B, const Matching& m, HeatFlowTrace& out) const {
        const auto& g = *h_.spectrum().graph;
        const double dy = B.y - A.y;
        std::vector<Unmatched> um;
        for (std::size_t i = 0; i < A.report.loci.size(); ++i) {
            if (!m.a_used[i]) um.push_back({&A.report.loci[i], true});
        }
        for (std::size_t j = 0; j < B.report.loci.size(); ++j) {
            if (m.b_to_a[j] < 0) um.push_back({&B.report.loci[j], false});
        }

        // Vertex sites first: inner vertices where g_v vanishes in the bracket,
        // boundary vertices next to a vanishing locus.
        // A zero parks on the vertex while |g_v| is below the vertex tolerance,
        // so the test window extends past the bracket by the E6 merge window.
        const double w = merge_window(B.y);
        auto gv_vanishes = [&](std::size_t v) {
            const auto b = h_.vertex_coefficients(v);
            const auto [ha, sa] = exp_sum(b, h_.lambdas(), A.y - w);
            const auto [hb, sb] = exp_sum(b, h_.lambdas(), B.y + w);
            return sign_of(ha) != sign_of(hb) || std::abs(ha) <= 1e3 * opt_.tol.vertex_zero_rel * sa ||
                   std::abs(hb) <= 1e3 * opt_.tol.vertex_zero_rel * sb;
        };
        std::map<std::size_t, std::vector<Unmatched>> at_vertex;
        std::map<std::size_t, std::vector<Unmatched>> on_edge;
        for (const auto& u : um) {
            if (u.z->vertex) {
                at_vertex[*u.z->vertex].push_back(u);
                continue;
            }
            const auto e = *u.z->edge;
            const auto& edge = g.edges[e];
            const double l = edge.length;
            const double v = h_.velocity(u.before ? A.y : B.y, e, u.z->x);
            const double radius = std::max(8.0 * (std::isfinite(v) ? std::abs(v) : 0.0) * dy, 1e-6 * l);
            std::optional<std::size_t> site;
            for (const auto& [vert, dist] : {std::pair{edge.from, u.z->x}, std::pair{edge.to, l - u.z->x}}) {
                if (dist > radius) continue;
                if (g.degree(vert) == 1 || gv_vanishes(vert)) {
                    site = vert;
                    break;
                }
            }
            if (site) {
                at_vertex[*site].push_back(u);
            } else {
                on_edge[e].push_back(u);
            }
        }

        const double y = 0.5 * (A.y + B.y);
        for (const auto& [v, list] : at_vertex) {
            NodalEvent ev;
            ev.y = y;
            ev.y_lo = A.y;
            ev.y_hi = B.y;
            ev.site.vertex = v;
            for (const auto& u : list) (u.before ? ev.lines_in : ev.lines_out) += 1;
            ev.delta = static_cast<long>(ev.lines_out) - static_cast<long>(ev.lines_in);
            ev.kind = g.degree(v) == 1 ? EventKind::E5 : EventKind::E6;
            push_event(ev, out);
        }
        for (auto& [e, list] : on_edge) {
            std::sort(list.begin(), list.end(), [](const Unmatched& p, const Unmatched& q) { return p.z->x < q.z->x; });
            const double l = g.edges[e].length;
            std::size_t i = 0;
            while (i < list.size()) {
                std::size_t j = i + 1;
                while (j < list.size() && list[j].z->x - list[j - 1].z->x <= 0.05 * l) ++j;
                NodalEvent ev;
                double xs = 0.0;
                for (std::size_t q = i; q < j; ++q) {
                    (list[q].before ? ev.lines_in : ev.lines_out) += 1;
                    if (list[q].z->kind == ZeroKind::tangential) {
                        (list[q].before ? ev.tangential_in : ev.tangential_out) += 1;
                    }
                    xs += list[q].z->x;
                }
                ev.y = y;
                ev.y_lo = A.y;
                ev.y_hi = B.y;
                ev.site.edge = e;
                ev.site.x = xs / static_cast<double>(j - i);
                ev.delta = static_cast<long>(ev.lines_out) - static_cast<long>(ev.lines_in);
                interior_kind(ev);
                if ((ev.kind == EventKind::E1 || ev.kind == EventKind::E2) && !persists_on_refinement(A.y, B.y, e)) {
                    ev.kind = EventKind::unknown;
                    ev.note = "count change not confirmed at higher sampling density";
                }
                push_event(ev, out);
                i = j;
            }
        }
    }

    static void interior_kind(NodalEvent& ev) {
        const auto in = ev.lines_in;
        const auto out = ev.lines_out;
        ev.note.clear();
        // A tangential zero is the apex of two colliding lines; a collision
        // split at a trace slice shows up as 2 -> tangential -> 0.
        const bool apex_out = out == 1 && ev.tangential_out == 1;
        const bool apex_in = in == 1 && ev.tangential_in == 1;
        if (out > in) {
            ev.kind = in == 0 && out == 2 ? EventKind::E1 : EventKind::E2;
            ev.note = "nodal line created inside an edge";
        } else if ((in == 2 && (out == 0 || apex_out)) || (apex_in && out == 0)) {
            ev.kind = EventKind::E4;
        } else if (in >= 2 && out < in) {
            ev.kind = EventKind::E3;
        } else {
            ev.kind = EventKind::unknown;
            ev.note = "unresolved matching";
        }
    }

    [[nodiscard]] double merge_window(double y) const { return 1e-6 * std::max(std::abs(y), y_scale_); }

    /// An apparent creation inside an edge is re-counted at four times the
    /// sampling density; it persists if the per-edge count still increases.
    [[nodiscard]] bool persists_on_refinement(double ya, double yb, std::size_t e) const {
        const NodalOptions fine{opt_.tol, 4.0};
        const auto ra = count_zeros(h_.at(ya), fine);
        const auto rb = count_zeros(h_.at(yb), fine);
        return rb.per_edge[e] > ra.per_edge[e];
    }

    /// Pieces of one event split over neighbouring brackets merge: E6 hits
    /// at a vertex during one crossing of g_v (the zero parks on the vertex
    /// for a y-window of order the tolerance), and interior collisions that
    /// pass through a tangential configuration.
    void push_event(NodalEvent ev, HeatFlowTrace& out) const {
        const auto& g = *h_.spectrum().graph;
        for (auto it = out.events.rbegin(); it != out.events.rend(); ++it) {
            if (ev.y - it->y > merge_window(ev.y)) break;
            if ((it->y_hi <= 0.0) != (ev.y_hi <= 0.0)) continue;  // y = 0 separates the two ledgers
            const bool same_vertex = ev.kind == EventKind::E6 && it->kind == EventKind::E6 &&
                                     it->site.vertex == ev.site.vertex;
            const bool same_spot = ev.site.edge && it->site.edge && *ev.site.edge == *it->site.edge &&
                                   std::abs(ev.site.x - it->site.x) <= 0.05 * g.edges[*ev.site.edge].length;
            if (!same_vertex && !same_spot) continue;
            const std::size_t carried = std::min(it->lines_out, ev.lines_in);
            const std::size_t carried_t = std::min(it->tangential_out, ev.tangential_in);
            it->lines_in += ev.lines_in - carried;
            it->lines_out = it->lines_out - carried + ev.lines_out;
            it->tangential_in += ev.tangential_in - carried_t;
            it->tangential_out = it->tangential_out - carried_t + ev.tangential_out;
            it->delta += ev.delta;
            it->y_hi = ev.y_hi;
            it->y = 0.5 * (it->y_lo + it->y_hi);
            if (same_spot) {
                const auto kind = ev.kind;
                interior_kind(*it);
                if (kind == EventKind::unknown && it->kind != EventKind::unknown) it->note.clear();
            }
            return;
        }
        out.events.push_back(std::move(ev));
    }

    const HeatFunction& h_;
    const HeatFlowOptions& opt_;
    double y_scale_;
};

}  // namespace detail

/// Builds the trace of F_y on a uniform y grid through 0 with step
/// 0.1 / (lambda_kM - lambda_k1), either on a fixed range or extended until
/// both ends sit in the single-eigenfunction regime for `stable_steps` steps.
/// Events between grid points are localised by bisection in y.
inline HeatFlowTrace evolve(const FunctionOnGraph& F, const HeatFlowOptions& opt = {}) {
    const auto& t = F.terms();
    const detail::HeatFunction h(F.spectrum_ptr(), {t.begin(), t.end()});
    HeatFlowTrace tr;
    tr.spectrum = F.spectrum_ptr();
    tr.terms = {t.begin(), t.end()};
    const double spread = h.lambdas().back() - h.lambdas().front();
    tr.y_scale = 1.0 / (spread > 0.0 ? spread : std::max(std::abs(h.lambdas().front()), 1.0));
    tr.dy = 0.1 * tr.y_scale;
    const NodalOptions nopt{opt.tol};
    tr.n_low = count_zeros(FunctionOnGraph(tr.spectrum, {{t.back().index, 1.0}}), nopt).total;
    tr.n_high = count_zeros(FunctionOnGraph(tr.spectrum, {{t.front().index, 1.0}}), nopt).total;

    const bool fixed = opt.y_min && opt.y_max;
    if (fixed && !(*opt.y_min <= 0.0 && *opt.y_max >= 0.0)) {
        throw InvalidArgument("heat-flow range must contain y = 0");
    }
    const unsigned threads = std::max(1u, opt.threads);

    // Grid points j * dy; reports computed in parallel batches.
    std::map<long, NodalReport> grid;
    auto compute = [&](const std::vector<long>& js) {
        std::vector<NodalReport> reps(js.size());
        detail::parallel_for(js.size(), threads, [&](std::size_t i) {
            reps[i] = count_zeros(h.at(static_cast<double>(js[i]) * tr.dy), nopt);
        });
        for (std::size_t i = 0; i < js.size(); ++i) grid[js[i]] = std::move(reps[i]);
    };

    if (fixed) {
        const auto jlo = static_cast<long>(std::floor(*opt.y_min / tr.dy));
        const auto jhi = static_cast<long>(std::ceil(*opt.y_max / tr.dy));
        if (static_cast<std::size_t>(jhi - jlo) > opt.max_steps) throw InvalidArgument("heat-flow range too long");
        std::vector<long> js;
        for (long j = jlo; j <= jhi; ++j) js.push_back(j);
        compute(js);
    } else {
        compute({0});
        const long batch = static_cast<long>(std::max<std::size_t>(threads * 8, 32));
        // side = -1: low y, converging to f_kM; side = +1: high y, to f_k1.
        for (int side : {-1, 1}) {
            const std::size_t target = side < 0 ? tr.n_low : tr.n_high;
            long reach = 0;
            while (true) {
                std::size_t stable = 0;
                for (long j = reach; std::abs(j) >= 0 && stable < opt.stable_steps; j -= side) {
                    const double y = static_cast<double>(j) * tr.dy;
                    if (grid.at(j).total == target && (spread == 0.0 || h.subdominance(y) <= opt.dominance)) {
                        ++stable;
                    } else {
                        break;
                    }
                    if (j == 0) break;
                }
                if (stable >= opt.stable_steps) break;
                if (static_cast<std::size_t>(std::abs(reach)) > opt.max_steps ||
                    h.log_range(static_cast<double>(reach) * tr.dy) > 300.0) {
                    throw SearchError("heat-flow range exploded before the nodal count stabilised");
                }
                std::vector<long> js;
                for (long k = 1; k <= batch; ++k) js.push_back(reach + side * k);
                compute(js);
                reach += side * batch;
            }
            (side < 0 ? tr.low_converged : tr.high_converged) = true;
        }
    }

    detail::TraceBuilder tb(h, opt, tr.y_scale);
    auto it = grid.begin();
    TraceSlice first;
    first.y = static_cast<double>(it->first) * tr.dy;
    first.report = std::move(it->second);
    for (std::size_t i = 0; i < first.report.loci.size(); ++i) first.curve.push_back(tr.next_curve++);
    tr.slices.push_back(std::move(first));
    for (++it; it != grid.end(); ++it) {
        TraceSlice s;
        s.y = static_cast<double>(it->first) * tr.dy;
        s.report = std::move(it->second);
        const TraceSlice prev = tr.slices.back();
        tb.resolve(prev, std::move(s), tr);
    }
    for (const auto& s : tr.slices) {
        if (s.y == 0.0) tr.n_zero = s.report.total;
    }
    if (fixed) {
        tr.low_converged = tr.slices.front().report.total == tr.n_low && h.subdominance(tr.y_min()) <= opt.dominance;
        tr.high_converged = tr.slices.back().report.total == tr.n_high && h.subdominance(tr.y_max()) <= opt.dominance;
    }
    return tr;
}

inline std::vector<NodalEvent> detect_events(const HeatFlowTrace& trace) { return trace.events; }

struct VertexAudit {
    std::size_t vertex = 0;
    std::size_t degree = 0;
    std::size_t e6_count = 0;
    long max_e6_delta = 0;
    ExpSumBound bound;
};

struct HeatFlowAudit {
    std::size_t M = 0;
    long ledger_low = 0;   // N(f_kM) + sum of deltas below 0
    long ledger_high = 0;  // N(f_k1) - sum of deltas above 0
    bool ledger_ok = false;
    bool extremes_ok = false;
    std::size_t e1e2_events = 0;
    std::size_t unknown_events = 0;
    bool increases_at_e6 = true;   // every positive delta is an E6 with delta <= deg - 2
    bool e6_budget_ok = true;      // per vertex <= M - 1
    bool e6_matches_gv = true;     // each E6 y within 1e-6 (relative) of a zero of g_v
    bool polya_szego_ok = true;
    bool counts_change_only_at_events = true;
    std::vector<VertexAudit> vertices;
    std::vector<std::string> issues;

    [[nodiscard]] bool passed() const {
        return ledger_ok && extremes_ok && e1e2_events == 0 && increases_at_e6 && e6_budget_ok && e6_matches_gv &&
               polya_szego_ok && counts_change_only_at_events;
    }
};

inline HeatFlowAudit audit_trace(const HeatFlowTrace& tr, const Tolerances& tol = {}) {
    const auto& g = *tr.spectrum->graph;
    const detail::HeatFunction h(tr.spectrum, tr.terms);
    HeatFlowAudit a;
    a.M = tr.terms.size();

    long below = 0;
    long above = 0;
    for (const auto& ev : tr.events) (ev.y_hi <= 0.0 ? below : above) += ev.delta;
    const long n0 = static_cast<long>(tr.n_zero);
    a.ledger_low = static_cast<long>(tr.n_low) + below;
    a.ledger_high = static_cast<long>(tr.n_high) - above;
    a.ledger_ok = a.ledger_low == n0 && a.ledger_high == n0;
    if (!a.ledger_ok) a.issues.push_back("event deltas do not reconcile the extreme counts with N(F)");
    a.extremes_ok = tr.slices.front().report.total == tr.n_low && tr.slices.back().report.total == tr.n_high;
    if (!a.extremes_ok) a.issues.push_back("counts at the ends of the range differ from N(f_kM) / N(f_k1)");

    // Outside event brackets the count equals the start count plus the
    // deltas of all events already passed.
    for (const auto& sl : tr.slices) {
        long expected = static_cast<long>(tr.slices.front().report.total);
        bool inside = false;
        for (const auto& ev : tr.events) {
            if (ev.y_lo < sl.y && sl.y < ev.y_hi) inside = true;
            if (ev.y_hi <= sl.y) expected += ev.delta;
        }
        if (!inside && expected != static_cast<long>(sl.report.total)) {
            a.counts_change_only_at_events = false;
            a.issues.push_back("count at y = " + std::to_string(sl.y) + " not explained by the events before it");
            break;
        }
    }

    const double margin = 20.0 * tr.dy;
    for (auto v : g.inner_vertices()) {
        VertexAudit va;
        va.vertex = v;
        va.degree = g.degree(v);
        va.bound = vertex_crossing_bound(h, v, tr.y_min() - margin, tr.y_max() + margin, 0.25 * tr.dy, tol);
        a.polya_szego_ok &= va.bound.within_bound;
        a.vertices.push_back(std::move(va));
    }
    for (const auto& ev : tr.events) {
        if (ev.kind == EventKind::E1 || ev.kind == EventKind::E2) ++a.e1e2_events;
        if (ev.kind == EventKind::unknown) ++a.unknown_events;
        if (ev.delta > 0) {
            const bool ok = ev.kind == EventKind::E6 &&
                            ev.delta <= static_cast<long>(g.degree(*ev.site.vertex)) - 2;
            if (!ok) {
                a.increases_at_e6 = false;
                a.issues.push_back(std::string("count increase at ") + to_string(ev.kind) + " event, y = " +
                                   std::to_string(ev.y));
            }
        }
        if (ev.kind != EventKind::E6) continue;
        auto va = std::find_if(a.vertices.begin(), a.vertices.end(),
                               [&](const VertexAudit& x) { return x.vertex == *ev.site.vertex; });
        ++va->e6_count;
        va->max_e6_delta = std::max(va->max_e6_delta, ev.delta);
        const double ytol = 1e-6 * std::max(std::abs(ev.y), tr.y_scale);
        const bool near = std::any_of(va->bound.zeros.begin(), va->bound.zeros.end(),
                                      [&](double z) { return std::abs(z - ev.y) <= ytol; });
        if (!near) {
            a.e6_matches_gv = false;
            a.issues.push_back("E6 event at y = " + std::to_string(ev.y) + " has no zero of g_v nearby");
        }
    }
    for (const auto& va : a.vertices) {
        if (va.e6_count + 1 > a.M) {
            a.e6_budget_ok = false;
            a.issues.push_back("vertex '" + g.vertices[va.vertex].id + "' hosts more than M - 1 E6 events");
        }
    }
    if (a.e1e2_events) a.issues.push_back("nodal line created inside an edge");
    return a;
}

}  // namespace qgraph
