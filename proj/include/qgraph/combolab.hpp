#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/nodal.hpp"
#include "qgraph/spectral.hpp"
#include "qgraph/tolerances.hpp"

namespace qgraph {

struct NodalBounds {
    long lower = 0;
    long upper = 0;
};

/// k1 - 1 - (M-1)X <= N(F) <= kM - 1 + beta + (M-1)X, X = |V_b| + 2 beta - 2.
inline NodalBounds theorem1_bounds(const GraphTopology& t, std::size_t k1, std::size_t kM, std::size_t M) {
    if (k1 < 1 || k1 > kM) throw InvalidArgument("bounds need 1 <= k1 <= kM");
    if (M < 1) throw InvalidArgument("bounds need M >= 1");
    const long excess = static_cast<long>(t.n_boundary) + 2 * t.beta - 2;
    const long m1 = static_cast<long>(M) - 1;
    return {static_cast<long>(k1) - 1 - m1 * excess, static_cast<long>(kM) - 1 + t.beta + m1 * excess};
}

enum class Verdict { pass, fail, inapplicable, informational };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inapplicable: return "inapplicable";
        case Verdict::informational: return "informational";
    }
    return "?";
}

struct BoundCertificate {
    std::size_t k1 = 0;
    std::size_t kM = 0;
    std::size_t M = 0;
    std::size_t n_boundary = 0;
    long beta = 0;
    long lower = 0;
    long upper = 0;
    std::size_t measured = 0;
    bool within = false;   // lower <= measured <= upper, regardless of scope
    bool generic = false;  // for the eigenfunctions in the combination
    Verdict verdict = Verdict::fail;
    GenericityReport genericity;
    NodalReport nodal;
};

namespace detail {

/// Genericity restricted to the eigenfunctions that enter F: non-zero at
/// every inner vertex and separated from both spectral neighbours.
inline bool involved_generic(const FunctionOnGraph& F, const GenericityReport& rep) {
    const auto& spec = F.spectrum();
    for (const auto& t : F.terms()) {
        const auto& pg = rep.pairs.at(t.index - 1);
        if (pg.min_inner_ratio && !(*pg.min_inner_ratio > rep.tol_ratio)) return false;
        if (t.index < spec.size() && !(spec.at(t.index + 1).lambda - pg.lambda > rep.tol_gap)) return false;
        if (t.index > 1 && !(pg.lambda - spec.at(t.index - 1).lambda > rep.tol_gap)) return false;
    }
    return true;
}

}  // namespace detail

inline BoundCertificate verify_bounds(const FunctionOnGraph& F, const Tolerances& tol = {}) {
    const auto& g = F.graph();
    const auto topo = topology(g);
    BoundCertificate c;
    c.k1 = F.terms().front().index;
    c.kM = F.terms().back().index;
    c.M = F.terms().size();
    c.n_boundary = topo.n_boundary;
    c.beta = topo.beta;
    const auto b = theorem1_bounds(topo, c.k1, c.kM, c.M);
    c.lower = b.lower;
    c.upper = b.upper;
    c.genericity = genericity_check(F.spectrum(), F.spectrum().size(), tol);
    c.generic = detail::involved_generic(F, c.genericity);
    c.nodal = count_zeros(F, {tol});
    c.measured = c.nodal.total;
    c.within = c.lower <= static_cast<long>(c.measured) && static_cast<long>(c.measured) <= c.upper;
    if (g.has_neumann()) {
        c.verdict = Verdict::informational;
    } else if (!c.generic) {
        c.verdict = Verdict::inapplicable;
    } else {
        c.verdict = c.within ? Verdict::pass : Verdict::fail;
    }
    return c;
}

/// Computes the spectrum (one pair beyond k_M, for the gap check) and certifies F.
inline BoundCertificate verify_bounds(const MetricGraph& g, const std::vector<Term>& combo, const Tolerances& tol = {}) {
    if (combo.empty()) throw InvalidArgument("empty combination");
    const auto spec = std::make_shared<const Spectrum>(scan_spectrum(g, combo.back().index + 1, tol));
    return verify_bounds(FunctionOnGraph(spec, combo), tol);
}

// ---------------------------------------------------------------------------
// Small-edge scale selection for the star G(s, eps).

struct EpsSelection {
    double eps = 0.0;
    int j = 0;  // eps = 2^-j
    std::vector<double> eigenvalues;
    double eps_sqrt_lambda = 0.0;
    double min_gap = 0.0;
};

/// Largest eps = 2^-j (j <= 20) with eps sqrt(lambda_M) < pi/2 and the first
/// M eigenvalues of G(s, eps) simple with gaps above tol_gap.
inline EpsSelection select_eps(int s, std::size_t M, const Tolerances& tol = {}) {
    if (s < 1 || M < 1) throw InvalidArgument("select_eps needs s >= 1 and M >= 1");
    for (int j = 1; j <= 20; ++j) {
        const double eps = std::ldexp(1.0, -j);
        const auto spec = scan_spectrum(build_star(s, eps), M + 1, tol);
        const auto lam = spec.eigenvalues();
        const double esl = eps * std::sqrt(std::max(lam[M - 1], 0.0));
        if (!(esl < std::numbers::pi / 2)) continue;
        const double tol_gap = tol.generic_gap_rel * std::max(std::abs(lam[M - 1]), 1.0);
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < M; ++i) gap = std::min(gap, lam[i + 1] - lam[i]);
        if (!(gap > tol_gap)) continue;
        return {eps, j, std::vector<double>(lam.begin(), lam.begin() + static_cast<long>(M)), esl, gap};
    }
    throw SearchError("no eps = 2^-j with j <= 20 passes the small-edge checks for s = " + std::to_string(s) +
                      ", M = " + std::to_string(M));
}

// ---------------------------------------------------------------------------
// Saturating combinations on perturbed stars.

struct SaturationResult {
    std::size_t L = 0;
    std::size_t s = 0;
    std::vector<double> coefficients;
    std::size_t measured = 0;
    std::size_t target = 0;
    bool achieved = false;
    std::size_t attempts = 0;
    std::size_t designated_edge = 0;
    std::vector<double> targets;  // interpolation points of the successful attempt
    NodalReport nodal;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline std::size_t first_short_edge(const MetricGraph& g) {
    double longest = 0.0;
    for (const auto& e : g.edges) longest = std::max(longest, e.length);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (g.edges[e].length < longest) return e;
    }
    throw InvalidArgument("graph has no edge shorter than the longest one");
}

inline std::size_t star_arms(const MetricGraph& g) {
    std::size_t deg = 0;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) deg = std::max(deg, g.degree(v));
    return deg - 1;
}

}  // namespace detail

/// Combination of f_1..f_L with L-1 prescribed zeros on one small edge of a
/// (perturbed) star. The coefficient vector spans the null direction of the
/// (L-1) x L interpolation matrix; targets are jittered and redrawn when the
/// result has the wrong count on the designated edge or a tangential zero.
inline SaturationResult design_saturating_combo(const std::shared_ptr<const Spectrum>& spec, std::size_t L,
                                                std::uint64_t seed, const Tolerances& tol = {},
                                                std::optional<std::size_t> designated = std::nullopt) {
    const auto& g = *spec->graph;
    if (L < 1) throw InvalidArgument("saturation needs L >= 1");
    if (spec->size() < L) throw InvalidArgument("spectrum holds fewer than L eigenpairs");
    const auto gen = genericity_check(*spec, L, tol);
    if (!gen.generic) throw InvalidArgument("saturation requires a generic graph for the first L eigenpairs");

    SaturationResult r;
    r.L = L;
    r.s = detail::star_arms(g);
    r.target = (L - 1) * r.s;
    r.designated_edge = designated.value_or(detail::first_short_edge(g));
    const std::size_t e = r.designated_edge;
    const double len = g.edges.at(e).length;

    std::vector<Term> terms;
    for (std::size_t n = 1; n <= L; ++n) terms.push_back({n, 1.0});
    if (L == 1) {
        FunctionOnGraph F(spec, terms);
        r.coefficients = {1.0};
        r.nodal = count_zeros(F, {tol});
        r.measured = r.nodal.total;
        r.attempts = 1;
        r.achieved = r.measured == r.target && !r.nodal.tangential_present;
        return r;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    for (std::size_t attempt = 1; attempt <= 8; ++attempt) {
        r.attempts = attempt;
        std::vector<double> xs(L - 1);
        for (std::size_t j = 0; j + 1 < L; ++j) {
            xs[j] = len * (static_cast<double>(j + 1) + jitter(rng)) / static_cast<double>(L);
        }
        Eigen::MatrixXd A(static_cast<Eigen::Index>(L - 1), static_cast<Eigen::Index>(L + 0));
        for (std::size_t j = 0; j + 1 < L; ++j) {
            for (std::size_t n = 0; n < L; ++n) A(j, n) = spec->at(n + 1).value(e, xs[j]);
        }
        // Columns are equilibrated before the SVD; the scale is undone afterwards.
        Eigen::VectorXd scale(L);
        for (std::size_t n = 0; n < L; ++n) {
            const double c = A.col(n).norm();
            scale(n) = c > 0.0 ? 1.0 / c : 1.0;
            A.col(n) *= scale(n);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
        Eigen::VectorXd a = svd.matrixV().col(static_cast<Eigen::Index>(L - 1)).cwiseProduct(scale);
        a /= a.cwiseAbs().maxCoeff();
        std::vector<double> coeffs(a.data(), a.data() + L);
        if (std::any_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; })) {
            r.diagnostics.push_back("attempt " + std::to_string(attempt) + ": zero coefficient");
            continue;
        }
        const FunctionOnGraph F(spec, terms);
        const auto Fa = F.with_coefficients(coeffs);
        auto rep = count_zeros(Fa, {tol});
        if (rep.per_edge[e] != L - 1 || rep.tangential_present) {
            r.diagnostics.push_back("attempt " + std::to_string(attempt) + ": " + std::to_string(rep.per_edge[e]) +
                                    " zeros on the designated edge" +
                                    (rep.tangential_present ? ", tangential zero present" : ""));
            continue;
        }
        r.coefficients = std::move(coeffs);
        r.targets = std::move(xs);
        r.measured = rep.total;
        r.nodal = std::move(rep);
        r.achieved = r.measured == r.target;
        if (!r.achieved) {
            r.diagnostics.push_back("count " + std::to_string(r.measured) + " differs from target " +
                                    std::to_string(r.target) + " (eps likely too large)");
        }
        return r;
    }
    r.diagnostics.push_back("no admissible combination after 8 attempts");
    return r;
}

struct SaturationRun {
    double eps = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::shared_ptr<const Spectrum> spectrum;
    GenericityReport genericity;
    NodalBounds bounds;
    SaturationResult result;
    std::vector<std::string> log;
};

struct SaturationOptions {
    std::optional<double> eps;
    std::optional<double> delta;
    std::uint64_t seed = 1;
    Tolerances tol;
};

/// End-to-end construction on G_delta(s, eps): eps from select_eps unless
/// given; delta starts at eps/64 and shrinks by 4 (three seeds per level)
/// until the perturbed star is generic and the design reaches its target.
inline SaturationRun saturate(int s, std::size_t L, const SaturationOptions& opt = {}) {
    SaturationRun run;
    run.eps = opt.eps ? *opt.eps : select_eps(s, L, opt.tol).eps;
    const auto star = build_star(s, run.eps);
    std::vector<double> deltas;
    if (opt.delta) {
        deltas.push_back(*opt.delta);
    } else {
        for (int i = 0; i < 6; ++i) deltas.push_back(run.eps / 64.0 * std::pow(0.25, i));
    }
    const std::uint64_t seeds = opt.delta ? 1 : 3;
    std::optional<SaturationRun> best;
    for (double delta : deltas) {
        for (std::uint64_t k = 0; k < seeds; ++k) {
            const std::uint64_t seed = opt.seed + k;
            const auto g = perturb_lengths(star, delta, seed);
            auto spec = std::make_shared<const Spectrum>(scan_spectrum(g, L + 1, opt.tol));
            auto gen = genericity_check(*spec, L, opt.tol);
            if (!gen.generic) {
                run.log.push_back("delta " + std::to_string(delta) + " seed " + std::to_string(seed) + ": not generic");
                continue;
            }
            auto res = design_saturating_combo(spec, L, seed, opt.tol);
            run.log.push_back("delta " + std::to_string(delta) + " seed " + std::to_string(seed) + ": N = " +
                              std::to_string(res.measured) + ", target " + std::to_string(res.target));
            SaturationRun cand = run;
            cand.delta = delta;
            cand.seed = seed;
            cand.spectrum = spec;
            cand.genericity = std::move(gen);
            cand.bounds = theorem1_bounds(topology(g), 1, L, L);
            cand.result = std::move(res);
            if (cand.result.achieved) return cand;
            if (!best) best = std::move(cand);
        }
    }
    if (!best) throw SearchError("no generic perturbation of G(" + std::to_string(s) + ", eps) found");
    best->log = run.log;
    return *best;
}

// ---------------------------------------------------------------------------
// Low-count combination on the perturbed ladder I(m, eps).

struct CountSample {
    double b = 0.0;
    std::size_t count = 0;
};

struct FindBResult {
    double b = 0.0;             // N(f2 + b f3) = 1 with the normalisation below
    double d2 = 0.0;            // raw outward derivatives at v1 along e1
    double d3 = 0.0;
    std::vector<double> coefficients;  // raw coefficients of f2, f3
    std::size_t n_f2 = 0;
    std::size_t n_f3 = 0;
    std::size_t n_combo = 0;
    std::vector<CountSample> table;
};

/// Normalises f2 and f3 to unit derivative at v1 along e1 and looks for b
/// with N(f2 + b f3) = 1: a geometric grid +-2^j first, then bisection on
/// the integer count towards the edges of the N = 1 set, then a dense scan
/// between grid neighbours whose counts differ.
inline FindBResult find_b(const std::shared_ptr<const Spectrum>& spec, const Tolerances& tol = {},
                          std::size_t edge = 0, int side = 0) {
    if (spec->size() < 3) throw InvalidArgument("find_b needs the first three eigenpairs");
    const auto& g = *spec->graph;
    if (edge >= g.edges.size()) throw InvalidArgument("find_b edge out of range");
    FindBResult r;
    const EdgeEnd end{edge, side};
    r.d2 = spec->at(2).outward_derivative(end);
    r.d3 = spec->at(3).outward_derivative(end);
    if (std::abs(r.d2) < 1e-12 || std::abs(r.d3) < 1e-12) {
        throw SpectralError("eigenfunction derivative at the normalisation vertex is below 1e-12");
    }
    const NodalOptions nopt{tol};
    r.n_f2 = count_zeros(FunctionOnGraph(spec, {{2, 1.0}}), nopt).total;
    r.n_f3 = count_zeros(FunctionOnGraph(spec, {{3, 1.0}}), nopt).total;

    auto count = [&](double b) -> std::size_t {
        if (b == 0.0) return r.n_f2;
        FunctionOnGraph F(spec, {{2, 1.0 / r.d2}, {3, b / r.d3}});
        const auto rep = count_zeros(F, nopt);
        r.table.push_back({b, rep.total});
        return rep.total;
    };

    std::vector<double> grid;
    for (int j = -20; j <= 20; ++j) {
        grid.push_back(std::ldexp(1.0, j));
        grid.push_back(-std::ldexp(1.0, j));
    }
    std::sort(grid.begin(), grid.end());
    std::vector<std::size_t> counts;
    for (double b : grid) counts.push_back(count(b));

    auto finish = [&](double b) {
        r.b = b;
        r.coefficients = {1.0 / r.d2, b / r.d3};
        r.n_combo = count(b);
        std::sort(r.table.begin(), r.table.end(), [](const auto& x, const auto& y) { return x.b < y.b; });
        return r;
    };

    // Edge of the N = 1 set between b_out (count != 1) and b_in (count == 1).
    auto edge_of_set = [&](double b_out, double b_in) {
        for (int it = 0; it < 60 && std::abs(b_in - b_out) > 1e-9 * std::abs(b_in); ++it) {
            const double mid = 0.5 * (b_out + b_in);
            (count(mid) == 1 ? b_in : b_out) = mid;
        }
        return b_in;
    };

    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (counts[i] != 1) continue;
        const double lo = i > 0 && counts[i - 1] != 1 ? edge_of_set(grid[i - 1], grid[i]) : grid[i];
        std::size_t k = i;
        while (k + 1 < grid.size() && counts[k + 1] == 1) ++k;
        const double hi = k + 1 < grid.size() ? edge_of_set(grid[k + 1], grid[k]) : grid[k];
        const double mid = 0.5 * (lo + hi);
        if (count(mid) == 1) return finish(mid);
        return finish(grid[i]);
    }
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (counts[i] == counts[i + 1]) continue;
        for (int q = 1; q < 64; ++q) {
            const double b = grid[i] + (grid[i + 1] - grid[i]) * q / 64.0;
            if (count(b) == 1) return finish(b);
        }
    }
    std::string table;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        table += " " + std::to_string(grid[i]) + ":" + std::to_string(counts[i]);
    }
    throw SearchError("no b with N(f2 + b f3) = 1 in the scan range; count table:" + table);
}

struct LadderSelection {
    double eps = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::shared_ptr<const Spectrum> spectrum;
    std::size_t n_f2 = 0;
    std::size_t n_f3 = 0;
};

/// Largest eps = 2^-j for which the perturbed ladder is generic for its first
/// three eigenpairs and has N(f2) = m, N(f3) = 2.
inline LadderSelection select_ladder(int m, std::optional<double> eps, std::uint64_t seed,
                                     const Tolerances& tol = {}) {
    const int j0 = eps ? 0 : 2;
    const int j1 = eps ? 0 : 20;
    for (int j = j0; j <= j1; ++j) {
        const double e = eps ? *eps : std::ldexp(1.0, -j);
        for (double delta : {e / 64.0, e / 256.0, e / 1024.0}) {
            const auto g = perturb_lengths(build_ladder(m, e), delta, seed);
            auto spec = std::make_shared<const Spectrum>(scan_spectrum(g, 4, tol));
            if (!genericity_check(*spec, 3, tol).generic) continue;
            const auto n2 = count_zeros(FunctionOnGraph(spec, {{2, 1.0}}), {tol}).total;
            const auto n3 = count_zeros(FunctionOnGraph(spec, {{3, 1.0}}), {tol}).total;
            if (n2 == static_cast<std::size_t>(m) && n3 == 2) return {e, delta, seed, spec, n2, n3};
            break;  // the counts depend on eps, not on delta
        }
    }
    throw SearchError("no ladder scale found with N(f2) = " + std::to_string(m) + " and N(f3) = 2");
}

struct LadderRun {
    LadderSelection selection;
    FindBResult result;
    std::vector<std::string> log;
};

/// find_b on the perturbed ladder, halving eps from the selected scale until
/// the N = 1 combination exists (it does once eps is small enough).
inline LadderRun ladder_find_b(int m, std::optional<double> eps, std::uint64_t seed, const Tolerances& tol = {}) {
    LadderRun run;
    double e = eps ? *eps : select_ladder(m, std::nullopt, seed, tol).eps;
    for (int halvings = 0; halvings <= 12 && e >= 0x1.0p-20; ++halvings, e *= 0.5) {
        try {
            run.selection = select_ladder(m, e, seed, tol);
            run.result = find_b(run.selection.spectrum, tol);
            return run;
        } catch (const SearchError& ex) {
            run.log.push_back("eps " + std::to_string(e) + ": " + std::string(ex.what()).substr(0, 120));
            if (eps) throw;
        }
    }
    throw SearchError("find_b failed at every eps tried for m = " + std::to_string(m));
}

}  // namespace qgraph
