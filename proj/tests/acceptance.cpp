// One line per acceptance criterion; exit status is non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qgraph/combolab.hpp"
#include "qgraph/heatflow.hpp"
#include "support.hpp"

using namespace qgraph;
using std::numbers::pi;

namespace {

using SpecPtr = std::shared_ptr<const Spectrum>;

// Every spectrum computed below, for the conservation and residual checks.
std::vector<SpecPtr> g_spectra;

SpecPtr spectrum(const MetricGraph& g, std::size_t n) {
    auto s = std::make_shared<const Spectrum>(scan_spectrum(g, n));
    g_spectra.push_back(s);
    return s;
}

struct Outcome {
    bool pass = true;
    std::string detail;
    double limit_s = 0.0;  // 0: no runtime limit
};

int g_failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.limit_s > 0.0 && secs >= o.limit_s) {
        o.pass = false;
        o.detail += "; runtime over " + std::to_string(o.limit_s) + " s";
    }
    g_failures += !o.pass;
    std::printf("[%s] criterion %2d  %-28s %s (%.3f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<Term> random_combo(std::mt19937_64& gen, std::size_t max_index, std::size_t max_terms) {
    std::uniform_int_distribution<std::size_t> m(1, max_terms);
    std::uniform_real_distribution<double> mag(0.2, 1.0);
    std::vector<std::size_t> idx(max_index);
    for (std::size_t i = 0; i < max_index; ++i) idx[i] = i + 1;
    std::shuffle(idx.begin(), idx.end(), gen);
    idx.resize(m(gen));
    std::sort(idx.begin(), idx.end());
    std::vector<Term> t;
    for (auto k : idx) t.push_back({k, (gen() & 1 ? 1.0 : -1.0) * mag(gen)});
    return t;
}

std::vector<Term> saturating_terms(const SaturationRun& r) {
    std::vector<Term> t;
    for (std::size_t i = 0; i < r.result.coefficients.size(); ++i) t.push_back({i + 1, r.result.coefficients[i]});
    return t;
}

std::vector<FunctionOnGraph> g_heat_cases;  // combinations from criteria 5 and 6

}  // namespace

int main() {
    report(1, "interval oracle", [] {
        Outcome o{.limit_s = 1.0};
        const auto s = spectrum(build_interval(1.0), 10);
        double worst = 0.0;
        std::size_t bad_counts = 0;
        for (std::size_t n = 1; n <= 10; ++n) {
            const double exact = pi * pi * static_cast<double>(n * n);
            worst = std::max(worst, std::abs(s->at(n).lambda - exact) / exact);
            bad_counts += count_zeros(FunctionOnGraph(s, {{n, 1.0}})).total != n - 1;
        }
        o.pass = s->size() == 10 && worst <= 1e-10 && bad_counts == 0;
        o.detail = fmt("max rel err %.2e (<= 1e-10), N(f_n) != n-1 for %zu of 10", worst, bad_counts);
        return o;
    });

    report(2, "interval combinations", [] {
        Outcome o{.limit_s = 30.0};
        const auto s = spectrum(build_interval(1.0), 10);
        std::mt19937_64 gen(2024);
        std::size_t violations = 0;
        for (int i = 0; i < 200; ++i) {
            const auto t = random_combo(gen, 10, 4);
            const auto n = static_cast<long>(count_zeros(FunctionOnGraph(s, t)).total);
            violations += n < static_cast<long>(t.front().index) - 1 || n > static_cast<long>(t.back().index) - 1;
        }
        o.pass = violations == 0;
        o.detail = fmt("200 combos, %zu violations of k1-1 <= N <= kM-1", violations);
        return o;
    });

    report(3, "tree nodal count", [] {
        Outcome o;
        std::mt19937_64 gen(33);
        std::size_t trees = 0;
        std::size_t redrawn = 0;
        std::size_t violations = 0;
        while (trees < 50) {
            const std::size_t n_edges = 1 + gen() % 8;
            const auto g = perturb_lengths(fixtures::random_tree(gen, n_edges), 0.01, gen(), PerturbScope::all_edges);
            const auto s = spectrum(g, 9);
            if (!genericity_check(*s, 8).generic) {
                ++redrawn;
                continue;
            }
            ++trees;
            for (std::size_t k = 1; k <= 8; ++k) violations += count_zeros(FunctionOnGraph(s, {{k, 1.0}})).total != k - 1;
        }
        o.pass = violations == 0;
        o.detail = fmt("50 trees x 8 eigenfunctions, %zu violations (%zu non-generic draws replaced)", violations,
                       redrawn);
        return o;
    });

    report(4, "bound certificates", [] {
        Outcome o{.limit_s = 300.0};
        std::mt19937_64 gen(44);
        std::size_t combos = 0;
        std::size_t violations = 0;
        std::size_t not_pass = 0;
        std::size_t redrawn = 0;
        std::size_t graphs = 0;
        while (combos < 500) {
            const auto g = fixtures::random_graph(gen, 3 + gen() % 4, gen() % 4);
            const auto s = spectrum(g, 9);
            if (!genericity_check(*s, 8).generic) {
                ++redrawn;
                continue;
            }
            ++graphs;
            for (int r = 0; r < 5 && combos < 500; ++r, ++combos) {
                const auto t = random_combo(gen, 8, 4);
                const auto c = verify_bounds(FunctionOnGraph(s, t));
                violations += !c.within;
                not_pass += c.verdict != Verdict::pass;
            }
        }
        o.pass = violations == 0 && not_pass == 0;
        o.detail = fmt("500 combos on %zu graphs (beta <= 3), %zu outside bounds, %zu not pass (%zu redrawn)",
                       graphs, violations, not_pass, redrawn);
        return o;
    });

    for (int s = 2; s <= 4; ++s) {
        for (std::size_t L : {2u, 3u}) {
            const std::string name = fmt("saturation s=%d L=%zu", s, L);
            report(5, name.c_str(), [&] {
                Outcome o{.limit_s = 30.0};
                const auto r = saturate(s, L);
                g_spectra.push_back(r.spectrum);
                const auto t = saturating_terms(r);
                const auto measured = count_zeros(FunctionOnGraph(r.spectrum, t)).total;
                const auto expected = (L - 1) * static_cast<std::size_t>(s);
                const auto b = theorem1_bounds(topology(*r.spectrum->graph), 1, L, L);
                o.pass = r.result.achieved && measured == expected && static_cast<long>(measured) == b.upper &&
                         r.genericity.generic;
                o.detail = fmt("eps=2^%d delta=%.3g N=%zu target (L-1)s=%zu upper=%ld generic=%d", int(std::log2(r.eps)),
                               r.delta, measured, expected, b.upper, int(r.genericity.generic));
                g_heat_cases.emplace_back(r.spectrum, t);
                return o;
            });
        }
    }

    for (int m = 2; m <= 4; ++m) {
        const std::string name = fmt("ladder b search m=%d", m);
        report(6, name.c_str(), [&] {
            Outcome o{.limit_s = 30.0};
            const auto r = ladder_find_b(m, std::nullopt, 1);
            const auto& sp = r.selection.spectrum;
            g_spectra.push_back(sp);
            const auto n2 = count_zeros(FunctionOnGraph(sp, {{2, 1.0}})).total;
            const auto n3 = count_zeros(FunctionOnGraph(sp, {{3, 1.0}})).total;
            const FunctionOnGraph F(sp, {{2, r.result.coefficients[0]}, {3, r.result.coefficients[1]}});
            const auto n = count_zeros(F).total;
            o.pass = n2 == static_cast<std::size_t>(m) && n3 == 2 && n == 1;
            o.detail = fmt("eps=2^%d N(f2)=%zu N(f3)=%zu b=%.6f N(f2+b f3)=%zu", int(std::log2(r.selection.eps)), n2,
                           n3, r.result.b, n);
            g_heat_cases.push_back(F);
            return o;
        });
    }

    report(7, "heat-flow audits", [] {
        Outcome o;
        std::size_t failed = 0;
        std::size_t events = 0;
        std::string first_issue;
        for (const auto& F : g_heat_cases) {
            HeatFlowOptions opt;
            opt.threads = 4;
            const auto tr = evolve(F, opt);
            const auto a = audit_trace(tr);
            events += tr.events.size();
            const auto n_low = count_zeros(FunctionOnGraph(F.spectrum_ptr(), {{F.terms().back().index, 1.0}})).total;
            const auto n_high = count_zeros(FunctionOnGraph(F.spectrum_ptr(), {{F.terms().front().index, 1.0}})).total;
            const bool ok = a.passed() && tr.n_low == n_low && tr.n_high == n_high && tr.low_converged &&
                            tr.high_converged && a.unknown_events == 0;
            if (!ok) {
                ++failed;
                if (first_issue.empty()) first_issue = a.issues.empty() ? "extreme counts" : a.issues.front();
            }
        }
        o.pass = failed == 0 && !g_heat_cases.empty();
        o.detail = fmt("%zu traces, %zu events, %zu failing audits%s%s", g_heat_cases.size(), events, failed,
                       first_issue.empty() ? "" : ": ", first_issue.c_str());
        return o;
    });

    report(8, "closed-form cross-check", [] {
        Outcome o;
        double worst_abs = 0.0;
        double worst_rel = 0.0;
        for (double eps : {0.25, 1.0 / 16}) {
            const auto star = spectrum(build_star(3, eps), 5);
            const auto ladder = spectrum(build_ladder(3, eps), 5);
            const auto os = fixtures::star_oracle(3, eps, 5);
            const auto ol = fixtures::ladder_oracle(3, eps, 5);
            for (std::size_t n = 0; n < 5; ++n) {
                for (auto [got, want] : {std::pair{star->pairs[n].lambda, os[n]}, {ladder->pairs[n].lambda, ol[n]}}) {
                    worst_abs = std::max(worst_abs, std::abs(got - want));
                    worst_rel = std::max(worst_rel, std::abs(got - want) / want);
                }
            }
        }
        o.pass = worst_abs <= 1e-8;
        o.detail = fmt("G(3,eps), I(3,eps), eps in {1/4, 1/16}: max abs err %.2e (<= 1e-8), rel %.2e", worst_abs,
                       worst_rel);
        return o;
    });

    report(9, "conservation and residuals", [] {
        Outcome o;
        // one graph with sampled potentials so the integrated bases are covered too
        auto g = build_ladder(3, 0.2);
        g.edges[0].potential = SampledPotential{{0.0, 0.1, 0.25, 0.4, 0.5}, {0.0, 4.0, -3.0, 2.0, 1.0}, {}, {}};
        g.edges[3].potential = ConstantPotential{-6.0};
        spectrum(g, 6);
        double wr = 0.0;
        double orth = 0.0;
        double cont = 0.0;
        double kirch = 0.0;
        double bnd = 0.0;
        std::size_t pairs = 0;
        for (const auto& s : g_spectra) {
            const auto& gr = *s->graph;
            for (std::size_t i = 0; i < s->size(); ++i) {
                const auto& f = s->pairs[i];
                ++pairs;
                for (const auto& b : *f.bases) wr = std::max(wr, b.wronskian_defect());
                const auto r = condition_residuals(gr, f);
                cont = std::max(cont, r.continuity);
                kirch = std::max(kirch, r.kirchhoff);
                bnd = std::max(bnd, r.boundary);
                for (std::size_t j = 0; j < i; ++j) orth = std::max(orth, std::abs(inner_product(gr, f, s->pairs[j])));
            }
        }
        const double res = std::max({cont, kirch, bnd});
        o.pass = wr <= 1e-8 && orth <= 1e-6 && res <= 1e-7;
        o.detail = fmt("%zu spectra, %zu pairs: wronskian %.1e, orthogonality %.1e, residual %.1e", g_spectra.size(),
                       pairs, wr, orth, res);
        return o;
    });

    report(10, "topology identity", [] {
        Outcome o;
        std::mt19937_64 gen(1010);
        std::size_t violations = 0;
        std::size_t invalid = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto g = fixtures::random_graph(gen, 2 + gen() % 12, gen() % 6);
            invalid += !validate(g).valid;
            // independent count straight from the edge list
            std::vector<long> deg(g.vertices.size(), 0);
            for (const auto& e : g.edges) {
                ++deg[e.from];
                ++deg[e.to];
            }
            long lhs = 0;
            long nb = 0;
            for (long d : deg) (d == 1 ? nb : lhs) += d == 1 ? 1 : d - 2;
            const long beta = static_cast<long>(g.edges.size()) - static_cast<long>(g.vertices.size()) + 1;
            const auto t = topology(g);
            violations += lhs != nb + 2 * beta - 2 || t.degree_sum_excess != lhs || t.excess_identity() != lhs;
        }
        o.pass = violations == 0 && invalid == 0;
        o.detail = fmt("1000 random connected graphs, %zu violations", violations);
        return o;
    });

    std::printf("%s: %d criteria failed\n", g_failures ? "FAILED" : "ALL PASSED", g_failures);
    return g_failures ? 1 : 0;
}
