#include <cmath>

#include <gtest/gtest.h>

#include "qgraph/combolab.hpp"
#include "qgraph/heatflow.hpp"
#include "support.hpp"

using namespace qgraph;

namespace {

std::shared_ptr<const Spectrum> spectrum(const MetricGraph& g, std::size_t n) {
    return std::make_shared<const Spectrum>(scan_spectrum(g, n));
}

std::size_t count_kind(const HeatFlowTrace& tr, EventKind k) {
    std::size_t n = 0;
    for (const auto& e : tr.events) n += e.kind == k;
    return n;
}

}  // namespace

TEST(VertexBound, SingleTermNeverVanishes) {
    const auto s = spectrum(perturb_lengths(build_ladder(3, 0.125), 0.002, 1), 3);
    const auto b = vertex_crossing_bound(FunctionOnGraph(s, {{2, 1.0}}), 1, -5.0, 5.0);
    EXPECT_EQ(b.sign_changes, 0u);
    EXPECT_TRUE(b.zeros.empty());
}

TEST(VertexBound, TwoTermClosedForm) {
    const auto s = spectrum(perturb_lengths(build_ladder(3, 0.125), 0.002, 1), 3);
    const std::size_t v = 1;
    const double f2 = s->at(2).end_value({0, 1});
    const double f3 = s->at(3).end_value({0, 1});
    // choose signs so that a2 f2(v) > 0 > a3 f3(v)
    const double a2 = f2 > 0 ? 1.0 : -1.0;
    const double a3 = (f3 > 0 ? -1.0 : 1.0) * 3.0;
    const FunctionOnGraph F(s, {{2, a2}, {3, a3}});
    const auto b = vertex_crossing_bound(F, v, -1.0, 1.0);
    EXPECT_EQ(b.sign_changes, 1u);
    ASSERT_EQ(b.zeros.size(), 1u);
    const double y = std::log(-a3 * f3 / (a2 * f2)) / (s->at(3).lambda - s->at(2).lambda);
    EXPECT_NEAR(b.zeros[0], y, 1e-9 * std::max(1.0, std::abs(y)));
    EXPECT_TRUE(b.within_bound);
}

TEST(Evolve, IntervalTangentialSplit) {
    const auto s = spectrum(build_interval(1.0), 3);
    const double sign = s->at(1).derivative(0, 0.0) * s->at(3).derivative(0, 0.0) > 0 ? 1.0 : -1.0;
    const FunctionOnGraph F(s, {{1, 1.0}, {3, sign}});
    const auto tr = evolve(F);
    EXPECT_EQ(tr.n_low, 2u);
    EXPECT_EQ(tr.n_high, 0u);
    EXPECT_EQ(tr.n_zero, 1u);
    EXPECT_TRUE(tr.low_converged);
    EXPECT_TRUE(tr.high_converged);
    EXPECT_EQ(count_kind(tr, EventKind::E4), 2u);
    for (const auto& e : tr.events) EXPECT_LT(e.delta, 0);
    const auto a = audit_trace(tr);
    EXPECT_TRUE(a.passed()) << (a.issues.empty() ? "" : a.issues.front());
}

TEST(Evolve, FixedRangeAndCounts) {
    const auto s = spectrum(build_interval(1.0), 4);
    const FunctionOnGraph F(s, {{2, 1.0}, {4, 0.3}});
    HeatFlowOptions opt;
    opt.y_min = -0.1;
    opt.y_max = 0.1;
    const auto tr = evolve(F, opt);
    EXPECT_NEAR(tr.y_min(), -0.1, tr.dy);
    EXPECT_NEAR(tr.y_max(), 0.1, tr.dy);
    // between events the count is constant and equals the reported one
    for (const auto& sl : tr.slices) EXPECT_EQ(sl.report.total, sl.report.loci.size());
    EXPECT_TRUE(detect_events(tr).size() == tr.events.size());
}

TEST(Evolve, LadderCombinationE6MatchesVertexZero) {
    const auto run = ladder_find_b(3, std::nullopt, 1);
    const auto& c = run.result.coefficients;
    const FunctionOnGraph F(run.selection.spectrum, {{2, c[0]}, {3, c[1]}});
    HeatFlowOptions opt;
    opt.threads = 2;
    const auto tr = evolve(F, opt);
    const auto a = audit_trace(tr);
    EXPECT_TRUE(a.passed()) << (a.issues.empty() ? "" : a.issues.front());
    EXPECT_EQ(tr.n_low, 2u);
    EXPECT_EQ(tr.n_high, 3u);
    EXPECT_EQ(tr.n_zero, 1u);
    for (const auto& v : a.vertices) {
        EXPECT_LE(v.bound.zeros.size(), 1u);
        EXPECT_LE(v.e6_count, v.bound.zeros.size());
    }
    for (const auto& e : tr.events) {
        if (e.kind != EventKind::E6) continue;
        EXPECT_LE(e.delta, 2);  // deg - 2 at the degree-4 vertices
        const auto b = vertex_crossing_bound(F, *e.site.vertex, tr.y_min(), tr.y_max());
        bool matched = false;
        for (double z : b.zeros) matched |= std::abs(z - e.y) <= 1e-6 * std::max(std::abs(z), tr.y_scale);
        EXPECT_TRUE(matched) << e.y;
    }
}

TEST(Evolve, SaturatedStarAudit) {
    const auto run = saturate(3, 3);
    ASSERT_TRUE(run.result.achieved);
    std::vector<Term> t;
    for (std::size_t i = 0; i < run.result.coefficients.size(); ++i) t.push_back({i + 1, run.result.coefficients[i]});
    const auto tr = evolve(FunctionOnGraph(run.spectrum, t));
    const auto a = audit_trace(tr);
    EXPECT_TRUE(a.passed()) << (a.issues.empty() ? "" : a.issues.front());
    EXPECT_EQ(tr.n_zero, 6u);
    EXPECT_EQ(tr.n_high, 0u);
    EXPECT_EQ(a.e1e2_events, 0u);
    for (const auto& v : a.vertices) EXPECT_LE(v.e6_count, 2u);
}

TEST(Evolve, WideFixedRangeKeepsDominantTerm) {
    const auto s = spectrum(build_interval(1.0), 2);
    HeatFlowOptions opt;
    opt.y_min = -20.0;
    opt.y_max = 20.0;
    const auto tr = evolve(FunctionOnGraph(s, {{1, 1.0}, {2, 0.5}}), opt);
    EXPECT_EQ(tr.slices.front().report.total, 1u);
    EXPECT_EQ(tr.slices.back().report.total, 0u);
}
