#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qgraph/nodal.hpp"
#include "support.hpp"

using namespace qgraph;

namespace {

std::shared_ptr<const Spectrum> spectrum(const MetricGraph& g, std::size_t n) {
    return std::make_shared<const Spectrum>(scan_spectrum(g, n));
}

// Eigenfunctions on the interval share the sign convention f'(0) > 0.
std::vector<Term> aligned(const Spectrum& s, std::vector<Term> terms) {
    for (auto& t : terms) {
        if (s.at(t.index).derivative(0, 0.0) < 0) t.coeff = -t.coeff;
    }
    return terms;
}

}  // namespace

TEST(Combo, Parse) {
    const auto t = parse_combo("2:1,5:0.7");
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[1].index, 5u);
    EXPECT_DOUBLE_EQ(t[1].coeff, 0.7);
    EXPECT_THROW(parse_combo("2"), InvalidArgument);
    EXPECT_THROW(parse_combo("0:1"), InvalidArgument);
    EXPECT_THROW(parse_combo("1:x"), InvalidArgument);
    EXPECT_THROW(parse_combo(""), InvalidArgument);
}

TEST(Combo, Invariants) {
    const auto s = spectrum(build_interval(1.0), 3);
    EXPECT_THROW(FunctionOnGraph(s, {{2, 1.0}, {1, 1.0}}), InvalidArgument);
    EXPECT_THROW(FunctionOnGraph(s, {{1, 0.0}}), InvalidArgument);
    EXPECT_THROW(FunctionOnGraph(s, {{4, 1.0}}), InvalidArgument);
}

TEST(Evaluate, IntervalValues) {
    const auto s = spectrum(build_interval(1.0), 3);
    const FunctionOnGraph f1(s, aligned(*s, {{1, 1.0}}));
    EXPECT_NEAR(f1.evaluate(0, 0.5), std::sqrt(2.0), 1e-10);
    const FunctionOnGraph f13(s, aligned(*s, {{1, 1.0}, {3, 1.0}}));
    EXPECT_NEAR(f13.evaluate(0, 0.5), 0.0, 1e-10);
}

TEST(Evaluate, LadderInnerVertexNonZero) {
    const auto g = perturb_lengths(build_ladder(3, 0.125), 0.002, 1);
    const auto s = spectrum(g, 3);
    const FunctionOnGraph f2(s, {{2, 1.0}});
    EXPECT_GT(std::abs(f2.vertex_value(1)), 1e-3);
    EXPECT_GT(std::abs(f2.vertex_value(2)), 1e-3);
}

TEST(CountZeros, IntervalEigenfunctions) {
    const auto s = spectrum(build_interval(1.0), 10);
    for (std::size_t n = 1; n <= 10; ++n) {
        const auto r = count_zeros(FunctionOnGraph(s, {{n, 1.0}}));
        EXPECT_EQ(r.total, n - 1);
        EXPECT_FALSE(r.tangential_present);
        for (std::size_t i = 0; i < r.loci.size(); ++i) {
            EXPECT_NEAR(r.loci[i].x, static_cast<double>(i + 1) / static_cast<double>(n), 1e-9);
        }
    }
}

TEST(CountZeros, TangentialZero) {
    const auto s = spectrum(build_interval(1.0), 3);
    const FunctionOnGraph F(s, aligned(*s, {{1, 1.0}, {3, 1.0}}));
    const auto r = count_zeros(F);
    ASSERT_EQ(r.total, 1u);
    EXPECT_EQ(r.loci[0].kind, ZeroKind::tangential);
    EXPECT_NEAR(r.loci[0].x, 0.5, 1e-6);
    EXPECT_TRUE(r.tangential_present);
    // the sign-change oracle cannot see it
    EXPECT_EQ(brute_force_count(F, 2000), 0u);
}

TEST(CountZeros, PositiveCombination) {
    const auto s = spectrum(build_interval(1.0), 2);
    EXPECT_EQ(count_zeros(FunctionOnGraph(s, aligned(*s, {{1, 1.0}, {2, 0.5}}))).total, 0u);
}

TEST(CountZeros, ScaleInvariant) {
    const auto s = spectrum(perturb_lengths(build_star(3, 0.125), 0.002, 1), 5);
    const std::vector<Term> t{{2, 1.0}, {4, -0.6}, {5, 0.3}};
    const auto n = count_zeros(FunctionOnGraph(s, t)).total;
    for (double c : {-1.0, 1e-6, 3e5}) {
        auto scaled = t;
        for (auto& x : scaled) x.coeff *= c;
        EXPECT_EQ(count_zeros(FunctionOnGraph(s, scaled)).total, n) << c;
    }
}

TEST(CountZeros, VertexZeroCountedOnce) {
    // an interval of length 2 with a degree-2 vertex in the middle, where f2 vanishes
    const auto g = build_star(1, 1.0);
    const auto s = spectrum(g, 2);
    const auto r = count_zeros(FunctionOnGraph(s, {{2, 1.0}}));
    ASSERT_EQ(r.total, 1u);
    EXPECT_TRUE(r.loci[0].at_vertex());
    EXPECT_TRUE(r.vertex_zero_present);
}

TEST(CountZeros, TreesMatchInterval) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = fixtures::random_tree(gen, 2 + trial % 6);
        const auto s = spectrum(g, 8);
        if (!genericity_check(*s, 7).generic) continue;
        for (std::size_t k = 1; k <= 7; ++k) EXPECT_EQ(count_zeros(FunctionOnGraph(s, {{k, 1.0}})).total, k - 1);
    }
}

TEST(CountZeros, AgreesWithBruteForce) {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    int compared = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = fixtures::random_graph(gen, 3 + trial % 4, trial % 3);
        const auto s = spectrum(g, 6);
        std::vector<Term> t;
        for (std::size_t k = 1 + trial % 2; k <= 6; k += 2) t.push_back({k, coeff(gen)});
        const FunctionOnGraph F(s, t);
        const auto r = count_zeros(F);
        if (r.tangential_present || r.vertex_zero_present) continue;
        EXPECT_EQ(r.total, brute_force_count(F, 4000)) << trial;
        ++compared;
    }
    EXPECT_GT(compared, 20);
}

TEST(CountZeros, SingleEigenfunctionBoundsOnGenericGraphs) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = fixtures::random_graph(gen, 4, 1 + trial % 3);
        const auto s = spectrum(g, 8);
        if (!genericity_check(*s, 7).generic) continue;
        const long beta = topology(g).beta;
        for (std::size_t k = 1; k <= 7; ++k) {
            const long n = static_cast<long>(count_zeros(FunctionOnGraph(s, {{k, 1.0}})).total);
            EXPECT_GE(n, static_cast<long>(k) - 1);
            EXPECT_LE(n, static_cast<long>(k) - 1 + beta);
        }
    }
}
