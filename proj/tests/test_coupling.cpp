#include <gtest/gtest.h>

#include <cmath>

#include "perfsmooth/coupling.hpp"
#include "test_support.hpp"

using namespace perfsmooth;
using perfsmooth::testing::empirical;
using perfsmooth::testing::random_kernel;
using perfsmooth::testing::tv;

namespace {

KernelSequence random_sequence(std::size_t s, std::uint64_t seed, std::size_t len) {
    RngStream rng(seed);
    std::vector<StochasticMatrix> ks;
    for (std::size_t i = 0; i < len; ++i) ks.push_back(random_kernel(s, rng));
    return KernelSequence::window(std::move(ks));
}

}  // namespace

TEST(RandomMap, PermutationKernelIsDeterministic) {
    const StochasticMatrix perm({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
    RngStream rng(3);
    for (int t = 0; t < 50; ++t) {
        EXPECT_EQ(sample_random_map(perm, rng).image, (std::vector<State>{2, 0, 1}));
    }
}

TEST(RandomMap, ConsumesOneUniformPerState) {
    const auto k = StochasticMatrix::flat(4);
    RngStream a(99), b(99);
    sample_random_map(k, a);
    for (int i = 0; i < 4; ++i) b.uniform();
    EXPECT_EQ(a.next_word(), b.next_word());
}

TEST(RandomMap, FlatKernelMarginalAndJointLaws) {
    const auto k = StochasticMatrix::flat(2);
    RngStream rng(5);
    std::vector<std::size_t> first, pair;
    for (int t = 0; t < 100000; ++t) {
        const auto m = sample_random_map(k, rng);
        first.push_back(m.image[0]);
        pair.push_back(m.image[0] * 2 + m.image[1]);
    }
    EXPECT_LT(tv(empirical(first, 2), {0.5, 0.5}), 0.01);
    EXPECT_LT(tv(empirical(pair, 4), {0.25, 0.25, 0.25, 0.25}), 0.02);
}

TEST(Compose, Examples) {
    const RandomMap newer{{1, 0}};
    EXPECT_EQ(compose(newer, ComposedMap::identity(2)).image, newer.image);
    const ComposedMap existing{{0, 0}, 3};
    const auto c = compose(newer, existing);
    EXPECT_EQ(c.image, (std::vector<State>{0, 0}));
    EXPECT_EQ(c.span, 4u);
    EXPECT_THROW(compose(RandomMap{{0, 1, 2}}, existing), DimensionMismatch);
}

TEST(Compose, CoalescenceIsAbsorbing) {
    RngStream rng(8);
    const auto k = random_kernel(4, rng);
    ComposedMap m{{2, 2, 2, 2}, 1};
    for (int t = 0; t < 100; ++t) {
        m = compose(sample_random_map(k, rng), m);
        ASSERT_TRUE(is_coalesced(m));
        ASSERT_EQ(m.image[0], 2u);
    }
}

TEST(Compose, ImageNeverGrows) {
    RngStream rng(9);
    const auto k = random_kernel(5, rng, 0.3);
    ComposedMap m = ComposedMap::identity(5);
    auto card = [](const ComposedMap& c) {
        std::vector<bool> seen(c.image.size());
        std::size_t n = 0;
        for (auto v : c.image) n += !seen[v], seen[v] = true;
        return n;
    };
    std::size_t prev = 5;
    for (int t = 0; t < 50; ++t) {
        m = compose(sample_random_map(k, rng), m);
        ASSERT_LE(card(m), prev);
        prev = card(m);
    }
}

TEST(IsCoalesced, Examples) {
    EXPECT_TRUE(is_coalesced(ComposedMap{{1, 1, 1}, 1}));
    EXPECT_FALSE(is_coalesced(ComposedMap::identity(2)));
    EXPECT_TRUE(is_coalesced(ComposedMap{{1, 1}, 1}));
}

TEST(Cftp, FlatKernelIsUniformWithHalfCoalescingAtOnce) {
    auto seq = KernelSequence::homogeneous(StochasticMatrix::flat(2));
    RngStream root(1);
    std::vector<std::size_t> samples;
    std::size_t depth_one = 0;
    const int runs = 40000;
    for (int r = 0; r < runs; ++r) {
        RngStream rng = root.substream(r);
        const auto out = std::get<Coalesced>(cftp(seq, {0}, rng, 1000));
        samples.push_back(out.sample);
        depth_one += out.coalescence_depth == 1;
        ASSERT_EQ(out.steps_used, out.coalescence_depth);
    }
    EXPECT_LT(tv(empirical(samples, 2), {0.5, 0.5}), 0.015);
    EXPECT_NEAR(static_cast<double>(depth_one) / runs, 0.5, 0.015);
}

TEST(Cftp, IdentityKernelNeverCoalesces) {
    auto seq = KernelSequence::homogeneous(StochasticMatrix::identity(3));
    RngStream rng(2);
    for (std::size_t cutoff : {1u, 10u, 1000u}) {
        const auto out = cftp(seq, {0}, rng, cutoff);
        ASSERT_TRUE(std::holds_alternative<CutoffExceeded>(out));
        EXPECT_EQ(std::get<CutoffExceeded>(out).cutoff, cutoff);
    }
    EXPECT_THROW(cftp(seq, {0}, rng, 0), std::invalid_argument);
}

TEST(Cftp, TwoStateChainHitsStationaryLaw) {
    // pi M = pi for [[0.9,0.1],[0.2,0.8]] gives pi = (2/3, 1/3).
    auto seq = KernelSequence::homogeneous(StochasticMatrix({{0.9, 0.1}, {0.2, 0.8}}));
    RngStream root(3);
    std::vector<std::size_t> samples;
    for (int r = 0; r < 50000; ++r) {
        RngStream rng = root.substream(r);
        samples.push_back(std::get<Coalesced>(cftp(seq, {0}, rng, 100000)).sample);
    }
    EXPECT_LT(tv(empirical(samples, 2), {2.0 / 3.0, 1.0 / 3.0}), 0.01);
}

TEST(Cftp, DeterministicUnderSeed) {
    auto seq = random_sequence(3, 4, 200);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream a(seed), b(seed);
        const auto oa = cftp(seq, {3}, a, 150);
        const auto ob = cftp(seq, {3}, b, 150);
        ASSERT_EQ(oa.index(), ob.index());
        if (const auto* ca = std::get_if<Coalesced>(&oa)) {
            const auto& cb = std::get<Coalesced>(ob);
            EXPECT_EQ(ca->sample, cb.sample);
            EXPECT_EQ(ca->coalescence_depth, cb.coalescence_depth);
        }
    }
}

TEST(ComposedMaps, MarginalsMatchBackwardProducts) {
    const auto seq = random_sequence(3, 12, 6);
    const TimeIndex n{5}, k{1};
    const auto product = backward_product(seq, n, k);
    RngStream rng(77);
    std::vector<std::vector<std::size_t>> hits(3);
    for (int r = 0; r < 100000; ++r) {
        ComposedMap m = ComposedMap::identity(3);
        for (std::size_t d = k.depth; d < n.depth; ++d) m = compose(sample_random_map(seq.at({d}), rng), m);
        for (std::size_t x = 0; x < 3; ++x) hits[x].push_back(m.image[x]);
    }
    for (std::size_t x = 0; x < 3; ++x) {
        auto row = product.row(x);
        EXPECT_LT(tv(empirical(hits[x], 3), {row.begin(), row.end()}), 0.01) << "row " << x;
    }
}

TEST(ExactOracle, FlatKernelClosedForm) {
    const auto cdf =
        exact_coalescence_cdf(KernelSequence::homogeneous(StochasticMatrix::flat(2)), {0}, 12);
    for (std::size_t j = 1; j <= 12; ++j) EXPECT_NEAR(cdf[j - 1], 1.0 - std::pow(2.0, -double(j)), 1e-14);
}

TEST(ExactOracle, IdentityKernelNeverCoalesces) {
    const auto cdf =
        exact_coalescence_cdf(KernelSequence::homogeneous(StochasticMatrix::identity(3)), {0}, 8);
    for (double v : cdf) EXPECT_EQ(v, 0.0);
}

TEST(ExactOracle, RejectsLargeStateSpaces) {
    EXPECT_THROW(exact_coalescence_cdf(KernelSequence::homogeneous(StochasticMatrix::flat(6)), {0}, 1),
                 std::invalid_argument);
}

TEST(ExactOracle, SubmultiplicativeInequality) {
    // Q(T_n < k') <= Q(T_n < k) Q(T_k < k') for k' < k < n.
    const auto seq = random_sequence(3, 21, 40);
    const std::size_t horizon = 12;
    std::vector<std::vector<double>> cdf;
    for (std::size_t d = 0; d <= horizon; ++d) cdf.push_back(exact_coalescence_cdf(seq, {d}, horizon));
    auto miss = [&](std::size_t target, std::size_t until) {  // Q(T_target < -until)
        return 1.0 - cdf[target][until - target - 1];
    };
    for (std::size_t n = 0; n < horizon; ++n)
        for (std::size_t k = n + 1; k < horizon; ++k)
            for (std::size_t kp = k + 1; kp <= horizon && kp - n <= horizon; ++kp) {
                ASSERT_LE(miss(n, kp), miss(n, k) * miss(k, kp) + 1e-10);
            }
}

TEST(ExactOracle, LowerBoundFromCommonColumn) {
    // If min_x M_{n,k}(x, x*) >= eps then Q(T_k >= n) >= eps^s.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t s = 2 + seed % 3;
        const auto seq = random_sequence(s, 300 + seed, 10);
        for (std::size_t span = 1; span <= 4; ++span) {
            const auto p = backward_product(seq, {span}, {0});
            double eps = 0.0;
            for (std::size_t z = 0; z < s; ++z) {
                double col = 1.0;
                for (std::size_t x = 0; x < s; ++x) col = std::min(col, p(x, z));
                eps = std::max(eps, col);
            }
            const auto cdf = exact_coalescence_cdf(seq, {0}, span);
            EXPECT_GE(cdf[span - 1] + 1e-12, std::pow(eps, double(s)));
        }
    }
}

TEST(ExactOracle, AgreesWithEmpiricalCoalescenceTimes) {
    for (std::size_t s : {2u, 3u}) {
        auto seq = random_sequence(s, 40 + s, 60);
        const auto cdf = exact_coalescence_cdf(seq, {0}, 15);
        RngStream root(s);
        const int runs = 20000;
        std::vector<double> hits(15, 0.0);
        for (int r = 0; r < runs; ++r) {
            RngStream rng = root.substream(r);
            const auto out = cftp(seq, {0}, rng, 60);
            if (const auto* c = std::get_if<Coalesced>(&out)) {
                for (std::size_t j = c->coalescence_depth; j <= 15; ++j) hits[j - 1] += 1.0;
            }
        }
        for (std::size_t j = 0; j < 15; ++j) EXPECT_NEAR(hits[j] / runs, cdf[j], 0.015) << "depth " << j + 1;
    }
}
