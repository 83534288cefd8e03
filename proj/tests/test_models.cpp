#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "perfsmooth/models.hpp"
#include "test_support.hpp"

using namespace perfsmooth;
using namespace perfsmooth::testing;

namespace {

ObservationWindow binary_window(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    ObservationWindow y(n);
    for (auto& o : y) o.value = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return y;
}

}  // namespace

TEST(DegenerateRotation, SignalEmissionAndInvariant) {
    const auto rot = degenerate_rotation();
    const auto m = rot.model.signal.at({0});
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t z = 0; z < 4; ++z) {
            const bool hit = z == x || z == (x + 3) % 4;
            EXPECT_EQ(m(x, z), hit ? 0.5 : 0.0);
        }
    // Doubly stochastic, so uniform is invariant.
    for (std::size_t z = 0; z < 4; ++z) {
        double col = 0.0;
        for (std::size_t x = 0; x < 4; ++x) col += m(x, z);
        EXPECT_EQ(col, 1.0);
    }
    for (std::size_t x = 0; x < 4; ++x)
        for (double y : {0.0, 1.0, 0.5, 2.0}) {
            const double g = rot.model.emission->density({0}, x, Observation{y});
            EXPECT_TRUE(g == 0.0 || g == 1.0);
            EXPECT_EQ(g, y == double(x % 2) ? 1.0 : 0.0);
        }
    EXPECT_EQ(rot.spec.label_map.size(), 4u);
}

TEST(DegenerateAbsoluteProbs, ExtremesArePointMasses) {
    const auto y = binary_window(30, 4);
    for (double w : {0.0, 1.0}) {
        for (const auto& pi : degenerate_absolute_probs(w, y, 29)) {
            const auto& v = pi.values();
            EXPECT_EQ(std::count(v.begin(), v.end(), 1.0), 1);
            EXPECT_EQ(std::count(v.begin(), v.end(), 0.0), 3);
        }
    }
}

TEST(DegenerateAbsoluteProbs, SupportedOnParityClass) {
    const auto y = binary_window(30, 5);
    for (double w : {0.0, 0.3, 0.5, 1.0}) {
        const auto seq = degenerate_absolute_probs(w, y, 29);
        for (std::size_t d = 0; d < seq.size(); ++d)
            for (std::size_t x = 0; x < 4; ++x)
                if (double(x % 2) != y[d].value) EXPECT_EQ(seq[d][x], 0.0);
    }
}

TEST(DegenerateAbsoluteProbs, ZeroResidualAndDistinctMembers) {
    const auto rot = degenerate_rotation();
    const auto y = binary_window(41, 6);
    const auto seq = KernelSequence::window(conditional_kernels(rot.model, y, 40));
    for (double w : {0.0, 0.5, 1.0}) {
        const auto pis = degenerate_absolute_probs(w, y, 40);
        const auto chk = check_absolute_probabilities(seq, [&](TimeIndex n) { return pis[n.depth]; }, {0, 39});
        EXPECT_TRUE(chk.ok);
        EXPECT_EQ(chk.max_residual, 0.0);
    }
    const auto a = degenerate_absolute_probs(0.0, y, 40);
    const auto b = degenerate_absolute_probs(1.0, y, 40);
    EXPECT_GT(total_variation(a[0], b[0]), 0.5);
}

TEST(DegenerateAbsoluteProbs, RejectsBadWeight) {
    EXPECT_THROW(degenerate_absolute_probs(1.5, binary_window(3, 1), 2), std::invalid_argument);
}

TEST(ReducibleBlock, SignalAndInvariant) {
    const auto red = reducible_block();
    const auto m = red.model.signal.at({0});
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t z = 0; z < 4; ++z) EXPECT_EQ(m(x, z), x / 2 == z / 2 ? 0.5 : 0.0);
    const auto pushed = propagate(*red.model.invariant_dist, m);
    for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(pushed[x], x < 2 ? 0.5 : 0.0);
}

TEST(ReducibleBlock, RejectsNonPositiveEmissions) {
    EXPECT_THROW(reducible_block(std::make_shared<IndicatorEmission>(std::vector<int>{0, 1, 0, 1})),
                 std::invalid_argument);
    EXPECT_NO_THROW(reducible_block(std::make_shared<TabularEmission>(
        std::vector<std::vector<double>>{{0.5, 0.5}, {0.1, 0.9}, {0.3, 0.7}, {0.6, 0.4}})));
}

TEST(GaussianThreeState, SignalInvariantAndEmissions) {
    const double delta = 0.1;
    const auto g = gaussian_three_state(delta);
    const auto m = g.model.signal.at({0});
    const double expect[3][3] = {{1 - delta, delta, 0}, {delta / 2, 1 - delta, delta / 2}, {0, delta, 1 - delta}};
    for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t z = 0; z < 3; ++z) EXPECT_NEAR(m(x, z), expect[x][z], 1e-15);
    const auto pi = power_iteration(m.entries(), 3);
    EXPECT_NEAR(pi[0], 0.25, 1e-10);
    EXPECT_NEAR(pi[1], 0.5, 1e-10);
    EXPECT_NEAR(pi[2], 0.25, 1e-10);
    const auto& e = *g.model.emission;
    EXPECT_EQ(e.density({0}, 0, {0.0}), e.density({0}, 2, {0.0}));
    EXPECT_NE(e.density({0}, 0, {0.0}), e.density({0}, 1, {0.0}));
    EXPECT_NEAR(e.density({0}, 1, {1.0}), 1.0 / std::sqrt(2.0 * M_PI), 1e-15);
    EXPECT_EQ(g.spec.label_map, (std::vector<std::string>{"1", "2", "3"}));
}

TEST(GaussianThreeState, MinorizationNeedsTwoSteps) {
    const auto m = gaussian_three_state(0.1).model.signal.at({0});
    EXPECT_FALSE(find_minorization(m, 1).has_value());
    EXPECT_TRUE(find_minorization(m, 2).has_value());
}

TEST(GaussianThreeState, RejectsDeltaOutOfRange) {
    EXPECT_THROW(gaussian_three_state(0.0), std::invalid_argument);
    EXPECT_THROW(gaussian_three_state(1.0), std::invalid_argument);
}

TEST(Emissions, TabularValidation) {
    EXPECT_THROW(TabularEmission({{0.5, 0.6}}), std::invalid_argument);
    const TabularEmission t({{0.2, 0.8}, {1.0, 0.0}});
    EXPECT_FALSE(t.strictly_positive());
    EXPECT_EQ(t.density({0}, 0, {1.0}), 0.8);
    EXPECT_EQ(t.density({0}, 0, {2.0}), 0.0);
    EXPECT_EQ(t.density({0}, 0, {0.5}), 0.0);
}

TEST(SimulateHmm, StateMarginalsAreStationary) {
    const auto g = gaussian_three_state(0.1);
    const std::size_t paths = 10000, depth = 5;
    std::vector<std::vector<std::size_t>> at(depth + 1);
    RngStream root(8);
    double sum = 0.0, sumsq = 0.0;
    std::size_t in_two = 0;
    for (std::size_t p = 0; p < paths; ++p) {
        const auto path = simulate_hmm(g.model, depth, root.substream(p));
        ASSERT_EQ(path.states.size(), depth + 1);
        ASSERT_EQ(path.observations.size(), depth + 1);
        for (std::size_t d = 0; d <= depth; ++d) {
            at[d].push_back(path.states[d]);
            if (path.states[d] == 1) {
                sum += path.observations[d].value;
                sumsq += path.observations[d].value * path.observations[d].value;
                ++in_two;
            }
        }
    }
    for (std::size_t d = 0; d <= depth; ++d) EXPECT_LT(tv(empirical(at[d], 3), {0.25, 0.5, 0.25}), 0.02);
    const double mean = sum / double(in_two);
    const double se = std::sqrt((sumsq / double(in_two) - mean * mean) / double(in_two));
    EXPECT_NEAR(mean, 1.0, 3.0 * se);
}

TEST(SimulateHmm, DeterministicUnderSeed) {
    const auto g = gaussian_three_state(0.1);
    const auto a = simulate_hmm(g.model, 50, RngStream(3));
    const auto b = simulate_hmm(g.model, 50, RngStream(3));
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.observations, b.observations);
    EXPECT_EQ(a.seed, 3u);
}

TEST(SimulateHmm, NeedsSamplerAndInvariant) {
    struct NoSampler final : EmissionModel {
        double density(TimeIndex, State, Observation) const override { return 1.0; }
        bool strictly_positive() const override { return true; }
    };
    HmmModel bare(KernelSequence::homogeneous(StochasticMatrix::flat(2)), std::make_shared<NoSampler>(),
                  ProbVector::uniform(2));
    EXPECT_THROW(simulate_hmm(bare, 3, RngStream(1)), UnsupportedOperation);
    HmmModel no_pi(KernelSequence::homogeneous(StochasticMatrix::flat(2)), std::make_shared<NoSampler>());
    EXPECT_THROW(simulate_hmm(no_pi, 3, RngStream(1)), std::invalid_argument);
}

TEST(Generators, RandomWalkStartsAtZeroWithQuarterVarianceSteps) {
    auto obs = random_walk_obs(0.25, RngStream(10));
    const auto y = materialize(obs, 40001);
    EXPECT_EQ(y[0].value, 0.0);
    double s = 0.0, s2 = 0.0;
    for (std::size_t d = 1; d < y.size(); ++d) {
        const double inc = y[d].value - y[d - 1].value;
        s += inc;
        s2 += inc * inc;
    }
    const double n = double(y.size() - 1);
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(var, 0.25, 0.01);
}

TEST(Generators, DriftMeanFollowsSlope) {
    // Residuals after removing the slope should be centred with variance 0.25.
    auto obs = drift_obs(0.003, 0.25, RngStream(11));
    const auto y = materialize(obs, 20000);
    double s = 0.0, s2 = 0.0;
    for (std::size_t d = 0; d < y.size(); ++d) {
        const double r = y[d].value - 0.003 * -double(d);
        s += r;
        s2 += r * r;
    }
    const double n = double(y.size());
    EXPECT_NEAR(s / n, 0.0, 4.0 * 0.5 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 0.25, 0.01);
    EXPECT_LT(y[19999].value, -40.0);  // mean there is -59.997
}

TEST(Generators, StreamsAreCachedAndReproducible) {
    auto a = drift_obs(0.003, 0.25, RngStream(2));
    auto b = drift_obs(0.003, 0.25, RngStream(2));
    const double late = a.pull({30}).value;
    EXPECT_EQ(a.pull({30}).value, late);
    EXPECT_EQ(a.pulls_made(), 31u);
    EXPECT_EQ(materialize(b, 31), a.pulled());
}
