#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "uss/harness.hpp"
#include "uss/policies.hpp"

namespace uss {
namespace {

FeedbackRound feedback(std::vector<std::uint8_t> bits) { return FeedbackRound{std::nullopt, std::move(bits)}; }

TEST(TsSelect, SingleArm) {
    DisagreementStats s(1);
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        const auto d = ts_select(s, std::vector<double>{0.3}, rng);
        EXPECT_EQ(d.arm, 0u);
        EXPECT_EQ(d.walk, std::vector<std::size_t>{0});
    }
}

TEST(TsSelect, ZeroCostGapsGoToLastArm) {
    DisagreementStats s(3);
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        const auto d = ts_select(s, std::vector<double>{0.0, 0.0, 0.0}, rng);
        EXPECT_EQ(d.arm, 2u);
        EXPECT_EQ(d.walk, (std::vector<std::size_t>{0, 1, 2}));
    }
}

TEST(TsSelect, HugeCostGapsStopAtFirstArm) {
    DisagreementStats s(3);
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const auto d = ts_select(s, std::vector<double>{0.0, 1.5, 2.5}, rng);
        EXPECT_EQ(d.arm, 0u);
        EXPECT_EQ(d.walk, std::vector<std::size_t>{0});
        // Samples drawn only for the examined arm.
        EXPECT_FALSE(std::isnan(d.samples(0, 1)));
        EXPECT_FALSE(std::isnan(d.samples(0, 2)));
        EXPECT_TRUE(std::isnan(d.samples(1, 2)));
    }
}

TEST(TsSelect, DecisionMatchesRecordedSamples) {
    DisagreementStats s(4);
    s.S(0, 1) = 5;
    s.F(1, 3) = 9;
    const std::vector<double> c{0.0, 0.2, 0.35, 0.6};
    Rng a(11), b(11);
    for (int t = 0; t < 2000; ++t) {
        const auto d = ts_select(s, c, a);
        EXPECT_EQ(ts_select_arm(s, c, b), d.arm);
        // The stopping arm passes the test with its own samples; every
        // earlier arm on the walk fails it.
        for (std::size_t i : d.walk) {
            bool pass = true;
            for (std::size_t j = i + 1; j < 4; ++j) pass = pass && c[j] - c[i] > d.samples(i, j);
            EXPECT_EQ(pass || i == 3, i == d.arm);
        }
        EXPECT_EQ(d.walk.back(), d.arm);
    }
}

TEST(TsUpdate, Examples) {
    DisagreementStats s(3);
    ts_update(s, 1, feedback({0, 1}));
    EXPECT_EQ(s.S(0, 1), 2u);
    EXPECT_EQ(s.F(0, 1), 1u);
    EXPECT_EQ(s.t, 1u);

    DisagreementStats one(3);
    ts_update(one, 0, feedback({1}));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            EXPECT_EQ(one.S(i, j), 1u);
            EXPECT_EQ(one.F(i, j), 1u);
        }
    }

    DisagreementStats three(3);
    ts_update(three, 2, feedback({0, 0, 1}));
    EXPECT_EQ(three.F(0, 1), 2u);
    EXPECT_EQ(three.S(0, 1), 1u);
    EXPECT_EQ(three.S(0, 2), 2u);
    EXPECT_EQ(three.S(1, 2), 2u);
    EXPECT_EQ(three.F(0, 2), 1u);
    EXPECT_EQ(three.F(1, 2), 1u);

    EXPECT_THROW(ts_update(s, 3, feedback({0, 0, 0})), std::out_of_range);
    EXPECT_THROW(ts_update(s, 2, feedback({0, 0})), std::invalid_argument);
}

TEST(TsUpdate, CounterConservationAndCensoring) {
    std::mt19937_64 gen(6);
    for (int ep = 0; ep < 20; ++ep) {
        const std::size_t k = 2 + ep % 4;
        DisagreementStats s(k);
        std::vector<std::uint64_t> reached(k, 0);  // rounds with I_s >= j
        for (int t = 0; t < 500; ++t) {
            const std::size_t arm = gen() % k;
            std::vector<std::uint8_t> bits(arm + 1);
            for (auto& b : bits) b = gen() & 1;
            const auto before = s;
            ts_update(s, arm, feedback(bits));
            for (std::size_t j = 0; j <= arm; ++j) ++reached[j];
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = i + 1; j < k; ++j) {
                    if (j > arm) {
                        EXPECT_EQ(s.S(i, j), before.S(i, j));
                        EXPECT_EQ(s.F(i, j), before.F(i, j));
                    }
                    ASSERT_GE(s.S(i, j), 1u);
                    ASSERT_GE(s.F(i, j), 1u);
                    ASSERT_EQ(s.S(i, j) + s.F(i, j) - 2, reached[j]);
                }
            }
        }
    }
}

TEST(UcbSelect, FirstRoundNeedsCostGapAboveOne) {
    UcbState s(3);
    EXPECT_EQ(ucb_select(s, std::vector<double>{0.0, 0.5, 0.9}, 0.5).arm, 2u);
    EXPECT_EQ(ucb_select(s, std::vector<double>{0.0, 1.5, 2.0}, 0.5).arm, 0u);
}

TEST(UcbSelect, ConvergesToCandidateSetWithManyObservations) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 200; ++n) {
        const std::size_t k = 2 + n % 4;
        const auto q = test::random_table(k, gen);
        const auto p = disagreement_matrix(q);
        std::vector<double> c(k);
        double running = 0.0;
        for (auto& x : c) x = running += 0.5 * u(gen);
        // Skip instances sitting within the residual width of a boundary.
        bool near_boundary = false;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) near_boundary |= std::abs(c[j] - c[i] - p(i, j)) < 1e-3;
        }
        if (near_boundary) continue;
        UcbState s(k);
        const std::uint64_t big = std::uint64_t{1} << 40;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                s.observed(i, j) = big;
                s.disagreements(i, j) = static_cast<std::uint64_t>(std::llround(p(i, j) * static_cast<double>(big)));
            }
        }
        s.t = 1000;
        EXPECT_EQ(ucb_select(s, c, 0.5).arm, candidate_set(p, c).selected);
    }
}

TEST(UcbSelect, DeterministicGivenHistory) {
    const auto inst = test::bsc_analogue(1);
    const RegretModel model(true_properties(inst));
    Policy a = make_policy(PolicySpec::ucb(0.5), inst.cumulative_costs);
    Policy b = make_policy(PolicySpec::ucb(0.5), inst.cumulative_costs);
    const auto ea = run_episode(inst, model, a, 2000, 5, 0);
    const auto eb = run_episode(inst, model, b, 2000, 5, 0);
    EXPECT_EQ(ea.arms, eb.arms);
}

TEST(FixedArm, RangeChecked) {
    EXPECT_THROW(FixedArmPolicy(3, 3), std::out_of_range);
    FixedArmPolicy p(1, 3);
    Rng rng(0);
    EXPECT_EQ(p.select(rng), 1u);
}

TEST(Preferences, Examples) {
    Matrix samples(2);
    samples(0, 1) = 0.3;
    auto rel = preferences(samples, std::vector<double>{0.0, 0.5});
    EXPECT_EQ(rel(0, 1), 1);
    EXPECT_EQ(rel(1, 0), 0);

    samples(0, 1) = 0.5;
    rel = preferences(samples, std::vector<double>{0.0, 0.5});
    EXPECT_EQ(rel(1, 0), 1);
    EXPECT_EQ(rel(0, 1), 0);
}

TEST(Preferences, AlwaysATournament) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 200; ++n) {
        const std::size_t k = 2 + n % 5;
        Matrix s(k);
        std::vector<double> c(k);
        double running = 0.0;
        for (auto& x : c) x = running += 0.3 * u(gen);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) s(i, j) = u(gen);
        }
        const auto rel = preferences(s, c);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(rel(i, i), 0);
            for (std::size_t j = i + 1; j < k; ++j) EXPECT_EQ(rel(i, j) + rel(j, i), 1);
        }
    }
}

TEST(Transitivity, Examples) {
    Matrix two(2);
    two(0, 1) = 0.4;
    EXPECT_TRUE(transitivity_violations(preferences(two, std::vector<double>{0.0, 0.3})).empty());

    // Total order 0 > 1 > 2 > 3.
    SquareMatrix<std::uint8_t> order(4, 0);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) order(i, j) = 1;
    }
    EXPECT_TRUE(transitivity_violations(order).empty());
}

TEST(Transitivity, CraftedCycle) {
    // C = (0, 0.2, 0.4). Arm 1 beats 2 (0.1 < 0.2), arm 2 beats 3
    // (0.1 < 0.2), but arm 3 beats 1 (0.5 >= 0.4).
    Matrix s(3);
    s(0, 1) = 0.1;
    s(1, 2) = 0.1;
    s(0, 2) = 0.5;
    const auto rel = preferences(s, std::vector<double>{0.0, 0.2, 0.4});
    auto got = transitivity_violations(rel);
    // Brute force over all ordered triples.
    std::vector<Triple> expected;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            for (std::size_t c = 0; c < 3; ++c) {
                if (a != b && b != c && a != c && rel(a, b) && rel(b, c) && !rel(a, c)) expected.push_back({a, b, c});
            }
        }
    }
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(got, expected);
    // The 3-cycle yields one violation per rotation.
    EXPECT_EQ(got, (std::vector<Triple>{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}));
}

TEST(Thompson, ModalDecisionIsOptimalOnWdAnalogues) {
    for (std::size_t idx = 0; idx < 4; ++idx) {
        const auto inst = test::bsc_analogue(idx);
        const auto truth = true_properties(inst);
        ASSERT_TRUE(truth.wd);
        const RegretModel model(truth);
        std::uint64_t hits = 0, total = 0;
        for (std::uint64_t r = 0; r < 10; ++r) {
            Policy p = make_policy(PolicySpec::thompson(), inst.cumulative_costs);
            const auto ep = run_episode(inst, model, p, 10000, 77, r);
            for (std::size_t t = 9000; t < 10000; ++t) {
                hits += ep.arms[t] == truth.i_star;
                ++total;
            }
        }
        EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.95) << "analogue " << idx + 1;
    }
}

}  // namespace
}  // namespace uss
