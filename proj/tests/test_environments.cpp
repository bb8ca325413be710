#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "uss/environments.hpp"

namespace uss {
namespace {

std::string tmp_path(const std::string& name) {
    std::filesystem::create_directories(USS_TEST_TMP);
    return (std::filesystem::path(USS_TEST_TMP) / name).string();
}

OutcomeBits pack(const FeedbackRound& r) {
    OutcomeBits o = r.label.value_or(false) ? 1u : 0u;
    for (std::size_t a = 0; a < r.feedback.size(); ++a) {
        if (r.feedback[a]) o |= OutcomeBits{1} << (a + 1);
    }
    return o;
}

TEST(SampleRound, DeterministicTable) {
    const auto q = JointTable::from_entries(2, std::vector<std::pair<OutcomeBits, double>>{{0b111u, 1.0}});
    const UssInstance inst("det", q, {0.0, 0.1});
    Environment env(inst);
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto r = env.sample(rng);
        EXPECT_EQ(r.label, std::optional<bool>(true));
        EXPECT_EQ(r.feedback, (std::vector<std::uint8_t>{1, 1}));
    }
}

TEST(SampleRound, UniformTableFrequencies) {
    const UssInstance inst("uniform", JointTable(2, std::vector<double>(8, 0.125)), {0.0, 0.1});
    Environment env(inst);
    Rng rng(99);
    std::vector<int> counts(8, 0);
    FeedbackRound r;
    const int n = 1000000;
    for (int t = 0; t < n; ++t) {
        env.sample(rng, r);
        ++counts[pack(r)];
    }
    for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 0.125, 0.002);
}

TEST(SampleRound, TraceWrapsRoundRobin) {
    auto data = std::make_shared<TraceData>();
    data->arms = 2;
    for (int i = 0; i < 3; ++i) {
        data->rows.push_back(FeedbackRound{i % 2 == 0, {static_cast<std::uint8_t>(i & 1), static_cast<std::uint8_t>((i >> 1) & 1)}});
    }
    const UssInstance inst("trace", TraceRef{"mem", data}, {0.0, 0.1});
    Environment env(inst);
    Rng rng(0);
    std::vector<FeedbackRound> seen;
    for (int t = 0; t < 9; ++t) seen.push_back(env.sample(rng));
    EXPECT_EQ(seen[3], data->rows[0]);
    for (std::size_t t = 0; t + 3 < seen.size(); ++t) EXPECT_EQ(seen[t], seen[t + 3]);

    Environment once(inst, /*wrap=*/false);
    for (int t = 0; t < 3; ++t) once.sample(rng);
    EXPECT_THROW(once.sample(rng), std::out_of_range);
}

TEST(SampleRound, SameSeedSameStream) {
    const auto inst = test::bsc_analogue(0);
    Environment a(inst), b(inst);
    Rng ra(42), rb(42);
    for (int t = 0; t < 1000; ++t) EXPECT_EQ(a.sample(ra), b.sample(rb));
}

TEST(Rng, KnownFirstOutputs) {
    // std::mt19937_64's 10000th output for the default seed is fixed by the
    // standard; our uniform() is derived from raw output only.
    std::mt19937_64 ref;
    ref.discard(9999);
    EXPECT_EQ(ref(), 9981545732273789042ULL);
    Rng a(5489);
    std::mt19937_64 b(5489);
    EXPECT_EQ(a.uniform(), static_cast<double>(b() >> 11) * 0x1.0p-53);
}

TEST(Rng, BetaMoments) {
    Rng rng(7);
    const double a = 3.0, b = 5.0;
    double s = 0.0, ss = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.beta(a, b);
        ASSERT_GT(x, 0.0);
        ASSERT_LT(x, 1.0);
        s += x;
        ss += x * x;
    }
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    EXPECT_NEAR(mean, a / (a + b), 0.002);
    EXPECT_NEAR(var, a * b / ((a + b) * (a + b) * (a + b + 1)), 0.0005);
    // Shape below one goes through the boost path.
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) s2 += rng.beta(0.5, 0.5);
    EXPECT_NEAR(s2 / n, 0.5, 0.005);
}

TEST(BscGenerator, ExactTableMatchesEnumerationOracle) {
    const auto q = to_joint_table(test::reference_bsc());
    double total = 0.0;
    for (double p : q.probs()) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    const auto g = error_rates(q);
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(g[a], test::kReferenceBscGamma[a], 1e-12);
    const auto p = disagreement_matrix(q);
    EXPECT_NEAR(p(0, 1), test::kReferenceBscP12, 1e-12);
    EXPECT_NEAR(p(0, 2), test::kReferenceBscP13, 1e-12);
    EXPECT_NEAR(p(1, 2), test::kReferenceBscP23, 1e-12);
    // Enumeration oracle: 14 outcomes carry mass, e.g. P(y=1, 1, 1, 1) = 0.3402.
    int positive = 0;
    for (double x : q.probs()) positive += x > 0.0;
    EXPECT_EQ(positive, 14);
    EXPECT_NEAR(q.prob(0b1111u), 0.3402, 1e-12);
}

TEST(BscGenerator, NoCorrelationErrorIsStronglyDominant) {
    auto gen = test::reference_bsc();
    gen.corr_error = 0.0;
    EXPECT_TRUE(check_sd(to_joint_table(gen)));
    for (double m : {0.1, 0.5, 0.9}) {
        BscGenerator g{0.3, {m, 0.2, 0.7, 0.4}, 0.0, 0};
        EXPECT_TRUE(check_sd(to_joint_table(g)));
    }
}

TEST(BscGenerator, PerfectArmsHaveNoError) {
    BscGenerator gen{0.7, {1.0, 1.0, 1.0}, 0.0, 0};
    const UssInstance inst = make_bsc_instance(gen, {0.0, 0.1, 0.2});
    const auto est = empirical_properties(inst, 10000, 3);
    for (double g : est.gamma) EXPECT_EQ(g, 0.0);

    BscGenerator two{0.7, {1.0, 1.0}, 0.0, 0};
    const auto q = to_joint_table(two);
    EXPECT_NEAR(q.prob(0b111u), 0.7, 1e-15);
    EXPECT_NEAR(q.prob(0b000u), 0.3, 1e-15);
}

TEST(BscGenerator, MonteCarloAgreesWithExactTable) {
    const auto inst = test::bsc_analogue(0);
    const int n = 1000000;
    const auto est = empirical_properties(inst, n, 123);
    const auto exact = true_properties(inst);
    for (std::size_t a = 0; a < 3; ++a) {
        const double g = exact.gamma[a];
        const double sigma = std::sqrt(g * (1 - g) / n);
        EXPECT_NEAR(est.gamma[a], g, 3 * sigma + 1e-12) << "arm " << a;
    }
    // Non-increasing error rates under the published parameters.
    EXPECT_GE(est.gamma[0], est.gamma[1]);
    EXPECT_GE(est.gamma[1], est.gamma[2]);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) EXPECT_LE(std::abs(est.p(i, j) - exact.p(i, j)), 0.01);
    }
    EXPECT_TRUE(est.estimated());
    EXPECT_EQ(est.samples, static_cast<std::uint64_t>(n));
}

TEST(BscGenerator, ChiSquareAgainstExactTable) {
    // Critical values of chi-square at alpha = 0.001 (frozen from a reference
    // implementation), indexed by degrees of freedom.
    const std::map<int, double> critical{{7, 24.321886347856854}, {13, 34.52817897487089}};
    for (double corr : {0.0, 0.1}) {
        auto gen = test::reference_bsc();
        gen.corr_error = corr;
        const auto q = to_joint_table(gen);
        const UssInstance inst = make_bsc_instance(gen, {0.0, 0.1, 0.2});
        Environment env(inst);
        Rng rng(2718);
        const int n = 100000;
        std::vector<int> counts(q.outcome_count(), 0);
        FeedbackRound r;
        for (int t = 0; t < n; ++t) {
            env.sample(rng, r);
            ++counts[pack(r)];
        }
        double chi2 = 0.0;
        int cells = 0;
        for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
            const double e = n * q.prob(o);
            if (e == 0.0) {
                EXPECT_EQ(counts[o], 0) << "sampled an impossible outcome";
                continue;
            }
            ++cells;
            chi2 += (counts[o] - e) * (counts[o] - e) / e;
        }
        ASSERT_TRUE(critical.count(cells - 1)) << cells;
        EXPECT_LT(chi2, critical.at(cells - 1)) << "corr_error=" << corr;
    }
}

TEST(BscGenerator, Validation) {
    EXPECT_THROW(make_bsc_instance(test::reference_bsc(), {0.0, 0.1}), std::invalid_argument);
    BscGenerator bad{1.5, {0.5}, 0.0, 0};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    BscGenerator big{0.5, std::vector<double>(13, 0.5), 0.1, 0};
    EXPECT_THROW(to_joint_table(big), std::invalid_argument);
}

TEST(Trace, LoadAndCount) {
    const auto path = tmp_path("four_rows.csv");
    {
        std::ofstream out(path);
        out << "y,arm1,arm2\n1,0,1\n0,0,0\n1,1,1\n0,1,0\n";
    }
    const auto inst = load_trace(path, {0.0, 0.2});
    const auto r = true_properties(inst);
    EXPECT_DOUBLE_EQ(r.gamma[0], 0.5);
    EXPECT_DOUBLE_EQ(r.gamma[1], 0.0);
    EXPECT_DOUBLE_EQ(r.p(0, 1), 0.5);
    EXPECT_EQ(r.basis, Basis::FullTrace);
    EXPECT_EQ(r.samples, 4u);
    // Trace sources always use the full pass, regardless of sample count.
    const auto e = empirical_properties(inst, 10, 1);
    EXPECT_DOUBLE_EQ(e.gamma[0], 0.5);
}

TEST(Trace, ParseErrors) {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_trace(in);
    };
    EXPECT_THROW(parse("arm1,arm2\n0,1\n"), TraceParseError);
    EXPECT_THROW(parse("y,arm2\n0,1\n"), TraceParseError);
    EXPECT_THROW(parse("y,arm1\n0,2\n"), TraceParseError);
    EXPECT_THROW(parse("y,arm1,arm2\n0,1\n"), TraceParseError);
    EXPECT_THROW(parse("y,arm1\n"), TraceParseError);
    try {
        parse("y,arm1\n0,1\n1,x\n");
        FAIL();
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    const auto ok = parse("\xEF\xBB\xBFy,arm1\r\n1,1\r\n\r\n");
    EXPECT_EQ(ok.rows.size(), 1u);
}

TEST(Trace, WriteReadRoundTrip) {
    TraceData d;
    d.arms = 3;
    Rng rng(4);
    d.rows.resize(50);
    for (auto& row : d.rows) sample_bsc(test::reference_bsc(), rng, row);
    std::stringstream ss;
    write_trace(ss, d);
    EXPECT_EQ(parse_trace(ss), d);
}

TEST(EmpiricalProperties, FlagsOnAnalogues) {
    EXPECT_TRUE(empirical_properties(test::bsc_analogue(0), 100000, 9).wd);
    EXPECT_FALSE(empirical_properties(test::bsc_analogue(4), 100000, 9).wd);
    EXPECT_THROW(empirical_properties(test::bsc_analogue(0), 0, 9), std::invalid_argument);
}

TEST(Analogues, ReproducePublishedStructure) {
    for (std::size_t i = 0; i < 5; ++i) {
        const auto r = true_properties(test::bsc_analogue(i));
        EXPECT_EQ(r.i_star, test::kBscAnalogueOptimal[i]) << i;
        EXPECT_EQ(r.wd, i != 4) << i;
        EXPECT_EQ(r.sd, std::optional<bool>(false));
    }
}

TEST(UssInstance, Validation) {
    const auto q = to_joint_table(test::reference_bsc());
    EXPECT_THROW(UssInstance("x", q, {0.0, 0.1}), std::invalid_argument);
    EXPECT_THROW(UssInstance("x", q, {0.0, 0.3, 0.2}), std::invalid_argument);
    EXPECT_THROW(UssInstance("x", q, {0.0, 0.1, 0.2}, {1.0, 0.0, 1.0}), std::invalid_argument);
    const UssInstance ok("x", q, {0.05, 0.1, 0.3});
    const auto c = ok.marginal_costs();
    EXPECT_NEAR(c[1], 0.05, 1e-15);
    const auto back = cumulative_costs(c);
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(back[a], ok.cumulative_costs[a], 1e-15);
}

}  // namespace
}  // namespace uss
