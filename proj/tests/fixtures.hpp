#pragma once

// Shared test instances. Values marked "enumeration oracle" were computed by
// an independent brute-force enumeration of every latent draw of the BSC
// process and frozen here.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "uss/uss.hpp"

namespace uss::test {

// Error rates and cumulative-cost rows as published for the synthetic and
// real-data instances.
inline const std::vector<double> kTable1Gamma{0.3937, 0.2899, 0.1358};
inline const std::vector<std::vector<double>> kTable1Costs{
    {0.05, 0.285, 0.45}, {0.05, 0.1, 0.53}, {0.05, 0.3, 0.45}, {0.05, 0.25, 0.29}, {0.1, 0.2, 0.41}};
inline const std::vector<double> kPimaGamma{0.3098, 0.233, 0.2278};
inline const std::vector<std::vector<double>> kPimaCosts{
    {0.05, 0.28, 0.45}, {0.2, 0.25, 0.269}, {0.05, 0.309, 0.45}, {0.2, 0.25, 0.255}, {0.05, 0.146, 0.3}};
inline const std::vector<double> kHeartGamma{0.2929, 0.2025, 0.1483};
inline const std::vector<std::vector<double>> kHeartCosts{
    {0.02, 0.32, 0.45}, {0.2, 0.25, 0.395}, {0.02, 0.34, 0.45}, {0.2, 0.25, 0.3}, {0.2, 0.25, 0.325}};

/// BSC generator with the published parameters.
inline BscGenerator reference_bsc() { return BscGenerator{0.7, {0.6, 0.7, 0.8}, 0.1, 0}; }

// Enumeration oracle for reference_bsc().
inline const std::vector<double> kReferenceBscGamma{0.4, 0.18, 0.084};
inline constexpr double kReferenceBscP12 = 0.34;
inline constexpr double kReferenceBscP13 = 0.436;
inline constexpr double kReferenceBscP23 = 0.204;

// Cost rows on reference_bsc() that reproduce the optimal arm and WD flag of
// each published synthetic instance (1-based optimal arms 1, 2, 1, 3, 2;
// the fifth fails WD).
inline const std::vector<std::vector<double>> kBscAnalogueCosts{
    {0.0, 0.45, 0.6}, {0.0, 0.1, 0.4}, {0.0, 0.5, 0.55}, {0.0, 0.15, 0.2}, {0.0, 0.15, 0.3}};
inline const std::vector<std::size_t> kBscAnalogueOptimal{0, 1, 0, 2, 1};

inline UssInstance bsc_analogue(std::size_t index) {
    return make_bsc_instance(reference_bsc(), kBscAnalogueCosts.at(index), "bsc-analogue-" + std::to_string(index + 1));
}

inline UssInstance bsc_analogue_table(std::size_t index) {
    return UssInstance("bsc-table-" + std::to_string(index + 1), to_joint_table(reference_bsc()), kBscAnalogueCosts.at(index));
}

/// Random explicit table with K arms. Mixes dense tables with sparse ones so
/// that structured (including strongly dominant) tables show up.
inline JointTable random_table(std::size_t arms, std::mt19937_64& gen) {
    const std::size_t n = std::size_t{1} << (arms + 1);
    std::vector<double> w(n, 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool sparse = u(gen) < 0.5;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    if (sparse) {
        const std::size_t count = 1 + pick(gen) % 6;
        for (std::size_t c = 0; c < count; ++c) w[pick(gen)] += u(gen) + 1e-3;
    } else {
        std::exponential_distribution<double> e(1.0);
        for (auto& x : w) x = e(gen);
    }
    double s = 0.0;
    for (double x : w) s += x;
    for (auto& x : w) x /= s;
    return JointTable(arms, std::move(w));
}

}  // namespace uss::test
