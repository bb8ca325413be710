#pragma once

// Cascade stopping policies. Every policy walks the arms in order and stops
// at the first arm it believes is optimal; after the round it sees the
// feedback of the arms up to and including the one it stopped at.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "environments.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace uss {

/// Beta posterior parameters for every pair i < j (upper triangle only).
/// S counts disagreements + 1 and F agreements + 1.
struct DisagreementStats {
    explicit DisagreementStats(std::size_t arms) : S(arms, 1), F(arms, 1) {}

    std::size_t arms() const noexcept { return S.size(); }

    SquareMatrix<std::uint64_t> S;
    SquareMatrix<std::uint64_t> F;
    std::uint64_t t = 0;  // completed rounds
};

struct PolicyDecision {
    std::size_t arm = 0;
    /// Sampled disagreement probabilities, (i, j) with i < j; NaN where no
    /// sample was drawn this round.
    Matrix samples;
    std::vector<std::size_t> walk;
};

namespace detail {

// Shared cascade walk: stop at the first arm i with C_j - C_i > index(i, j)
// for all j > i, or at the last arm. `index` is called exactly once for each
// pair examined, in walk order.
template <typename IndexFn, typename OnExamine>
std::size_t cascade_walk(std::span<const double> cumulative, IndexFn&& index, OnExamine&& on_examine) {
    const std::size_t k = cumulative.size();
    for (std::size_t i = 0; i + 1 < k; ++i) {
        on_examine(i);
        bool stop = true;
        // Draw all indices for this arm before testing, as the walk is
        // defined to compute every value for j in [i+1, K].
        for (std::size_t j = i + 1; j < k; ++j) {
            const double v = index(i, j);
            if (!(cumulative[j] - cumulative[i] > v)) stop = false;
        }
        if (stop) return i;
    }
    on_examine(k - 1);
    return k - 1;
}

}  // namespace detail

/// One USS-TS selection. Fresh Beta(S_ij, F_ij) samples are drawn for every
/// j > i at each examined arm i.
inline PolicyDecision ts_select(const DisagreementStats& state, std::span<const double> cumulative, Rng& rng) {
    const std::size_t k = state.arms();
    if (cumulative.size() != k) throw std::invalid_argument("ts_select: cost vector length mismatch");
    PolicyDecision d;
    d.samples = Matrix(k, std::numeric_limits<double>::quiet_NaN());
    d.arm = detail::cascade_walk(
        cumulative,
        [&](std::size_t i, std::size_t j) {
            const double s = rng.beta(static_cast<double>(state.S(i, j)), static_cast<double>(state.F(i, j)));
            d.samples(i, j) = s;
            return s;
        },
        [&](std::size_t i) { d.walk.push_back(i); });
    return d;
}

/// Selection without the diagnostic record; same random stream as ts_select.
inline std::size_t ts_select_arm(const DisagreementStats& state, std::span<const double> cumulative, Rng& rng) {
    return detail::cascade_walk(
        cumulative,
        [&](std::size_t i, std::size_t j) {
            return rng.beta(static_cast<double>(state.S(i, j)), static_cast<double>(state.F(i, j)));
        },
        [](std::size_t) {});
}

/// Counts agreement or disagreement for every pair i < j <= arm.
inline void ts_update(DisagreementStats& state, std::size_t arm, const FeedbackRound& round) {
    if (arm >= state.arms()) throw std::out_of_range("ts_update: arm out of range");
    if (round.feedback.size() <= arm) throw std::invalid_argument("ts_update: feedback does not cover the selected arm");
    for (std::size_t i = 0; i < arm; ++i) {
        for (std::size_t j = i + 1; j <= arm; ++j) {
            if (round.feedback[i] != round.feedback[j]) {
                ++state.S(i, j);
            } else {
                ++state.F(i, j);
            }
        }
    }
    ++state.t;
}

/// Pair statistics for the UCB baseline.
struct UcbState {
    explicit UcbState(std::size_t arms) : observed(arms, 0), disagreements(arms, 0) {}

    std::size_t arms() const noexcept { return observed.size(); }

    double p_hat(std::size_t i, std::size_t j) const {
        return observed(i, j) ? static_cast<double>(disagreements(i, j)) / static_cast<double>(observed(i, j)) : 0.0;
    }

    SquareMatrix<std::uint64_t> observed;       // N_ij
    SquareMatrix<std::uint64_t> disagreements;  // sum of 1{Y^i != Y^j}
    std::uint64_t t = 0;                        // completed rounds
};

/// Reconstructed USS-UCB baseline. The stopping test uses the upper
/// confidence index min(1, p_hat + sqrt(alpha ln t / (2 N_ij))); pairs never
/// observed get index 1. Stopping early therefore needs confidence that the
/// disagreement is below the cost gap.
inline PolicyDecision ucb_select(const UcbState& state, std::span<const double> cumulative, double alpha) {
    const std::size_t k = state.arms();
    if (cumulative.size() != k) throw std::invalid_argument("ucb_select: cost vector length mismatch");
    const double log_t = std::log(static_cast<double>(state.t + 1));
    PolicyDecision d;
    d.samples = Matrix(k, std::numeric_limits<double>::quiet_NaN());
    d.arm = detail::cascade_walk(
        cumulative,
        [&](std::size_t i, std::size_t j) {
            const auto n = state.observed(i, j);
            const double v = n == 0 ? 1.0
                                    : std::min(1.0, state.p_hat(i, j) +
                                                        std::sqrt(alpha * log_t / (2.0 * static_cast<double>(n))));
            d.samples(i, j) = v;
            return v;
        },
        [&](std::size_t i) { d.walk.push_back(i); });
    return d;
}

inline void ucb_update(UcbState& state, std::size_t arm, const FeedbackRound& round) {
    if (arm >= state.arms()) throw std::out_of_range("ucb_update: arm out of range");
    if (round.feedback.size() <= arm) throw std::invalid_argument("ucb_update: feedback does not cover the selected arm");
    for (std::size_t i = 0; i < arm; ++i) {
        for (std::size_t j = i + 1; j <= arm; ++j) {
            ++state.observed(i, j);
            if (round.feedback[i] != round.feedback[j]) ++state.disagreements(i, j);
        }
    }
    ++state.t;
}

// ---------------------------------------------------------------------------
// Policy objects used by the harness.

struct PolicySpec {
    enum class Kind { Thompson, Ucb, Fixed };
    Kind kind = Kind::Thompson;
    double alpha = 0.5;    // Ucb
    std::size_t arm = 0;   // Fixed, 0-based

    static PolicySpec thompson() { return {}; }
    static PolicySpec ucb(double alpha = 0.5) { return {Kind::Ucb, alpha, 0}; }
    static PolicySpec fixed(std::size_t arm) { return {Kind::Fixed, 0.0, arm}; }

    bool operator==(const PolicySpec&) const = default;
};

class ThompsonPolicy {
public:
    ThompsonPolicy(std::vector<double> cumulative) : costs_(std::move(cumulative)), stats_(costs_.size()) {}

    std::size_t select(Rng& rng) { return ts_select_arm(stats_, costs_, rng); }
    void observe(std::size_t arm, const FeedbackRound& round) { ts_update(stats_, arm, round); }
    const DisagreementStats& stats() const noexcept { return stats_; }

private:
    std::vector<double> costs_;
    DisagreementStats stats_;
};

class UcbPolicy {
public:
    UcbPolicy(std::vector<double> cumulative, double alpha)
        : costs_(std::move(cumulative)), alpha_(alpha), state_(costs_.size()) {
        if (!(alpha > 0.0)) throw std::invalid_argument("ucb alpha must be positive");
    }

    std::size_t select(Rng&) { return ucb_select(state_, costs_, alpha_).arm; }
    void observe(std::size_t arm, const FeedbackRound& round) { ucb_update(state_, arm, round); }
    const UcbState& state() const noexcept { return state_; }

private:
    std::vector<double> costs_;
    double alpha_;
    UcbState state_;
};

/// Plays the same arm every round. With the optimal arm this is the
/// zero-regret oracle.
class FixedArmPolicy {
public:
    FixedArmPolicy(std::size_t arm, std::size_t arms) : arm_(arm) {
        if (arm >= arms) throw std::out_of_range("fixed arm out of range");
    }

    std::size_t select(Rng&) const noexcept { return arm_; }
    void observe(std::size_t, const FeedbackRound&) noexcept {}

private:
    std::size_t arm_;
};

using Policy = std::variant<ThompsonPolicy, UcbPolicy, FixedArmPolicy>;

inline Policy make_policy(const PolicySpec& spec, const std::vector<double>& cumulative) {
    switch (spec.kind) {
        case PolicySpec::Kind::Thompson: return ThompsonPolicy(cumulative);
        case PolicySpec::Kind::Ucb: return UcbPolicy(cumulative, spec.alpha);
        case PolicySpec::Kind::Fixed: return FixedArmPolicy(spec.arm, cumulative.size());
    }
    throw std::logic_error("unknown policy kind");
}

inline std::size_t policy_select(Policy& p, Rng& rng) {
    return std::visit([&](auto& v) { return v.select(rng); }, p);
}

inline void policy_observe(Policy& p, std::size_t arm, const FeedbackRound& round) {
    std::visit([&](auto& v) { v.observe(arm, round); }, p);
}

// ---------------------------------------------------------------------------
// Preference diagnostics

/// relation(i, j) == 1 iff arm i is preferred over arm j given the sampled
/// disagreements (upper triangle of `samples`).
inline SquareMatrix<std::uint8_t> preferences(const Matrix& samples, std::span<const double> cumulative) {
    const std::size_t k = cumulative.size();
    if (samples.size() != k) throw std::invalid_argument("preferences: dimension mismatch");
    SquareMatrix<std::uint8_t> rel(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const bool lower_wins = samples(i, j) < cumulative[j] - cumulative[i];
            rel(i, j) = lower_wins ? 1 : 0;
            rel(j, i) = lower_wins ? 0 : 1;
        }
    }
    return rel;
}

using Triple = std::array<std::size_t, 3>;

/// All (i, j, k) with i > j and j > k in preference but not i > k.
inline std::vector<Triple> transitivity_violations(const SquareMatrix<std::uint8_t>& rel) {
    const std::size_t k = rel.size();
    std::vector<Triple> out;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            if (b == a || !rel(a, b)) continue;
            for (std::size_t c = 0; c < k; ++c) {
                if (c == a || c == b || !rel(b, c)) continue;
                if (!rel(a, c)) out.push_back({a, b, c});
            }
        }
    }
    return out;
}

}  // namespace uss
