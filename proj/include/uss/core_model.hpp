#pragma once

// Domain model for unsupervised sequential selection (USS) instances and the
// exact oracles computed from an explicit joint distribution.
//
// Arms are 0-based in this library. Arm a is the (a+1)-th classifier in the
// cascade; command-line output and file formats are 1-based.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace uss {

inline constexpr double kProbabilitySumTolerance = 1e-12;
inline constexpr double kTieTolerance = 1e-12;
inline constexpr std::size_t kMaxTableArms = 20;

/// Sentinel for xi when the last arm is optimal (WD holds vacuously).
inline constexpr double kXiUnbounded = std::numeric_limits<double>::infinity();

// An outcome (y, y^1, ..., y^K) packed into an integer: bit 0 holds the hidden
// label y, bit a+1 holds the feedback of arm a.
using OutcomeBits = std::uint32_t;

constexpr bool label_bit(OutcomeBits o) noexcept { return (o & 1u) != 0; }
constexpr bool arm_bit(OutcomeBits o, std::size_t arm) noexcept { return ((o >> (arm + 1)) & 1u) != 0; }

/// Explicit probability table over the 2^(K+1) outcomes.
class JointTable {
public:
    JointTable(std::size_t arms, std::vector<double> probs) : arms_(arms), probs_(std::move(probs)) {
        if (arms_ == 0) throw std::invalid_argument("joint table needs at least one arm");
        if (arms_ > kMaxTableArms) throw std::invalid_argument("joint table supports at most 20 arms");
        if (probs_.size() != outcome_count()) {
            throw std::invalid_argument("joint table must have exactly 2^(K+1) entries");
        }
        double total = 0.0;
        for (double p : probs_) {
            if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("joint table has a negative or non-finite probability");
            total += p;
        }
        if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
            throw std::invalid_argument("joint table probabilities sum to " + std::to_string(total) + ", not 1");
        }
    }

    /// Builds a table from sparse entries; absent outcomes have probability 0.
    static JointTable from_entries(std::size_t arms, std::span<const std::pair<OutcomeBits, double>> entries) {
        if (arms == 0 || arms > kMaxTableArms) throw std::invalid_argument("joint table arm count out of range");
        std::vector<double> probs(std::size_t{1} << (arms + 1), 0.0);
        for (const auto& [outcome, p] : entries) {
            if (outcome >= probs.size()) throw std::invalid_argument("outcome index out of range");
            probs[outcome] += p;
        }
        return JointTable(arms, std::move(probs));
    }

    std::size_t arms() const noexcept { return arms_; }
    std::size_t outcome_count() const noexcept { return std::size_t{1} << (arms_ + 1); }
    double prob(OutcomeBits o) const { return probs_.at(o); }
    std::span<const double> probs() const noexcept { return probs_; }

    bool operator==(const JointTable&) const = default;

private:
    std::size_t arms_;
    std::vector<double> probs_;
};

inline std::vector<double> error_rates(const JointTable& q) {
    std::vector<double> gamma(q.arms(), 0.0);
    for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
        const double p = q.prob(o);
        if (p == 0.0) continue;
        for (std::size_t a = 0; a < q.arms(); ++a) {
            if (arm_bit(o, a) != label_bit(o)) gamma[a] += p;
        }
    }
    for (double& g : gamma) g = std::clamp(g, 0.0, 1.0);
    return gamma;
}

inline Matrix disagreement_matrix(const JointTable& q) {
    const std::size_t k = q.arms();
    Matrix p(k, 0.0);
    for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
        const double w = q.prob(o);
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                if (arm_bit(o, i) != arm_bit(o, j)) p(i, j) += w;
            }
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            p(i, j) = std::clamp(p(i, j), 0.0, 1.0);
            p(j, i) = p(i, j);
        }
    }
    return p;
}

/// C_i = c_1 + ... + c_i.
inline std::vector<double> cumulative_costs(std::span<const double> marginal) {
    std::vector<double> out(marginal.size());
    double running = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        running += marginal[i];
        out[i] = running;
    }
    return out;
}

/// gamma_i + lambda_i * C_i for every arm.
inline std::vector<double> total_costs(std::span<const double> gamma, std::span<const double> cumulative,
                                       std::span<const double> lambdas) {
    if (gamma.size() != cumulative.size() || gamma.size() != lambdas.size()) {
        throw std::invalid_argument("gamma, costs and lambdas must have equal length");
    }
    std::vector<double> totals(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) totals[i] = gamma[i] + lambdas[i] * cumulative[i];
    return totals;
}

/// Largest-index minimizer of the total expected cost. Totals within
/// kTieTolerance of the minimum count as tied.
inline std::size_t optimal_arm(std::span<const double> gamma, std::span<const double> cumulative,
                               std::span<const double> lambdas) {
    if (gamma.empty()) throw std::invalid_argument("optimal_arm needs at least one arm");
    const auto totals = total_costs(gamma, cumulative, lambdas);
    for (double t : totals) {
        if (!std::isfinite(t)) throw std::invalid_argument("optimal_arm inputs must be finite");
    }
    const double best = *std::min_element(totals.begin(), totals.end());
    std::size_t arm = 0;
    for (std::size_t i = 0; i < totals.size(); ++i) {
        if (totals[i] <= best + kTieTolerance) arm = i;
    }
    return arm;
}

inline std::size_t optimal_arm(std::span<const double> gamma, std::span<const double> cumulative) {
    const std::vector<double> ones(gamma.size(), 1.0);
    return optimal_arm(gamma, cumulative, ones);
}

/// Delta_j = total_j - total_{i*}. Throws when i_star is not the optimal arm
/// of the same inputs.
inline std::vector<double> sub_optimality_gaps(std::span<const double> gamma, std::span<const double> cumulative,
                                               std::span<const double> lambdas, std::size_t i_star) {
    if (i_star >= gamma.size() || optimal_arm(gamma, cumulative, lambdas) != i_star) {
        throw std::invalid_argument("i_star is not the optimal arm of these inputs");
    }
    const auto totals = total_costs(gamma, cumulative, lambdas);
    std::vector<double> delta(totals.size());
    for (std::size_t j = 0; j < totals.size(); ++j) {
        // Tied arms may differ from the optimum by rounding noise.
        delta[j] = j == i_star ? 0.0 : std::max(0.0, totals[j] - totals[i_star]);
    }
    return delta;
}

inline std::vector<double> sub_optimality_gaps(std::span<const double> gamma, std::span<const double> cumulative,
                                               std::size_t i_star) {
    const std::vector<double> ones(gamma.size(), 1.0);
    return sub_optimality_gaps(gamma, cumulative, ones, i_star);
}

struct XiValues {
    double xi = kXiUnbounded;
    /// Per-arm margin; NaN at i_star.
    std::vector<double> per_arm;
};

inline XiValues xi_values(const Matrix& p, std::span<const double> cumulative, std::size_t i_star) {
    const std::size_t k = cumulative.size();
    if (p.size() != k || i_star >= k) throw std::invalid_argument("xi_values: inconsistent dimensions");
    XiValues out;
    out.per_arm.assign(k, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < k; ++j) {
        if (j < i_star) {
            out.per_arm[j] = p(i_star, j) - (cumulative[i_star] - cumulative[j]);
        } else if (j > i_star) {
            out.per_arm[j] = cumulative[j] - cumulative[i_star] - p(i_star, j);
            out.xi = std::min(out.xi, out.per_arm[j]);
        }
    }
    return out;
}

/// Weak dominance: strictly positive xi, or the last arm is optimal.
inline bool check_wd(const Matrix& p, std::span<const double> cumulative, std::size_t i_star) {
    if (i_star + 1 == cumulative.size()) return true;
    return xi_values(p, cumulative, i_star).xi > 0.0;
}

/// Strong dominance: whenever an arm matches the label, every later arm does.
inline bool check_sd(const JointTable& q) {
    for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
        if (q.prob(o) <= 0.0) continue;
        bool matched = false;
        for (std::size_t a = 0; a < q.arms(); ++a) {
            const bool correct = arm_bit(o, a) == label_bit(o);
            if (matched && !correct) return false;
            matched = matched || correct;
        }
    }
    return true;
}

struct CandidateSet {
    std::vector<std::size_t> members;  // ascending
    std::size_t selected = 0;
};

/// B = {i : C_j - C_i > p_ij for all j > i} united with the last arm.
inline CandidateSet candidate_set(const Matrix& p, std::span<const double> cumulative) {
    const std::size_t k = cumulative.size();
    if (k == 0 || p.size() != k) throw std::invalid_argument("candidate_set: inconsistent dimensions");
    CandidateSet out;
    for (std::size_t i = 0; i < k; ++i) {
        bool ok = true;
        for (std::size_t j = i + 1; j < k && ok; ++j) ok = cumulative[j] - cumulative[i] > p(i, j);
        if (ok) out.members.push_back(i);
    }
    out.selected = out.members.front();
    return out;
}

/// Largest deviation from gamma_i - gamma_j = p_ij - 2 P(Y^i = Y, Y^j != Y)
/// over all ordered pairs.
inline double identity_residual(const JointTable& q) {
    const std::size_t k = q.arms();
    const auto gamma = error_rates(q);
    const auto p = disagreement_matrix(q);
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            double only_i_right = 0.0;
            for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
                if (arm_bit(o, i) == label_bit(o) && arm_bit(o, j) != label_bit(o)) only_i_right += q.prob(o);
            }
            worst = std::max(worst, std::abs((gamma[i] - gamma[j]) - (p(i, j) - 2.0 * only_i_right)));
        }
    }
    return worst;
}

/// Where the probabilities behind a report came from.
enum class Basis {
    ExactTable,  // explicit or enumerated joint distribution
    FullTrace,   // one exact pass over a replayed trace population
    MonteCarlo,  // sampled estimate
};

inline const char* to_string(Basis b) noexcept {
    switch (b) {
        case Basis::ExactTable: return "exact";
        case Basis::FullTrace: return "trace";
        case Basis::MonteCarlo: return "estimated";
    }
    return "?";
}

/// Everything the oracles say about one instance.
struct PropertyReport {
    std::vector<double> gamma;
    Matrix p;
    std::vector<double> cumulative_costs;
    std::vector<double> lambdas;
    std::size_t i_star = 0;
    std::vector<double> delta;
    double xi = kXiUnbounded;
    std::vector<double> xi_j;
    std::optional<bool> sd;  // only decidable on explicit tables
    bool wd = true;
    Basis basis = Basis::ExactTable;
    std::uint64_t samples = 0;  // rows or rounds behind a non-exact report

    bool estimated() const noexcept { return basis == Basis::MonteCarlo; }

    std::size_t arms() const noexcept { return gamma.size(); }
    double total_cost(std::size_t arm) const { return gamma[arm] + lambdas[arm] * cumulative_costs[arm]; }
};

inline PropertyReport analyze(std::vector<double> gamma, Matrix p, std::vector<double> cumulative,
                              std::vector<double> lambdas) {
    PropertyReport r;
    r.i_star = optimal_arm(gamma, cumulative, lambdas);
    r.delta = sub_optimality_gaps(gamma, cumulative, lambdas, r.i_star);
    auto xi = xi_values(p, cumulative, r.i_star);
    r.xi = xi.xi;
    r.xi_j = std::move(xi.per_arm);
    r.wd = check_wd(p, cumulative, r.i_star);
    r.gamma = std::move(gamma);
    r.p = std::move(p);
    r.cumulative_costs = std::move(cumulative);
    r.lambdas = std::move(lambdas);
    return r;
}

inline PropertyReport exact_properties(const JointTable& q, std::vector<double> cumulative, std::vector<double> lambdas) {
    if (cumulative.size() != q.arms()) throw std::invalid_argument("cost vector length does not match the table");
    auto r = analyze(error_rates(q), disagreement_matrix(q), std::move(cumulative), std::move(lambdas));
    r.sd = check_sd(q);
    return r;
}

}  // namespace uss
