#pragma once

// Episode execution, regret accounting and multi-repeat aggregation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "core_model.hpp"
#include "environments.hpp"
#include "policies.hpp"
#include "rng.hpp"

namespace uss {

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr std::uint64_t kDenseGridLimit = 10000;
inline constexpr std::uint64_t kTailWindow = 1000;

/// Per-arm instantaneous regret, from the ground-truth report.
struct RegretModel {
    std::vector<double> per_arm;
    std::size_t i_star = 0;

    explicit RegretModel(const PropertyReport& truth) : per_arm(truth.arms()), i_star(truth.i_star) {
        for (std::size_t j = 0; j < truth.arms(); ++j) {
            per_arm[j] = j == truth.i_star ? 0.0 : std::max(0.0, truth.total_cost(j) - truth.total_cost(truth.i_star));
        }
    }
};

struct Episode {
    std::vector<std::uint8_t> arms;  // 0-based arm per round
    std::vector<double> regret;      // instantaneous regret per round

    double total_regret() const {
        double s = 0.0;
        for (double r : regret) s += r;
        return s;
    }

    std::vector<double> cumulative_regret() const {
        std::vector<double> out(regret.size());
        double s = 0.0;
        for (std::size_t t = 0; t < regret.size(); ++t) out[t] = s += regret[t];
        return out;
    }
};

/// Runs one episode of `horizon` rounds. The environment and the policy draw
/// from independent streams derived from (base_seed, repeat), so swapping the
/// policy never changes the feedback sequence. When `rounds_out` is given,
/// every environment draw is appended to it.
inline Episode run_episode(const UssInstance& instance, const RegretModel& model, Policy& policy, std::uint64_t horizon,
                           std::uint64_t base_seed, std::uint64_t repeat,
                           std::vector<FeedbackRound>* rounds_out = nullptr) {
    if (horizon == 0) throw std::invalid_argument("horizon must be at least 1");
    if (model.per_arm.size() != instance.arms()) throw std::invalid_argument("regret model does not match the instance");
    if (instance.arms() > 255) throw std::invalid_argument("episodes support at most 255 arms");
    Environment env(instance);
    Rng env_rng(derive_seed(base_seed, repeat, Stream::Environment));
    Rng policy_rng(derive_seed(base_seed, repeat, Stream::Policy));
    Episode ep;
    ep.arms.reserve(horizon);
    ep.regret.reserve(horizon);
    FeedbackRound round;
    for (std::uint64_t t = 0; t < horizon; ++t) {
        env.sample(env_rng, round);
        if (rounds_out) rounds_out->push_back(round);
        const std::size_t arm = policy_select(policy, policy_rng);
        // Only feedback of arms 1..I_t reaches the policy; the label never does.
        FeedbackRound seen;
        seen.feedback.assign(round.feedback.begin(), round.feedback.begin() + static_cast<std::ptrdiff_t>(arm + 1));
        policy_observe(policy, arm, seen);
        ep.arms.push_back(static_cast<std::uint8_t>(arm));
        ep.regret.push_back(model.per_arm[arm]);
    }
    return ep;
}

inline Episode run_episode(const UssInstance& instance, const PolicySpec& spec, std::uint64_t horizon,
                           std::uint64_t base_seed, std::uint64_t repeat) {
    const RegretModel model(true_properties(instance));
    Policy policy = make_policy(spec, instance.cumulative_costs);
    return run_episode(instance, model, policy, horizon, base_seed, repeat);
}

/// Rounds at which cumulative regret is stored: every round up to 10^4,
/// otherwise every round up to 1000 followed by 200 log-spaced points per
/// decade and the horizon itself.
inline std::vector<std::uint64_t> time_grid(std::uint64_t horizon) {
    std::vector<std::uint64_t> grid;
    if (horizon <= kDenseGridLimit) {
        grid.resize(horizon);
        for (std::uint64_t t = 0; t < horizon; ++t) grid[t] = t + 1;
        return grid;
    }
    for (std::uint64_t t = 1; t <= 1000; ++t) grid.push_back(t);
    for (int step = 601;; ++step) {
        const auto t = static_cast<std::uint64_t>(std::llround(std::pow(10.0, step / 200.0)));
        if (t >= horizon) break;
        if (t > grid.back()) grid.push_back(t);
    }
    grid.push_back(horizon);
    return grid;
}

struct RegretCurve {
    std::string algorithm;
    std::vector<std::uint64_t> t;
    std::vector<double> mean;
    std::vector<double> ci95;  // normal approximation, 0 when repeats == 1
    std::size_t repeats = 0;
    /// Per-arm selection frequency over the last min(1000, T) rounds,
    /// averaged over repeats.
    std::vector<double> tail_frequency;

    double final_mean() const { return mean.back(); }
    double final_ci() const { return ci95.back(); }

    /// Mean cumulative regret at round `round` (must be on the grid).
    double mean_at(std::uint64_t round) const {
        auto it = std::lower_bound(t.begin(), t.end(), round);
        if (it == t.end() || *it != round) throw std::out_of_range("round not on the time grid");
        return mean[static_cast<std::size_t>(it - t.begin())];
    }
};

/// Mean and 95% half-width of `values` (sample standard deviation).
struct MeanCi {
    double mean = 0.0;
    double ci95 = 0.0;
};

inline MeanCi mean_ci(std::span<const double> values) {
    MeanCi out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += v;
    out.mean = s / n;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.ci95 = kZ95 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

/// Aggregates per-repeat cumulative regret sampled on `grid`.
inline RegretCurve aggregate(std::string algorithm, std::vector<std::uint64_t> grid,
                             const std::vector<std::vector<double>>& per_repeat) {
    RegretCurve c;
    c.algorithm = std::move(algorithm);
    c.repeats = per_repeat.size();
    c.mean.resize(grid.size());
    c.ci95.resize(grid.size());
    std::vector<double> column(per_repeat.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (std::size_t r = 0; r < per_repeat.size(); ++r) column[r] = per_repeat[r].at(g);
        const auto mc = mean_ci(column);
        c.mean[g] = mc.mean;
        c.ci95[g] = mc.ci95;
    }
    c.t = std::move(grid);
    return c;
}

/// Runs `count` jobs on up to `parallelism` threads; job i always handles
/// index i, so results do not depend on the thread count.
template <typename Job>
void parallel_for(std::size_t count, unsigned parallelism, Job&& job) {
    const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) job(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::string policy_label(const PolicySpec& spec);

/// R independent episodes of one policy, aggregated on the time grid.
inline RegretCurve run_repeats(const UssInstance& instance, const RegretModel& model, const PolicySpec& spec,
                               std::uint64_t horizon, std::uint64_t repeats, std::uint64_t base_seed,
                               unsigned parallelism = 1) {
    if (horizon == 0 || repeats == 0) throw std::invalid_argument("horizon and repeats must be at least 1");
    const auto grid = time_grid(horizon);
    const std::size_t k = instance.arms();
    const std::uint64_t tail = std::min(horizon, kTailWindow);
    std::vector<std::vector<double>> sampled(repeats);
    std::vector<std::vector<double>> tail_counts(repeats, std::vector<double>(k, 0.0));
    parallel_for(repeats, parallelism, [&](std::size_t r) {
        Policy policy = make_policy(spec, instance.cumulative_costs);
        const Episode ep = run_episode(instance, model, policy, horizon, base_seed, r);
        const auto cum = ep.cumulative_regret();
        auto& row = sampled[r];
        row.resize(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) row[g] = cum[grid[g] - 1];
        for (std::uint64_t t = horizon - tail; t < horizon; ++t) tail_counts[r][ep.arms[t]] += 1.0;
    });
    RegretCurve curve = aggregate(policy_label(spec), grid, sampled);
    curve.tail_frequency.assign(k, 0.0);
    for (const auto& counts : tail_counts) {
        for (std::size_t a = 0; a < k; ++a) curve.tail_frequency[a] += counts[a] / static_cast<double>(tail);
    }
    for (double& f : curve.tail_frequency) f /= static_cast<double>(repeats);
    return curve;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// "ts", "ucb(0.5)" or "fixed(2)"; arms in labels are 1-based.
inline std::string policy_label(const PolicySpec& spec) {
    switch (spec.kind) {
        case PolicySpec::Kind::Thompson: return "ts";
        case PolicySpec::Kind::Ucb: return "ucb(" + format_number(spec.alpha) + ")";
        case PolicySpec::Kind::Fixed: return "fixed(" + std::to_string(spec.arm + 1) + ")";
    }
    return "?";
}

struct ExperimentConfig {
    ExperimentConfig(UssInstance instance_, std::vector<PolicySpec> algorithms_)
        : instance(std::move(instance_)), algorithms(std::move(algorithms_)) {}

    UssInstance instance;
    std::vector<PolicySpec> algorithms;
    std::uint64_t horizon = 10000;
    std::uint64_t repeats = 500;
    std::uint64_t base_seed = 0;
    std::string output_dir;
    unsigned parallelism = 1;

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
        if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
        if (algorithms.empty()) throw std::invalid_argument("at least one algorithm is required");
        for (const auto& a : algorithms) {
            if (a.kind == PolicySpec::Kind::Fixed && a.arm >= instance.arms()) {
                throw std::invalid_argument("fixed arm out of range: " + policy_label(a));
            }
        }
    }
};

struct ExperimentResult {
    PropertyReport truth;
    std::vector<RegretCurve> curves;  // in config order
};

/// Every algorithm sees the same environment streams: repeat r of every
/// algorithm uses seed base_seed + r.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult out{true_properties(config.instance), {}};
    const RegretModel model(out.truth);
    for (const auto& spec : config.algorithms) {
        out.curves.push_back(
            run_repeats(config.instance, model, spec, config.horizon, config.repeats, config.base_seed, config.parallelism));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bound curves

/// Bernoulli KL divergence d(x, mu), with 0 log 0 = 0. Returns +inf when mu
/// is 0 or 1 and x differs from it.
inline double kl_bernoulli(double x, double mu) {
    if (x < 0.0 || x > 1.0 || mu < 0.0 || mu > 1.0) throw std::invalid_argument("kl_bernoulli: arguments must lie in [0, 1]");
    if (x == mu) return 0.0;
    if (mu == 0.0 || mu == 1.0) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    if (x > 0.0) d += x * std::log(x / mu);
    if (x < 1.0) d += (1.0 - x) * std::log((1.0 - x) / (1.0 - mu));
    return std::max(0.0, d);
}

/// Logarithmic term of the problem-dependent USS-TS regret bound,
///   sum_{j > i*} (1 + eps) ln T / d(p_{i*j}, p_{i*j} + xi_j) * Delta_j,
/// on each T of the grid. The additive O((K - i*)/eps^2) term has no known
/// constant and is not included.
inline std::vector<double> bound_curve(const PropertyReport& report, double epsilon, std::span<const std::uint64_t> grid) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("bound_curve: epsilon must be positive");
    const std::size_t k = report.arms();
    double coeff = 0.0;
    for (std::size_t j = report.i_star + 1; j < k; ++j) {
        const double xi_j = report.xi_j[j];
        if (!(xi_j > 0.0)) throw std::invalid_argument("bound_curve: weak dominance fails, bound undefined");
        const double p = report.p(report.i_star, j);
        const double d = kl_bernoulli(p, std::min(1.0, p + xi_j));
        if (std::isinf(d)) continue;
        coeff += (1.0 + epsilon) * report.delta[j] / d;
    }
    std::vector<double> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out[g] = coeff * std::log(static_cast<double>(grid[g]));
    return out;
}

// ---------------------------------------------------------------------------
// xi sweep

struct SweepPoint {
    std::vector<double> cumulative_costs;
    double xi = kXiUnbounded;
    std::size_t i_star = 0;
    bool wd = true;
    double mean_final_regret = 0.0;
    double ci95 = 0.0;
};

struct SweepConfig {
    SweepConfig(UssInstance base_, std::vector<std::vector<double>> schedule_, PolicySpec algorithm_)
        : base(std::move(base_)), schedule(std::move(schedule_)), algorithm(algorithm_) {}

    UssInstance base;
    std::vector<std::vector<double>> schedule;  // cumulative cost vectors
    PolicySpec algorithm;
    std::uint64_t horizon = 10000;
    std::uint64_t repeats = 100;
    std::uint64_t base_seed = 0;
    unsigned parallelism = 1;
    double transition_margin = 0.05;
    std::string output_dir;
};

/// For each cost setting: xi from the exact disagreement matrix and the mean
/// final regret of the algorithm.
inline std::vector<SweepPoint> xi_sweep(const SweepConfig& config) {
    if (config.schedule.empty()) throw std::invalid_argument("xi sweep schedule is empty");
    std::vector<SweepPoint> out;
    for (const auto& costs : config.schedule) {
        const UssInstance inst = with_costs(config.base, costs);
        const PropertyReport truth = true_properties(inst);
        const RegretModel model(truth);
        const RegretCurve curve =
            run_repeats(inst, model, config.algorithm, config.horizon, config.repeats, config.base_seed, config.parallelism);
        out.push_back({costs, truth.xi, truth.i_star, truth.wd, curve.final_mean(), curve.final_ci()});
    }
    return out;
}

struct TransitionCheck {
    bool applicable = false;  // points exist on both sides of the margin
    bool passed = false;
    double max_regret_above = 0.0;  // over xi >= margin
    double min_regret_below = 0.0;  // over xi <= -margin
};

/// Regret at every xi >= margin must lie strictly below regret at every
/// xi <= -margin.
inline TransitionCheck transition_check(std::span<const SweepPoint> points, double margin) {
    TransitionCheck c;
    bool any_above = false, any_below = false;
    c.max_regret_above = -std::numeric_limits<double>::infinity();
    c.min_regret_below = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        if (p.xi >= margin) {
            any_above = true;
            c.max_regret_above = std::max(c.max_regret_above, p.mean_final_regret);
        } else if (p.xi <= -margin) {
            any_below = true;
            c.min_regret_below = std::min(c.min_regret_below, p.mean_final_regret);
        }
    }
    c.applicable = any_above && any_below;
    c.passed = c.applicable && c.max_regret_above < c.min_regret_below;
    if (!any_above) c.max_regret_above = 0.0;
    if (!any_below) c.min_regret_below = 0.0;
    return c;
}

}  // namespace uss
