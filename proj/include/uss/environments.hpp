#pragma once

// Feedback sources for the interaction protocol: an explicit joint table,
// the synthetic binary-symmetric-channel (BSC) cascade generator, and
// round-robin replay of classifier prediction traces.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "core_model.hpp"
#include "rng.hpp"

namespace uss {

inline constexpr std::size_t kMaxEnumeratedArms = 12;

struct FeedbackRound {
    std::optional<bool> label;           // hidden truth Y, when the source has it
    std::vector<std::uint8_t> feedback;  // Y^1..Y^K as 0/1

    bool operator==(const FeedbackRound&) const = default;
};

/// Synthetic cascade generator. One round: Y ~ Bernoulli(p_true); arm a
/// independently reports Y with probability match_prob[a]; every arm after
/// the first correct one is forced correct; finally, if arm 1 is correct,
/// each later arm is independently flipped wrong with probability corr_error.
struct BscGenerator {
    double p_true = 0.7;
    std::vector<double> match_prob{0.6, 0.7, 0.8};
    double corr_error = 0.1;
    std::uint64_t seed = 0;

    std::size_t arms() const noexcept { return match_prob.size(); }

    void validate() const {
        auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
        if (match_prob.empty()) throw std::invalid_argument("BSC generator needs at least one arm");
        if (!in_unit(p_true)) throw std::invalid_argument("BSC p_true must lie in [0, 1]");
        if (!in_unit(corr_error)) throw std::invalid_argument("BSC corr_error must lie in [0, 1]");
        for (double m : match_prob) {
            if (!in_unit(m)) throw std::invalid_argument("BSC match_prob entries must lie in [0, 1]");
        }
    }

    bool operator==(const BscGenerator&) const = default;
};

inline void sample_bsc(const BscGenerator& gen, Rng& rng, FeedbackRound& out) {
    const std::size_t k = gen.arms();
    const bool y = rng.bernoulli(gen.p_true);
    out.label = y;
    out.feedback.resize(k);
    // correct[a] stored in feedback temporarily.
    bool matched = false;
    for (std::size_t a = 0; a < k; ++a) {
        const bool correct = rng.bernoulli(gen.match_prob[a]);
        out.feedback[a] = (matched || correct) ? 1 : 0;
        matched = matched || correct;
    }
    if (out.feedback[0] != 0) {
        for (std::size_t a = 1; a < k; ++a) {
            if (rng.bernoulli(gen.corr_error)) out.feedback[a] = 0;
        }
    }
    for (auto& f : out.feedback) f = static_cast<std::uint8_t>((f != 0) == y ? 1 : 0);
}

/// Exact distribution of the BSC generative process, by enumerating the
/// first-correct arm and, when that is arm 1, the flip pattern.
inline JointTable to_joint_table(const BscGenerator& gen) {
    gen.validate();
    const std::size_t k = gen.arms();
    if (k > kMaxEnumeratedArms) throw std::invalid_argument("BSC enumeration supports at most 12 arms");
    std::vector<double> probs(std::size_t{1} << (k + 1), 0.0);

    auto deposit = [&](double weight, const std::vector<bool>& correct) {
        for (int y = 0; y <= 1; ++y) {
            OutcomeBits o = static_cast<OutcomeBits>(y);
            for (std::size_t a = 0; a < k; ++a) {
                const bool bit = correct[a] ? (y == 1) : (y == 0);
                if (bit) o |= OutcomeBits{1} << (a + 1);
            }
            probs[o] += weight * (y == 1 ? gen.p_true : 1.0 - gen.p_true);
        }
    };

    std::vector<bool> correct(k);
    double none_before = 1.0;  // P(arms before `first` all drawn wrong)
    for (std::size_t first = 0; first < k; ++first) {
        const double w = none_before * gen.match_prob[first];
        none_before *= 1.0 - gen.match_prob[first];
        if (w == 0.0) continue;
        if (first > 0) {
            for (std::size_t a = 0; a < k; ++a) correct[a] = a >= first;
            deposit(w, correct);
            continue;
        }
        const std::size_t tail = k - 1;
        for (std::uint32_t flips = 0; flips < (std::uint32_t{1} << tail); ++flips) {
            double pf = w;
            correct[0] = true;
            for (std::size_t a = 1; a < k; ++a) {
                const bool flipped = ((flips >> (a - 1)) & 1u) != 0;
                pf *= flipped ? gen.corr_error : 1.0 - gen.corr_error;
                correct[a] = !flipped;
            }
            if (pf != 0.0) deposit(pf, correct);
        }
    }
    if (none_before != 0.0) {
        std::fill(correct.begin(), correct.end(), false);
        deposit(none_before, correct);
    }
    return JointTable(k, std::move(probs));
}

/// A strongly dominant table with the given non-increasing error rates: the
/// first correct arm is drawn so that P(arm a wrong) = gamma[a], and every
/// arm after it is correct.
inline JointTable make_sd_table(const std::vector<double>& gamma, double p_true) {
    const std::size_t k = gamma.size();
    if (k == 0 || k > kMaxTableArms) throw std::invalid_argument("make_sd_table: arm count out of range");
    for (std::size_t a = 0; a < k; ++a) {
        if (gamma[a] < 0.0 || gamma[a] > 1.0 || (a > 0 && gamma[a] > gamma[a - 1])) {
            throw std::invalid_argument("make_sd_table: error rates must be non-increasing and in [0, 1]");
        }
    }
    std::vector<double> probs(std::size_t{1} << (k + 1), 0.0);
    for (std::size_t first = 0; first <= k; ++first) {
        const double upper = first == 0 ? 1.0 : gamma[first - 1];
        const double lower = first == k ? 0.0 : gamma[first];
        const double w = upper - lower;
        for (int y = 0; y <= 1; ++y) {
            OutcomeBits o = static_cast<OutcomeBits>(y);
            for (std::size_t a = 0; a < k; ++a) {
                const bool bit = a >= first ? (y == 1) : (y == 0);
                if (bit) o |= OutcomeBits{1} << (a + 1);
            }
            probs[o] += w * (y == 1 ? p_true : 1.0 - p_true);
        }
    }
    return JointTable(k, std::move(probs));
}

// ---------------------------------------------------------------------------
// Traces

struct TraceData {
    std::size_t arms = 0;
    std::vector<FeedbackRound> rows;

    bool operator==(const TraceData&) const = default;
};

class TraceParseError : public std::runtime_error {
public:
    TraceParseError(std::size_t line, const std::string& what)
        : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto end = s.find_last_not_of(ws);
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}

}  // namespace detail

/// Reads `y,arm1,...,armK` CSV. Rows keep file order.
inline TraceData parse_trace(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw TraceParseError(1, "empty file, expected header y,arm1,...");
    ++lineno;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_csv_line(detail::trim(line));
    if (header.empty() || detail::trim(header[0]) != "y") throw TraceParseError(1, "missing label column 'y'");
    if (header.size() < 2) throw TraceParseError(1, "no arm columns");
    TraceData data;
    data.arms = header.size() - 1;
    for (std::size_t a = 0; a < data.arms; ++a) {
        const auto expected = "arm" + std::to_string(a + 1);
        if (detail::trim(header[a + 1]) != expected) {
            throw TraceParseError(1, "expected column '" + expected + "', found '" + header[a + 1] + "'");
        }
    }
    auto bit = [&](const std::string& raw, std::size_t col) -> std::uint8_t {
        const auto f = detail::trim(raw);
        if (f == "0") return 0;
        if (f == "1") return 1;
        throw TraceParseError(lineno, "column " + std::to_string(col + 1) + ": expected 0 or 1, found '" + f + "'");
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != data.arms + 1) {
            throw TraceParseError(lineno, "expected " + std::to_string(data.arms + 1) + " fields, found " +
                                              std::to_string(fields.size()));
        }
        FeedbackRound row;
        row.label = bit(fields[0], 0) != 0;
        row.feedback.resize(data.arms);
        for (std::size_t a = 0; a < data.arms; ++a) row.feedback[a] = bit(fields[a + 1], a + 1);
        data.rows.push_back(std::move(row));
    }
    if (data.rows.empty()) throw TraceParseError(lineno, "trace has no rows");
    return data;
}

inline TraceData read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path);
    try {
        return parse_trace(in);
    } catch (const TraceParseError& e) {
        throw TraceParseError(e.line(), std::string(path) + ": " + e.what());
    }
}

inline void write_trace(std::ostream& out, const TraceData& data) {
    out << "y";
    for (std::size_t a = 0; a < data.arms; ++a) out << ",arm" << (a + 1);
    out << "\n";
    for (const auto& row : data.rows) {
        out << (row.label.value_or(false) ? 1 : 0);
        for (auto f : row.feedback) out << "," << static_cast<int>(f);
        out << "\n";
    }
}

/// Empirical joint distribution of a trace population.
inline JointTable trace_table(const TraceData& data) {
    if (data.arms > kMaxTableArms) throw std::invalid_argument("trace has too many arms for a joint table");
    std::vector<std::uint64_t> counts(std::size_t{1} << (data.arms + 1), 0);
    for (const auto& row : data.rows) {
        OutcomeBits o = row.label.value_or(false) ? 1u : 0u;
        for (std::size_t a = 0; a < data.arms; ++a) {
            if (row.feedback[a]) o |= OutcomeBits{1} << (a + 1);
        }
        ++counts[o];
    }
    std::vector<double> probs(counts.size());
    const double n = static_cast<double>(data.rows.size());
    for (std::size_t i = 0; i < counts.size(); ++i) probs[i] = static_cast<double>(counts[i]) / n;
    return JointTable(data.arms, std::move(probs));
}

// ---------------------------------------------------------------------------
// Instances

struct TraceRef {
    std::string path;  // as given in the instance file
    std::shared_ptr<const TraceData> data;

    bool operator==(const TraceRef& o) const { return path == o.path && (data == o.data || (data && o.data && *data == *o.data)); }
};

using Source = std::variant<JointTable, BscGenerator, TraceRef>;

inline std::size_t source_arms(const Source& s) {
    return std::visit(
        [](const auto& v) -> std::size_t {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TraceRef>) {
                return v.data ? v.data->arms : 0;
            } else {
                return v.arms();
            }
        },
        s);
}

/// The pair (Q, c): a feedback source plus costs and trade-off weights.
struct UssInstance {
    std::string name;
    Source source;
    std::vector<double> cumulative_costs;  // C_i
    std::vector<double> lambdas;           // all 1 unless given

    UssInstance(std::string name_, Source source_, std::vector<double> cumulative, std::vector<double> lambdas_ = {})
        : name(std::move(name_)), source(std::move(source_)), cumulative_costs(std::move(cumulative)),
          lambdas(std::move(lambdas_)) {
        if (lambdas.empty()) lambdas.assign(cumulative_costs.size(), 1.0);
        validate();
    }

    std::size_t arms() const { return source_arms(source); }

    /// c_i = C_i - C_{i-1}.
    std::vector<double> marginal_costs() const {
        std::vector<double> c(cumulative_costs.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = cumulative_costs[i] - (i ? cumulative_costs[i - 1] : 0.0);
        return c;
    }

    void validate() const {
        const std::size_t k = arms();
        if (k == 0) throw std::invalid_argument("instance source has no arms");
        if (cumulative_costs.size() != k || lambdas.size() != k) {
            throw std::invalid_argument("instance '" + name + "': costs and lambdas must have one entry per arm (K=" +
                                        std::to_string(k) + ")");
        }
        for (std::size_t i = 0; i < k; ++i) {
            if (!std::isfinite(cumulative_costs[i]) || cumulative_costs[i] < 0.0) {
                throw std::invalid_argument("instance '" + name + "': costs must be finite and non-negative");
            }
            if (i > 0 && cumulative_costs[i] < cumulative_costs[i - 1]) {
                throw std::invalid_argument("instance '" + name + "': cumulative costs must be non-decreasing");
            }
            if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i])) {
                throw std::invalid_argument("instance '" + name + "': lambdas must be positive");
            }
        }
        if (const auto* g = std::get_if<BscGenerator>(&source)) g->validate();
    }

    bool operator==(const UssInstance&) const = default;
};

inline UssInstance make_bsc_instance(const BscGenerator& gen, std::vector<double> cumulative, std::string name = "bsc",
                                     std::vector<double> lambdas = {}) {
    gen.validate();
    if (cumulative.size() != gen.arms()) throw std::invalid_argument("make_bsc_instance: one cost per arm required");
    return UssInstance(std::move(name), gen, std::move(cumulative), std::move(lambdas));
}

inline UssInstance load_trace(const std::string& path, std::vector<double> cumulative, std::string name = "trace") {
    auto data = std::make_shared<const TraceData>(read_trace_file(path));
    return UssInstance(std::move(name), TraceRef{path, std::move(data)}, std::move(cumulative));
}

/// Same instance with different cumulative costs.
inline UssInstance with_costs(const UssInstance& base, std::vector<double> cumulative) {
    UssInstance out = base;
    out.cumulative_costs = std::move(cumulative);
    out.validate();
    return out;
}

/// Per-episode environment. Owns the replay cursor; randomness comes from the
/// caller's stream.
class Environment {
public:
    explicit Environment(const UssInstance& instance, bool wrap = true) : wrap_(wrap) {
        std::visit(
            [this](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, JointTable>) {
                    arms_ = s.arms();
                    cdf_.resize(s.outcome_count());
                    double running = 0.0;
                    for (std::size_t o = 0; o < cdf_.size(); ++o) {
                        running += s.prob(static_cast<OutcomeBits>(o));
                        cdf_[o] = running;
                        if (s.prob(static_cast<OutcomeBits>(o)) > 0.0) last_positive_ = o;
                    }
                    kind_ = Kind::Table;
                } else if constexpr (std::is_same_v<T, BscGenerator>) {
                    arms_ = s.arms();
                    bsc_ = s;
                    kind_ = Kind::Bsc;
                } else {
                    if (!s.data) throw std::invalid_argument("trace source has no data");
                    arms_ = s.data->arms;
                    trace_ = s.data;
                    kind_ = Kind::Trace;
                }
            },
            instance.source);
    }

    std::size_t arms() const noexcept { return arms_; }
    std::size_t cursor() const noexcept { return cursor_; }

    void sample(Rng& rng, FeedbackRound& out) {
        switch (kind_) {
            case Kind::Table: {
                const double u = rng.uniform() * cdf_.back();
                auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
                std::size_t o = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), last_positive_);
                out.label = label_bit(static_cast<OutcomeBits>(o));
                out.feedback.resize(arms_);
                for (std::size_t a = 0; a < arms_; ++a) out.feedback[a] = arm_bit(static_cast<OutcomeBits>(o), a) ? 1 : 0;
                break;
            }
            case Kind::Bsc:
                sample_bsc(bsc_, rng, out);
                break;
            case Kind::Trace: {
                if (cursor_ >= trace_->rows.size()) {
                    if (!wrap_) throw std::out_of_range("trace exhausted");
                    cursor_ = 0;
                }
                out = trace_->rows[cursor_++];
                break;
            }
        }
    }

    FeedbackRound sample(Rng& rng) {
        FeedbackRound r;
        sample(rng, r);
        return r;
    }

private:
    enum class Kind { Table, Bsc, Trace };
    Kind kind_ = Kind::Table;
    std::size_t arms_ = 0;
    bool wrap_ = true;
    std::vector<double> cdf_;
    std::size_t last_positive_ = 0;
    BscGenerator bsc_;
    std::shared_ptr<const TraceData> trace_;
    std::size_t cursor_ = 0;
};

/// Ground-truth properties used for regret: the explicit table, the
/// enumerated BSC table, or one pass over the full trace.
inline PropertyReport true_properties(const UssInstance& instance) {
    return std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, JointTable>) {
                return exact_properties(s, instance.cumulative_costs, instance.lambdas);
            } else if constexpr (std::is_same_v<T, BscGenerator>) {
                if (s.arms() > kMaxEnumeratedArms) {
                    throw std::invalid_argument("true error rates unknown: BSC instance with more than 12 arms");
                }
                return exact_properties(to_joint_table(s), instance.cumulative_costs, instance.lambdas);
            } else {
                auto r = exact_properties(trace_table(*s.data), instance.cumulative_costs, instance.lambdas);
                r.basis = Basis::FullTrace;
                r.samples = s.data->rows.size();
                return r;
            }
        },
        instance.source);
}

/// Monte-Carlo estimate of the instance properties from `samples` rounds.
/// Trace sources are always read in one full pass instead.
inline PropertyReport empirical_properties(const UssInstance& instance, std::uint64_t samples, std::uint64_t seed) {
    if (samples == 0) throw std::invalid_argument("empirical_properties needs at least one sample");
    if (std::holds_alternative<TraceRef>(instance.source)) return true_properties(instance);
    const std::size_t k = instance.arms();
    if (k > kMaxTableArms) throw std::invalid_argument("too many arms for empirical estimation");
    Environment env(instance);
    Rng rng(seed);
    std::vector<std::uint64_t> counts(std::size_t{1} << (k + 1), 0);
    FeedbackRound round;
    for (std::uint64_t n = 0; n < samples; ++n) {
        env.sample(rng, round);
        OutcomeBits o = round.label.value_or(false) ? 1u : 0u;
        for (std::size_t a = 0; a < k; ++a) {
            if (round.feedback[a]) o |= OutcomeBits{1} << (a + 1);
        }
        ++counts[o];
    }
    std::vector<double> probs(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) probs[i] = static_cast<double>(counts[i]) / static_cast<double>(samples);
    auto r = exact_properties(JointTable(k, std::move(probs)), instance.cumulative_costs, instance.lambdas);
    r.basis = Basis::MonteCarlo;
    r.samples = samples;
    return r;
}

}  // namespace uss
