#pragma once

// File formats: instance / experiment / sweep configs (JSON with a
// schema_version and strict field checking), exact joint tables, and the CSV
// outputs of the harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core_model.hpp"
#include "environments.hpp"
#include "harness.hpp"
#include "policies.hpp"

namespace uss {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

using json = nlohmann::ordered_json;

/// Malformed input file. `where` names the file and field.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Reads the fields of one JSON object and rejects anything it was not asked
// about.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) fail("missing required field '" + key + "'");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) fail(key + ": expected a number");
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(key + ": expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::string string(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_string()) fail(key + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array()) fail(key + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(key + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.count(k)) fail("unknown field '" + k + "'");
        }
    }

    void check_schema() {
        const auto v = unsigned_int("schema_version");
        if (v != kSchemaVersion) fail("unsupported schema_version " + std::to_string(v));
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(where_ + ": " + msg); }
    const std::string& where() const noexcept { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline std::string resolve(const std::string& path, const std::string& base_dir) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

inline std::string parent_dir(const std::string& path) {
    return std::filesystem::path(path).parent_path().string();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Joint tables: {"K": 2, "table": {"y y1 y2": prob, ...}}

inline std::string outcome_key(OutcomeBits o, std::size_t arms) {
    std::string key = label_bit(o) ? "1" : "0";
    for (std::size_t a = 0; a < arms; ++a) key += arm_bit(o, a) ? " 1" : " 0";
    return key;
}

inline OutcomeBits parse_outcome_key(const std::string& key, std::size_t arms, const std::string& where) {
    std::istringstream ss(key);
    std::string tok;
    std::vector<int> bits;
    while (ss >> tok) {
        if (tok != "0" && tok != "1") throw ParseError(where + ": outcome '" + key + "' must be space-separated bits");
        bits.push_back(tok == "1");
    }
    if (bits.size() != arms + 1) {
        throw ParseError(where + ": outcome '" + key + "' must have " + std::to_string(arms + 1) + " bits (y first)");
    }
    OutcomeBits o = bits[0] ? 1u : 0u;
    for (std::size_t a = 0; a < arms; ++a) {
        if (bits[a + 1]) o |= OutcomeBits{1} << (a + 1);
    }
    return o;
}

/// Only outcomes with positive probability are written.
inline json table_to_json(const JointTable& q) {
    json j;
    j["K"] = q.arms();
    json entries = json::object();
    for (OutcomeBits o = 0; o < q.outcome_count(); ++o) {
        if (q.prob(o) > 0.0) entries[outcome_key(o, q.arms())] = q.prob(o);
    }
    j["table"] = std::move(entries);
    return j;
}

inline JointTable table_from_fields(detail::StrictObject& obj) {
    const auto k = obj.unsigned_int("K");
    if (k == 0 || k > kMaxTableArms) obj.fail("K must be between 1 and 20");
    const auto& entries = obj.at("table");
    if (!entries.is_object()) obj.fail("table: expected an object mapping outcomes to probabilities");
    std::vector<std::pair<OutcomeBits, double>> parsed;
    std::set<OutcomeBits> seen;
    for (const auto& [key, value] : entries.items()) {
        if (!value.is_number()) obj.fail("table['" + key + "']: expected a number");
        const auto o = parse_outcome_key(key, k, obj.where());
        if (!seen.insert(o).second) obj.fail("table: duplicate outcome '" + key + "'");
        parsed.emplace_back(o, value.get<double>());
    }
    try {
        return JointTable::from_entries(k, parsed);
    } catch (const std::invalid_argument& e) {
        obj.fail(e.what());
    }
}

/// Standalone exact table file, as written by gen-bsc --exact.
inline json table_file_json(const JointTable& q) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j.update(table_to_json(q));
    return j;
}

inline JointTable read_table_file(const std::string& path) {
    const json j = detail::parse_json_file(path);
    detail::StrictObject obj(j, path);
    obj.check_schema();
    auto q = table_from_fields(obj);
    obj.finish();
    return q;
}

// ---------------------------------------------------------------------------
// Instances

inline json instance_to_json(const UssInstance& inst) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = inst.name;
    json src;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, JointTable>) {
                src["type"] = "table";
                src.update(table_to_json(s));
            } else if constexpr (std::is_same_v<T, BscGenerator>) {
                src["type"] = "bsc";
                src["p_true"] = s.p_true;
                src["match_prob"] = s.match_prob;
                src["corr_error"] = s.corr_error;
                src["seed"] = s.seed;
            } else {
                src["type"] = "trace";
                src["path"] = s.path;
            }
        },
        inst.source);
    j["source"] = std::move(src);
    j["cumulative_costs"] = inst.cumulative_costs;
    j["lambdas"] = inst.lambdas;
    return j;
}

/// `base_dir` resolves relative trace and table paths.
inline UssInstance instance_from_json(const json& j, const std::string& where, const std::string& base_dir) {
    detail::StrictObject obj(j, where);
    obj.check_schema();
    const std::string name = obj.has("name") ? obj.string("name") : "instance";

    detail::StrictObject src(obj.at("source"), where + ": source");
    const std::string type = src.string("type");
    std::optional<Source> source;
    if (type == "table") {
        if (src.has("table_file")) {
            const auto path = src.string("table_file");
            source = read_table_file(detail::resolve(path, base_dir));
        } else {
            source = table_from_fields(src);
        }
    } else if (type == "bsc") {
        BscGenerator g;
        g.p_true = src.number("p_true");
        g.match_prob = src.numbers("match_prob");
        g.corr_error = src.number("corr_error");
        g.seed = src.has("seed") ? src.unsigned_int("seed") : 0;
        try {
            g.validate();
        } catch (const std::invalid_argument& e) {
            src.fail(e.what());
        }
        source = std::move(g);
    } else if (type == "trace") {
        const auto path = src.string("path");
        try {
            source = TraceRef{path, std::make_shared<const TraceData>(read_trace_file(detail::resolve(path, base_dir)))};
        } catch (const TraceParseError& e) {
            throw ParseError(e.what());
        } catch (const std::runtime_error& e) {
            src.fail(e.what());
        }
    } else {
        src.fail("type: expected 'table', 'bsc' or 'trace', found '" + type + "'");
    }
    src.finish();

    const bool has_cum = obj.has("cumulative_costs");
    const bool has_marginal = obj.has("costs");
    if (has_cum == has_marginal) obj.fail("give exactly one of 'cumulative_costs' or 'costs' (marginal)");
    std::vector<double> cumulative = has_cum ? obj.numbers("cumulative_costs") : cumulative_costs(obj.numbers("costs"));
    std::vector<double> lambdas = obj.has("lambdas") ? obj.numbers("lambdas") : std::vector<double>{};
    obj.finish();
    try {
        return UssInstance(name, std::move(*source), std::move(cumulative), std::move(lambdas));
    } catch (const std::invalid_argument& e) {
        throw ParseError(where + ": " + e.what());
    }
}

inline UssInstance read_instance_file(const std::string& path) {
    return instance_from_json(detail::parse_json_file(path), path, detail::parent_dir(path));
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Algorithms

/// "ts", "ucb", "ucb(<alpha>)" or "fixed(<arm>)" with a 1-based arm.
inline PolicySpec parse_policy_spec(const std::string& text) {
    auto arg = [&](const std::string& prefix) -> std::optional<std::string> {
        if (text.size() > prefix.size() + 2 && text.compare(0, prefix.size() + 1, prefix + "(") == 0 && text.back() == ')') {
            return text.substr(prefix.size() + 1, text.size() - prefix.size() - 2);
        }
        return std::nullopt;
    };
    if (text == "ts") return PolicySpec::thompson();
    if (text == "ucb") return PolicySpec::ucb();
    if (auto a = arg("ucb")) {
        std::size_t used = 0;
        double alpha = 0.0;
        try {
            alpha = std::stod(*a, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != a->size() || !(alpha > 0.0)) throw ParseError("algorithm '" + text + "': alpha must be a positive number");
        return PolicySpec::ucb(alpha);
    }
    if (auto a = arg("fixed")) {
        std::size_t used = 0;
        long arm = 0;
        try {
            arm = std::stol(*a, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != a->size() || arm < 1) throw ParseError("algorithm '" + text + "': arm must be a positive integer");
        return PolicySpec::fixed(static_cast<std::size_t>(arm - 1));
    }
    throw ParseError("unknown algorithm '" + text + "' (expected ts, ucb(alpha) or fixed(arm))");
}

/// File-name friendly label: ts, ucb_0.5, fixed_2.
inline std::string policy_slug(const PolicySpec& spec) {
    std::string s = policy_label(spec);
    std::string out;
    for (char c : s) {
        if (c == '(') {
            out += '_';
        } else if (c != ')') {
            out += c;
        }
    }
    return out;
}

namespace detail {

inline UssInstance instance_field(StrictObject& obj, const std::string& where, const std::string& base_dir) {
    const auto& v = obj.at("instance");
    if (v.is_string()) return read_instance_file(resolve(v.get<std::string>(), base_dir));
    return instance_from_json(v, where + ": instance", base_dir);
}

}  // namespace detail

/// Experiment config. The seed is not part of the file; it comes from the
/// caller (the --seed flag).
inline ExperimentConfig read_experiment_config(const std::string& path, std::uint64_t seed) {
    const json j = detail::parse_json_file(path);
    detail::StrictObject obj(j, path);
    obj.check_schema();
    const auto base_dir = detail::parent_dir(path);
    UssInstance inst = detail::instance_field(obj, path, base_dir);
    std::vector<PolicySpec> algos;
    const auto& list = obj.at("algorithms");
    if (!list.is_array() || list.empty()) obj.fail("algorithms: expected a non-empty array of names");
    for (const auto& a : list) {
        if (!a.is_string()) obj.fail("algorithms: expected strings");
        try {
            algos.push_back(parse_policy_spec(a.get<std::string>()));
        } catch (const ParseError& e) {
            obj.fail(e.what());
        }
    }
    ExperimentConfig cfg{std::move(inst), std::move(algos)};
    cfg.base_seed = seed;
    if (obj.has("horizon")) cfg.horizon = obj.unsigned_int("horizon");
    if (obj.has("repeats")) cfg.repeats = obj.unsigned_int("repeats");
    if (obj.has("parallelism")) cfg.parallelism = static_cast<unsigned>(obj.unsigned_int("parallelism"));
    if (obj.has("output_dir")) cfg.output_dir = detail::resolve(obj.string("output_dir"), base_dir);
    obj.finish();
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        obj.fail(e.what());
    }
    return cfg;
}

inline SweepConfig read_sweep_config(const std::string& path, std::uint64_t seed) {
    const json j = detail::parse_json_file(path);
    detail::StrictObject obj(j, path);
    obj.check_schema();
    const auto base_dir = detail::parent_dir(path);
    UssInstance inst = detail::instance_field(obj, path, base_dir);
    PolicySpec algo = PolicySpec::thompson();
    if (obj.has("algorithm")) {
        try {
            algo = parse_policy_spec(obj.string("algorithm"));
        } catch (const ParseError& e) {
            obj.fail(e.what());
        }
    }
    const auto& sched = obj.at("schedule");
    if (!sched.is_array() || sched.empty()) obj.fail("schedule: expected a non-empty array of cumulative cost vectors");
    std::vector<std::vector<double>> schedule;
    for (std::size_t s = 0; s < sched.size(); ++s) {
        const auto& row = sched[s];
        if (!row.is_array()) obj.fail("schedule[" + std::to_string(s) + "]: expected an array of numbers");
        std::vector<double> costs;
        for (const auto& c : row) {
            if (!c.is_number()) obj.fail("schedule[" + std::to_string(s) + "]: expected numbers");
            costs.push_back(c.get<double>());
        }
        try {
            (void)with_costs(inst, costs);
        } catch (const std::invalid_argument& e) {
            obj.fail("schedule[" + std::to_string(s) + "]: " + e.what());
        }
        schedule.push_back(std::move(costs));
    }
    SweepConfig cfg{std::move(inst), std::move(schedule), algo};
    cfg.base_seed = seed;
    if (obj.has("horizon")) cfg.horizon = obj.unsigned_int("horizon");
    if (obj.has("repeats")) cfg.repeats = obj.unsigned_int("repeats");
    if (obj.has("parallelism")) cfg.parallelism = static_cast<unsigned>(obj.unsigned_int("parallelism"));
    if (obj.has("transition_margin")) cfg.transition_margin = obj.number("transition_margin");
    if (obj.has("output_dir")) cfg.output_dir = detail::resolve(obj.string("output_dir"), base_dir);
    obj.finish();
    if (cfg.horizon < 1 || cfg.repeats < 1) obj.fail("horizon and repeats must be at least 1");
    return cfg;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline std::string csv_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_regret_csv(std::ostream& out, const RegretCurve& curve) {
    out << "algorithm,t,mean_regret,ci95,repeats\n";
    for (std::size_t g = 0; g < curve.t.size(); ++g) {
        out << curve.algorithm << ',' << curve.t[g] << ',' << csv_number(curve.mean[g]) << ','
            << csv_number(curve.ci95[g]) << ',' << curve.repeats << '\n';
    }
}

inline std::string cost_vector_field(const std::vector<double>& costs) {
    std::string s;
    for (std::size_t i = 0; i < costs.size(); ++i) s += (i ? ";" : "") + csv_number(costs[i]);
    return s;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "xi,cost_vector,mean_final_regret,ci95\n";
    for (const auto& p : points) {
        out << csv_number(p.xi) << ',' << cost_vector_field(p.cumulative_costs) << ',' << csv_number(p.mean_final_regret)
            << ',' << csv_number(p.ci95) << '\n';
    }
}

/// One row per quantity; arms are 1-based, unused index columns empty.
inline void write_report_csv(std::ostream& out, const PropertyReport& r) {
    const std::string basis = to_string(r.basis);
    out << "quantity,i,j,value,basis\n";
    const std::size_t k = r.arms();
    for (std::size_t a = 0; a < k; ++a) out << "gamma," << a + 1 << ",," << csv_number(r.gamma[a]) << ',' << basis << '\n';
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            out << "p," << i + 1 << ',' << j + 1 << ',' << csv_number(r.p(i, j)) << ',' << basis << '\n';
        }
    }
    for (std::size_t a = 0; a < k; ++a) {
        out << "cumulative_cost," << a + 1 << ",," << csv_number(r.cumulative_costs[a]) << ",given\n";
    }
    out << "i_star," << r.i_star + 1 << ",," << r.i_star + 1 << ',' << basis << '\n';
    for (std::size_t a = 0; a < k; ++a) out << "delta," << a + 1 << ",," << csv_number(r.delta[a]) << ',' << basis << '\n';
    for (std::size_t a = 0; a < k; ++a) {
        if (a != r.i_star) out << "xi_j," << a + 1 << ",," << csv_number(r.xi_j[a]) << ',' << basis << '\n';
    }
    out << "xi,,," << csv_number(r.xi) << ',' << basis << '\n';
    if (r.sd) out << "sd,,," << (*r.sd ? 1 : 0) << ',' << basis << '\n';
    out << "wd,,," << (r.wd ? 1 : 0) << ',' << basis << '\n';
}

inline void write_policy_state_csv(std::ostream& out, const DisagreementStats& s) {
    out << "i,j,S,F\n";
    for (std::size_t i = 0; i < s.arms(); ++i) {
        for (std::size_t j = i + 1; j < s.arms(); ++j) out << i + 1 << ',' << j + 1 << ',' << s.S(i, j) << ',' << s.F(i, j) << '\n';
    }
}

inline json report_to_json(const PropertyReport& r) {
    json j;
    j["basis"] = to_string(r.basis);
    if (r.basis != Basis::ExactTable) j["samples"] = r.samples;
    j["gamma"] = r.gamma;
    json p = json::array();
    for (std::size_t i = 0; i < r.arms(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < r.arms(); ++k) row.push_back(r.p(i, k));
        p.push_back(std::move(row));
    }
    j["p"] = std::move(p);
    j["i_star"] = r.i_star + 1;
    j["delta"] = r.delta;
    j["xi"] = std::isinf(r.xi) ? json("inf") : json(r.xi);
    j["wd"] = r.wd;
    if (r.sd) j["sd"] = *r.sd;
    return j;
}

}  // namespace uss
