#pragma once

// Implementations behind the `uss` subcommands. Each returns a process exit
// code: 0 success, 2 usage or parse error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "environments.hpp"
#include "harness.hpp"
#include "io.hpp"

namespace uss::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kRuntime = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs `body`, mapping exceptions to exit codes and a one-line diagnostic.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

namespace detail {

inline std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

inline void print_report(std::ostream& os, const std::string& name, const PropertyReport& r) {
    const std::size_t k = r.arms();
    os << "instance: " << name << " (K=" << k << ")\n";
    os << "basis: " << to_string(r.basis);
    if (r.basis != Basis::ExactTable) os << " (" << r.samples << (r.estimated() ? " samples" : " rows") << ")";
    os << "\n";
    os << "arm  C_i        gamma_i    total      delta      xi_j\n";
    for (std::size_t a = 0; a < k; ++a) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4zu %-10.6f %-10.6f %-10.6f %-10.6f %s%s\n", a + 1, r.cumulative_costs[a],
                      r.gamma[a], r.total_cost(a), r.delta[a], a == r.i_star ? "-" : detail::fmt(r.xi_j[a]).c_str(),
                      a == r.i_star ? "   <- optimal" : "");
        os << line;
    }
    os << "disagreement p_ij:\n";
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) os << "  p_" << i + 1 << j + 1 << " = " << detail::fmt(r.p(i, j)) << "\n";
    }
    os << "i_star: " << r.i_star + 1 << "\n";
    os << "xi: " << detail::fmt(r.xi) << "\n";
    os << "SD: " << (r.sd ? (*r.sd ? "true" : "false") : "n/a") << "\n";
    os << "WD: " << (r.wd ? "true" : "false") << "\n";
}

struct VerifyOptions {
    std::string instance_path;
    std::string out_csv;           // empty: no CSV
    std::uint64_t samples = 0;     // >0: also print a Monte-Carlo estimate
    std::optional<std::uint64_t> seed;
};

inline int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.instance_path.empty()) throw UsageError("verify needs --instance");
        if (opt.samples > 0 && !opt.seed) throw UsageError("--samples needs --seed");
        const UssInstance inst = read_instance_file(opt.instance_path);
        const PropertyReport truth = true_properties(inst);
        print_report(out, inst.name, truth);
        std::ostringstream csv;
        write_report_csv(csv, truth);
        if (opt.samples > 0) {
            const PropertyReport est = empirical_properties(inst, opt.samples, derive_seed(*opt.seed, 0, Stream::Estimation));
            out << "\n";
            print_report(out, inst.name, est);
            std::ostringstream extra;
            write_report_csv(extra, est);
            std::string body = extra.str();
            csv << body.substr(body.find('\n') + 1);
        }
        if (!opt.out_csv.empty()) detail::write_text(opt.out_csv, csv.str());
        return static_cast<int>(kOk);
    });
}

struct RunOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<std::uint64_t> repeats;
    std::optional<std::uint64_t> horizon;
    std::optional<unsigned> parallelism;
};

inline json run_metadata(const std::string& command, std::uint64_t seed, std::uint64_t horizon, std::uint64_t repeats) {
    json m;
    m["software"] = "uss";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["seed_derivation"] = "splitmix64 over (seed, repeat index, stream); environment and policy use separate streams";
    m["rng"] = "std::mt19937_64";
    m["horizon"] = horizon;
    m["repeats"] = repeats;
    m["ci_estimator"] = "normal approximation, mean +/- 1.959964 * sd / sqrt(R); 0 when R = 1";
    m["time_grid"] = horizon <= kDenseGridLimit ? "every round" : "every round to 1000, then 200 log-spaced points per decade";
    m["regret"] = "pseudo-regret from true error rates: gamma_{I_t} + lambda C_{I_t} - (gamma_{i*} + lambda C_{i*})";
    return m;
}

inline int cmd_simulate(const RunOverrides& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.config_path.empty()) throw UsageError("simulate needs --config");
        if (!opt.seed) throw UsageError("simulate needs --seed");
        ExperimentConfig cfg = read_experiment_config(opt.config_path, *opt.seed);
        if (opt.repeats) cfg.repeats = *opt.repeats;
        if (opt.horizon) cfg.horizon = *opt.horizon;
        if (opt.parallelism) cfg.parallelism = *opt.parallelism;
        if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
        if (cfg.output_dir.empty()) throw UsageError("no output directory: pass --out or set output_dir");
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        detail::ensure_dir(cfg.output_dir);

        const ExperimentResult result = run_experiment(cfg);
        json meta = run_metadata("simulate", cfg.base_seed, cfg.horizon, cfg.repeats);
        meta["instance"] = instance_to_json(cfg.instance);
        meta["truth"] = report_to_json(result.truth);
        json files = json::array();
        for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
            const auto& curve = result.curves[a];
            const std::string file = "regret_" + policy_slug(cfg.algorithms[a]) + ".csv";
            std::ostringstream csv;
            write_regret_csv(csv, curve);
            detail::write_text((std::filesystem::path(cfg.output_dir) / file).string(), csv.str());
            json entry;
            entry["algorithm"] = curve.algorithm;
            entry["file"] = file;
            if (cfg.algorithms[a].kind == PolicySpec::Kind::Ucb) entry["note"] = "reconstructed USS-UCB baseline";
            entry["final_mean_regret"] = curve.final_mean();
            entry["final_ci95"] = curve.final_ci();
            entry["tail_arm_frequency"] = curve.tail_frequency;
            files.push_back(std::move(entry));
            out << curve.algorithm << ": mean regret at T=" << cfg.horizon << " is " << detail::fmt(curve.final_mean())
                << " +/- " << detail::fmt(curve.final_ci()) << " (" << file << ")\n";
        }
        meta["results"] = std::move(files);
        write_json_file((std::filesystem::path(cfg.output_dir) / "metadata.json").string(), meta);
        return static_cast<int>(kOk);
    });
}

inline int cmd_sweep_xi(const RunOverrides& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.config_path.empty()) throw UsageError("sweep-xi needs --config");
        if (!opt.seed) throw UsageError("sweep-xi needs --seed");
        SweepConfig cfg = read_sweep_config(opt.config_path, *opt.seed);
        if (opt.repeats) cfg.repeats = *opt.repeats;
        if (opt.horizon) cfg.horizon = *opt.horizon;
        if (opt.parallelism) cfg.parallelism = *opt.parallelism;
        if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
        if (cfg.output_dir.empty()) throw UsageError("no output directory: pass --out or set output_dir");
        if (cfg.horizon < 1 || cfg.repeats < 1) throw UsageError("horizon and repeats must be at least 1");
        detail::ensure_dir(cfg.output_dir);

        const auto points = xi_sweep(cfg);
        std::ostringstream csv;
        write_sweep_csv(csv, points);
        detail::write_text((std::filesystem::path(cfg.output_dir) / "xi_sweep.csv").string(), csv.str());

        const auto check = transition_check(points, cfg.transition_margin);
        json meta = run_metadata("sweep-xi", cfg.base_seed, cfg.horizon, cfg.repeats);
        meta["instance"] = instance_to_json(cfg.base);
        meta["algorithm"] = policy_label(cfg.algorithm);
        json tc;
        tc["margin"] = cfg.transition_margin;
        tc["applicable"] = check.applicable;
        tc["passed"] = check.passed;
        tc["max_regret_xi_above_margin"] = check.max_regret_above;
        tc["min_regret_xi_below_minus_margin"] = check.min_regret_below;
        meta["transition_check"] = std::move(tc);
        write_json_file((std::filesystem::path(cfg.output_dir) / "xi_sweep_metadata.json").string(), meta);

        for (const auto& p : points) {
            out << "xi=" << detail::fmt(p.xi) << " i*=" << p.i_star + 1 << " wd=" << (p.wd ? "yes" : "no")
                << " regret=" << detail::fmt(p.mean_final_regret) << " +/- " << detail::fmt(p.ci95) << "\n";
        }
        out << "transition check (|xi| >= " << cfg.transition_margin << "): "
            << (check.applicable ? (check.passed ? "passed" : "FAILED") : "not applicable") << "\n";
        return static_cast<int>(kOk);
    });
}

struct GenBscOptions {
    BscGenerator generator;
    std::vector<double> cumulative_costs;
    std::vector<double> lambdas;
    std::string name = "bsc";
    std::string out_path;
    bool exact = false;
    std::uint64_t trace_rows = 0;
};

/// Writes the instance file; with `exact` also `<stem>.table.json`; with
/// trace rows also `<stem>.trace.csv` and `<stem>.trace-instance.json`.
inline int cmd_gen_bsc(const GenBscOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.out_path.empty()) throw UsageError("gen-bsc needs --out");
        if (opt.cumulative_costs.size() != opt.generator.arms()) {
            throw UsageError("need one cumulative cost per arm (" + std::to_string(opt.generator.arms()) + ")");
        }
        try {
            opt.generator.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (opt.exact && opt.generator.arms() > kMaxEnumeratedArms) throw UsageError("--exact supports at most 12 arms");
        UssInstance inst = [&] {
            try {
                return make_bsc_instance(opt.generator, opt.cumulative_costs, opt.name, opt.lambdas);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
        }();
        const std::filesystem::path path(opt.out_path);
        if (path.has_parent_path()) detail::ensure_dir(path.parent_path().string());
        write_json_file(path.string(), instance_to_json(inst));
        out << "wrote " << path.string() << "\n";

        auto sibling = [&](const std::string& suffix) {
            auto p = path;
            p.replace_filename(path.stem().string() + suffix);
            return p;
        };
        if (opt.exact) {
            const auto tp = sibling(".table.json");
            write_json_file(tp.string(), table_file_json(to_joint_table(opt.generator)));
            out << "wrote " << tp.string() << "\n";
        }
        if (opt.trace_rows > 0) {
            TraceData data;
            data.arms = opt.generator.arms();
            Rng rng(opt.generator.seed);
            data.rows.resize(opt.trace_rows);
            for (auto& row : data.rows) sample_bsc(opt.generator, rng, row);
            const auto csv_path = sibling(".trace.csv");
            std::ostringstream csv;
            write_trace(csv, data);
            detail::write_text(csv_path.string(), csv.str());
            UssInstance traced(opt.name + "-trace",
                               TraceRef{csv_path.filename().string(), std::make_shared<const TraceData>(std::move(data))},
                               opt.cumulative_costs, opt.lambdas);
            const auto ip = sibling(".trace-instance.json");
            write_json_file(ip.string(), instance_to_json(traced));
            out << "wrote " << csv_path.string() << "\nwrote " << ip.string() << "\n";
        }
        return static_cast<int>(kOk);
    });
}

}  // namespace uss::cli
