// uss: command-line front end for the USS simulation library.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uss/commands.hpp"

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
    app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised sequential selection: instance checks, regret simulation and xi sweeps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", uss::kVersion);

    uss::cli::VerifyOptions verify;
    auto* verify_cmd = app.add_subcommand("verify", "Print error rates, disagreements, optimal arm, xi and SD/WD flags");
    verify_cmd->add_option("--instance", verify.instance_path, "Instance file (JSON)")->required();
    verify_cmd->add_option("--out", verify.out_csv, "Also write the report as CSV");
    verify_cmd->add_option("--samples", verify.samples, "Add a Monte-Carlo estimate from this many rounds");
    optional_flag(verify_cmd, "--seed", verify.seed, "Seed for the Monte-Carlo estimate");

    uss::cli::RunOverrides simulate;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run a regret experiment and write one CSV per algorithm");
    uss::cli::RunOverrides sweep;
    auto* sweep_cmd = app.add_subcommand("sweep-xi", "Run the regret-versus-xi sweep");
    for (auto [cmd, opts] : {std::pair{simulate_cmd, &simulate}, std::pair{sweep_cmd, &sweep}}) {
        cmd->add_option("--config", opts->config_path, "Experiment config (JSON)")->required();
        optional_flag(cmd, "--seed", opts->seed, "Base seed (required)");
        cmd->add_option("--out", opts->out_dir, "Output directory");
        optional_flag(cmd, "--repeats", opts->repeats, "Override repeats");
        optional_flag(cmd, "--horizon", opts->horizon, "Override horizon");
        optional_flag(cmd, "--parallelism", opts->parallelism, "Worker threads");
    }

    uss::cli::GenBscOptions gen;
    std::optional<std::uint64_t> gen_seed;
    auto* gen_cmd = app.add_subcommand("gen-bsc", "Write a synthetic BSC instance file");
    gen_cmd->add_option("--p-true", gen.generator.p_true, "P(Y = 1)")->capture_default_str();
    gen_cmd->add_option("--match", gen.generator.match_prob, "Per-arm match probabilities")
        ->delimiter(',')
        ->capture_default_str();
    gen_cmd->add_option("--corr-error", gen.generator.corr_error, "Flip probability for arms 2..K when arm 1 is correct")
        ->capture_default_str();
    gen_cmd->add_option("--cumulative-costs", gen.cumulative_costs, "Cumulative costs C_1..C_K")
        ->delimiter(',')
        ->required();
    gen_cmd->add_option("--lambdas", gen.lambdas, "Trade-off weights (default 1)")->delimiter(',');
    gen_cmd->add_option("--name", gen.name, "Instance name")->capture_default_str();
    optional_flag(gen_cmd, "--seed", gen_seed, "Generator seed (used for --trace-rows)");
    gen_cmd->add_option("--out", gen.out_path, "Instance file to write")->required();
    gen_cmd->add_flag("--exact", gen.exact, "Also write the enumerated joint table");
    gen_cmd->add_option("--trace-rows", gen.trace_rows, "Also sample a replay trace with this many rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : uss::cli::kUsage;
    }

    if (*verify_cmd) return uss::cli::cmd_verify(verify, std::cout, std::cerr);
    if (*simulate_cmd) return uss::cli::cmd_simulate(simulate, std::cout, std::cerr);
    if (*sweep_cmd) return uss::cli::cmd_sweep_xi(sweep, std::cout, std::cerr);
    if (*gen_cmd) {
        if (gen_seed) gen.generator.seed = *gen_seed;
        return uss::cli::cmd_gen_bsc(gen, std::cout, std::cerr);
    }
    return uss::cli::kUsage;
}
