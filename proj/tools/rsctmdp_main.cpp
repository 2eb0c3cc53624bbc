#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "rsctmdp/cli.hpp"
#include "rsctmdp/tables.hpp"

namespace {

void add_common(CLI::App* sub, rsctmdp::cli::RunConfig& c, std::string& model, std::string& out) {
    sub->add_option("--model", model, "Model document (JSON)")->required();
    sub->add_option("--steps", c.steps, "Time steps on [0, T]")->capture_default_str();
    sub->add_option("--action-points", c.action_points, "Action grid size for mm_infinity documents");
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_flag("--no-timestamp", "Omit the timestamp from manifest.json");
    sub->add_option("--isa", c.isa, "Kernel ISA: scalar or avx2")->check(CLI::IsMember({"scalar", "avx2"}));
    sub->add_option("--certificate", c.certificate_path, "Certificate JSON (default: derived for mm_infinity)");
}

void add_simulation(CLI::App* sub, rsctmdp::cli::RunConfig& c) {
    sub->add_option("--paths", c.n_paths, "Monte Carlo paths")->capture_default_str();
    sub->add_option("--seed", c.master_seed, "Master seed")->capture_default_str();
    sub->add_option("--workers", c.workers, "Worker threads (0 = hardware concurrency)");
    sub->add_option("--initial-state", c.initial_state, "Initial state")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    rsctmdp::cli::RunConfig config;
    std::string model, out = ".";

    CLI::App app{"Risk-sensitive finite-horizon CTMDP solver and validation toolkit"};
    app.set_version_flag("--version", "rsctmdp " + std::string(rsctmdp::kToolVersion));
    app.require_subcommand(1);

    auto* check = app.add_subcommand("check", "Check the Lyapunov conditions");
    auto* solve = app.add_subcommand("solve", "Solve the optimality equation");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of a policy's value");
    auto* converge = app.add_subcommand("converge", "Truncation ladder study");
    auto* compare = app.add_subcommand("compare", "Compare the optimal policy with constant policies");
    for (auto* sub : {check, solve, simulate, converge, compare}) add_common(sub, config, model, out);

    add_simulation(simulate, config);
    simulate->add_option("--policy", config.policy_path, "Stored policy table");
    simulate->add_option("--constant-action", config.constant_action, "Constant policy: min, max or mid")
        ->check(CLI::IsMember({"min", "max", "mid"}));
    simulate->add_flag("--dump-paths", config.dump_paths, "Write paths.csv");
    add_simulation(compare, config);
    solve->add_option("--initial-state", config.initial_state, "State reported on stdout");

    converge->add_option("--levels", config.levels, "Thresholds on V")->delimiter(',');
    converge->add_option("--windows", config.windows, "Active-set sizes, instead of --levels")->delimiter(',');
    converge->add_option("--probes", config.probes, "Probe states")->delimiter(',');
    converge->add_option("--refine", config.refine, "Step counts for a refinement study")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rsctmdp::cli::kExitValidation;
    }

    for (auto* sub : {check, solve, simulate, converge, compare}) {
        if (sub->parsed()) {
            config.command = rsctmdp::cli::parse_command(sub->get_name());
            config.timestamp = sub->count("--no-timestamp") == 0;
        }
    }
    config.model_path = model;
    config.output_dir = out;
    return rsctmdp::cli::run(config, std::cout, std::cerr);
}
