#include "rsctmdp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "rsctmdp/convergence.hpp"
#include "rsctmdp/document.hpp"
#include "rsctmdp/errors.hpp"
#include "rsctmdp/kernels/kernels.hpp"
#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/simulator.hpp"
#include "rsctmdp/solver.hpp"
#include "rsctmdp/tables.hpp"

namespace rsctmdp::cli {

using nlohmann::json;

std::string_view to_string(Command c) {
    switch (c) {
        case Command::check: return "check";
        case Command::solve: return "solve";
        case Command::simulate: return "simulate";
        case Command::converge: return "converge";
        case Command::compare: return "compare";
    }
    return "?";
}

Command parse_command(std::string_view name) {
    for (Command c : {Command::check, Command::solve, Command::simulate, Command::converge, Command::compare}) {
        if (to_string(c) == name) return c;
    }
    throw ValidationError("unknown command \"" + std::string(name) + "\"");
}

void RunConfig::validate() const {
    if (model_path.empty()) throw ValidationError("--model is required");
    if (steps == 0) throw ValidationError("--steps must be >= 1");
    if ((command == Command::simulate || command == Command::compare) && n_paths < 2) {
        throw ValidationError("--paths must be >= 2");
    }
    if (!levels.empty() && !windows.empty()) throw ValidationError("--levels and --windows are mutually exclusive");
    if (policy_path && constant_action) {
        throw ValidationError("--policy and --constant-action are mutually exclusive");
    }
    if (constant_action && *constant_action != "min" && *constant_action != "max" && *constant_action != "mid") {
        throw ValidationError("--constant-action must be one of min, max, mid");
    }
    for (double level : levels) {
        if (!(level >= 1.0)) throw ValidationError("--levels entries must be >= 1");
    }
}

namespace {

struct Context {
    const RunConfig& config;
    std::ostream& out;
    ModelDocument doc;
    TableHeader header;
    std::vector<std::string> outputs;
};

json config_echo(const RunConfig& c) {
    json j;
    j["command"] = to_string(c.command);
    j["model"] = c.model_path.generic_string();
    j["steps"] = c.steps;
    j["action_points"] = c.action_points ? json(*c.action_points) : json(nullptr);
    j["isa"] = kernels::to_string(kernels::active_isa());
    switch (c.command) {
        case Command::check: break;
        case Command::solve: break;
        case Command::simulate:
        case Command::compare:
            j["paths"] = c.n_paths;
            j["seed"] = c.master_seed;
            j["initial_state"] = c.initial_state;
            if (c.policy_path) j["policy"] = c.policy_path->generic_string();
            if (c.constant_action) j["constant_action"] = *c.constant_action;
            break;
        case Command::converge:
            j["levels"] = c.levels;
            j["windows"] = c.windows;
            j["probes"] = c.probes;
            j["refine"] = c.refine;
            break;
    }
    if (c.certificate_path) j["certificate"] = c.certificate_path->generic_string();
    return j;
}

void write_output(Context& ctx, const std::string& name, const std::function<void(std::ostream&)>& body) {
    const std::filesystem::path path = ctx.config.output_dir / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    body(f);
    f.flush();
    if (!f) throw IoError("write failed for " + path.string());
    ctx.outputs.push_back(name);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(Context& ctx, int status) {
    json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = to_string(ctx.config.command);
    m["config"] = config_echo(ctx.config);
    m["model_hash"] = format_hash(ctx.header.model_hash);
    m["model_kind"] = ctx.doc.kind == ModelDocument::Kind::mm_infinity ? "mm_infinity" : "tabular";
    m["states"] = ctx.doc.model.state_count();
    m["horizon"] = ctx.doc.model.horizon();
    m["exit_status"] = status;
    m["outputs"] = ctx.outputs;
    if (ctx.config.timestamp) m["timestamp"] = utc_timestamp();
    write_output(ctx, "manifest.json", [&](std::ostream& f) { f << m.dump(2) << '\n'; });
}

std::optional<LyapunovCertificate> load_certificate(const Context& ctx) {
    std::optional<LyapunovCertificate> cert;
    if (ctx.config.certificate_path) {
        cert = load_certificate_file(*ctx.config.certificate_path);
    } else if (ctx.doc.params) {
        cert = derive_example_weights(*ctx.doc.params);
    }
    if (cert && cert->state_count() != ctx.doc.model.state_count()) {
        throw ValidationError("certificate has " + std::to_string(cert->state_count()) + " states, the model has " +
                              std::to_string(ctx.doc.model.state_count()));
    }
    return cert;
}

void require_state(const Model& model, State i, const char* flag) {
    if (i >= model.state_count()) {
        throw ValidationError(std::string(flag) + " " + std::to_string(i) + " outside the window of " +
                              std::to_string(model.state_count()) + " states");
    }
}

/// Constant policy at the smallest, largest or most central grid action of each state.
Policy constant_policy(const Model& model, const TimeGrid& grid, std::string_view which) {
    std::vector<std::size_t> index(model.state_count());
    for (State i = 0; i < model.state_count(); ++i) {
        const auto a = model.actions(i);
        const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
        if (which == "min") {
            index[i] = static_cast<std::size_t>(lo - a.begin());
        } else if (which == "max") {
            index[i] = static_cast<std::size_t>(hi - a.begin());
        } else {
            const double centre = 0.5 * (*lo + *hi);
            std::size_t best = 0;
            for (std::size_t k = 1; k < a.size(); ++k) {
                if (std::abs(a[k] - centre) < std::abs(a[best] - centre)) best = k;
            }
            index[i] = best;
        }
    }
    return Policy::constant(model, grid, index);
}

int run_check(Context& ctx) {
    const auto cert = load_certificate(ctx);
    if (!cert) throw ValidationError("check: tabular models need --certificate");
    const LyapunovCertificate checked = certify(ctx.doc.model, *cert);
    const CertificateReport& report = *checked.report;
    write_output(ctx, "certificate.csv", [&](std::ostream& f) { write_certificate_table(f, ctx.header, report); });
    write_output(ctx, "certificate.json", [&](std::ostream& f) { f << certificate_to_json(checked).dump(2) << '\n'; });
    for (Condition c : kConditions) {
        ctx.out << to_string(c) << ": " << (report[c].pass ? "PASS" : "FAIL")
                << " margin=" << format_double(report[c].margin) << '\n';
    }
    return report.all_pass() ? kExitOk : kExitCertificate;
}

int run_solve(Context& ctx, const TimeGrid& grid) {
    const Solution sol = solve(ctx.doc.model, grid);
    write_output(ctx, "value.csv", [&](std::ostream& f) { write_value_table(f, ctx.header, sol.values); });
    write_output(ctx, "policy.csv", [&](std::ostream& f) { write_policy_table(f, ctx.header, sol.policy); });
    ctx.out << "psi(0," << ctx.config.initial_state << ") = " << format_double(sol.values.psi(0, ctx.config.initial_state))
            << '\n';
    return kExitOk;
}

int run_simulate(Context& ctx, const TimeGrid& grid) {
    const RunConfig& c = ctx.config;
    const Model& model = ctx.doc.model;
    std::optional<Policy> policy;
    std::string policy_id;
    std::optional<double> psi0;
    if (c.policy_path) {
        policy = read_policy_file(*c.policy_path, model);
        policy_id = "stored";
    } else if (c.constant_action) {
        policy = constant_policy(model, grid, *c.constant_action);
        policy_id = "constant_" + *c.constant_action;
    } else {
        Solution sol = solve(model, grid);
        psi0 = sol.values.psi(0, c.initial_state);
        policy = std::move(sol.policy);
        policy_id = "optimal";
    }
    SimulationOptions opts;
    opts.workers = c.workers;
    MCEstimate est;
    if (c.dump_paths) {
        const DetailedEstimate detailed = estimate_value_detailed(model, *policy, c.initial_state, c.n_paths,
                                                                  c.master_seed, opts);
        est = detailed.estimate;
        write_output(ctx, "paths.csv", [&](std::ostream& f) { write_paths_table(f, ctx.header, detailed.paths); });
    } else {
        est = estimate_value(model, *policy, c.initial_state, c.n_paths, c.master_seed, opts);
    }
    const std::vector<EstimateRow> rows{{policy_id, c.initial_state, est}};
    write_output(ctx, "estimate.csv", [&](std::ostream& f) { write_estimate_table(f, ctx.header, rows); });
    ctx.out << policy_id << ": log_estimate = " << format_double(est.log_mean)
            << " rel_std_error = " << format_double(est.rel_std_error) << '\n';
    if (psi0) ctx.out << "psi(0," << c.initial_state << ") = " << format_double(*psi0) << '\n';
    return kExitOk;
}

int run_converge(Context& ctx, const TimeGrid& grid) {
    const RunConfig& c = ctx.config;
    const Model& model = ctx.doc.model;
    const auto cert = load_certificate(ctx);
    if (!cert) throw ValidationError("converge: tabular models need --certificate");

    std::vector<WeightLevel> levels;
    if (!c.levels.empty()) {
        for (double v : c.levels) levels.push_back(WeightLevel::from_value(v));
        std::sort(levels.begin(), levels.end());
    } else {
        std::vector<std::size_t> windows = c.windows;
        if (windows.empty()) {
            for (std::size_t w : {5, 10, 20, 40}) {
                if (w < model.state_count()) windows.push_back(w);
            }
            windows.push_back(model.state_count());
        }
        std::sort(windows.begin(), windows.end());
        levels = levels_for_window_sizes(*cert, windows);
    }
    std::vector<State> probes = c.probes.empty() ? default_probes(model, *cert, levels) : c.probes;
    for (State p : probes) require_state(model, p, "--probes");

    const LadderReport report = run_truncation_ladder(model, *cert, levels, grid, probes);
    write_output(ctx, "ladder.csv", [&](std::ostream& f) { write_ladder_table(f, ctx.header, report); });
    for (std::size_t q = 0; q < probes.size(); ++q) {
        ctx.out << "probe " << probes[q] << ": psi0 = " << format_double(report.rungs.back().psi0[q]);
        if (report.rungs.size() > 1) ctx.out << " last diff = " << format_double(report.rungs.back().diff_prev[q]);
        ctx.out << '\n';
    }
    ctx.out << "within bound: " << (report.all_within_bound ? "yes" : "no")
            << ", policies agree from rung " << report.policies_agree_from << '\n';

    if (!c.refine.empty()) {
        std::vector<std::size_t> steps = c.refine;
        std::sort(steps.begin(), steps.end());
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
        const auto rows = run_step_refinement(model, steps, probes.front());
        TableHeader header = ctx.header;
        header.grid = "T=" + format_double(model.horizon()) + ",steps=refine";
        write_output(ctx, "refinement.csv", [&](std::ostream& f) { write_refinement_table(f, header, rows); });
    }
    return kExitOk;
}

int run_compare(Context& ctx, const TimeGrid& grid) {
    const RunConfig& c = ctx.config;
    const Model& model = ctx.doc.model;
    std::vector<Policy> policies;
    policies.push_back(solve(model, grid).policy);
    const std::vector<std::string> ids{"optimal", "constant_min", "constant_max", "constant_mid"};
    for (const char* which : {"min", "max", "mid"}) policies.push_back(constant_policy(model, grid, which));
    SimulationOptions opts;
    opts.workers = c.workers;
    const PolicyComparison cmp = compare_policies(model, policies, c.initial_state, c.n_paths, c.master_seed, opts);
    std::ostringstream ranking, pairs;
    write_compare_tables(ranking, pairs, ctx.header, ids, c.initial_state, cmp);
    write_output(ctx, "compare.csv", [&](std::ostream& f) { f << ranking.str(); });
    write_output(ctx, "compare_pairs.csv", [&](std::ostream& f) { f << pairs.str(); });
    for (std::size_t r = 0; r < cmp.ranking.size(); ++r) {
        const std::size_t p = cmp.ranking[r];
        ctx.out << r + 1 << ". " << ids[p] << ": log_estimate = " << format_double(cmp.estimates[p].log_mean) << '\n';
    }
    return kExitOk;
}

int dispatch(Context& ctx) {
    const RunConfig& c = ctx.config;
    const TimeGrid grid(ctx.doc.model.horizon(), c.steps);
    ctx.header.model_hash = ctx.doc.model.fingerprint();
    ctx.header.grid = "T=" + format_double(grid.horizon()) + ",steps=" + std::to_string(grid.steps());
    ctx.header.config = config_echo(c).dump();
    require_state(ctx.doc.model, c.initial_state, "--initial-state");
    switch (c.command) {
        case Command::check: ctx.header.grid.clear(); return run_check(ctx);
        case Command::solve: return run_solve(ctx, grid);
        case Command::simulate: return run_simulate(ctx, grid);
        case Command::converge: return run_converge(ctx, grid);
        case Command::compare: return run_compare(ctx, grid);
    }
    return kExitValidation;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        config.validate();
        if (config.isa) kernels::set_active_isa(kernels::parse_isa(*config.isa));
        std::error_code ec;
        std::filesystem::create_directories(config.output_dir, ec);
        if (ec) throw IoError("cannot create output directory " + config.output_dir.string() + ": " + ec.message());

        LoadOptions load;
        load.action_points = config.action_points;
        Context ctx{config, out, load_model_file(config.model_path, load), {}, {}};
        const int status = dispatch(ctx);
        write_manifest(ctx, status);
        if (status == kExitCertificate) err << "rsctmdp: certificate check failed\n";
        return status;
    } catch (const CertificateError& e) {
        err << "rsctmdp: certificate error: " << e.what() << '\n';
        return kExitCertificate;
    } catch (const NumericalError& e) {
        err << "rsctmdp: numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IoError& e) {
        err << "rsctmdp: i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "rsctmdp: invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "rsctmdp: error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace rsctmdp::cli
