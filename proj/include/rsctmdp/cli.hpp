#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsctmdp/model.hpp"

namespace rsctmdp::cli {

enum class Command { check, solve, simulate, converge, compare };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

/// Fixed default seed; runs are reproducible unless a seed is given.
inline constexpr std::uint64_t kDefaultSeed = 20240917;

/// Exit status of run(). Each error class has its own code.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitCertificate = 2,
    kExitNumerical = 3,
    kExitIo = 4,
};

struct RunConfig {
    Command command = Command::solve;
    std::filesystem::path model_path;
    std::size_t steps = 2000;
    std::optional<std::size_t> action_points;
    std::size_t n_paths = 100000;
    std::uint64_t master_seed = kDefaultSeed;
    /// Truncation thresholds on V; `windows` selects them by active-set size instead.
    std::vector<double> levels;
    std::vector<std::size_t> windows;
    std::vector<State> probes;
    /// Extra step counts for a time-step refinement study in `converge`.
    std::vector<std::size_t> refine;
    std::filesystem::path output_dir = ".";
    bool timestamp = true;
    unsigned workers = 0;
    std::optional<std::filesystem::path> certificate_path;
    std::optional<std::filesystem::path> policy_path;
    /// "min", "max" or "mid": simulate a constant policy instead of the optimum.
    std::optional<std::string> constant_action;
    State initial_state = 0;
    bool dump_paths = false;
    /// "scalar" or "avx2"; empty keeps the detected ISA.
    std::optional<std::string> isa;

    /// Throws ValidationError when a field is out of range for the command.
    void validate() const;
};

/// Executes one command. A short summary goes to `out`, diagnostics to
/// `err`; the return value is an ExitCode.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace rsctmdp::cli
