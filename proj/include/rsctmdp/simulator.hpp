#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsctmdp/model.hpp"
#include "rsctmdp/solver.hpp"

namespace rsctmdp {

struct SimulationOptions {
    /// Paths with more accepted jumps than this abort with NumericalError.
    std::size_t explosion_guard = 1'000'000;
    /// Worker threads for estimate_value; 0 picks the hardware concurrency.
    unsigned workers = 0;
};

/// One realisation of the controlled jump process on [0, T].
struct PathOutcome {
    std::vector<double> jump_times;
    std::vector<State> visited_states;
    /// int_0^T c(t, X_t, f(t, X_t)) dt + g(X_T)
    double log_utility = 0.0;
    std::size_t jump_count = 0;
};

/// Log-domain Monte Carlo estimate of E[exp(int c dt + g)].
struct MCEstimate {
    std::size_t n_paths = 0;
    double log_mean = 0.0;
    double log_second_moment = 0.0;
    /// Standard error of the mean in the linear domain (may overflow to inf).
    double std_error = 0.0;
    /// std_error / estimate, computed without forming either.
    double rel_std_error = 0.0;
    std::uint64_t master_seed = 0;

    double estimate() const;
    bool operator==(const MCEstimate&) const = default;
};

/// Per-path record kept by estimate_value_detailed.
struct PathSummary {
    std::size_t jumps = 0;
    double log_utility = 0.0;
};

struct DetailedEstimate {
    MCEstimate estimate;
    std::vector<PathSummary> paths;
};

/// Simulates by thinning against q*(i): candidate epochs arrive at rate
/// q*(i) and are accepted with probability q(tau, i, f(tau, i)) / q*(i).
/// Uses random stream `stream` of `master_seed`.
PathOutcome simulate_path(const Model& model, const Policy& policy, State i0, std::uint64_t master_seed,
                          std::uint64_t stream = 0, const SimulationOptions& options = {});

/// Path p draws from stream p of `master_seed`, so the result does not depend
/// on the number of workers. Aggregation runs in ascending path order.
MCEstimate estimate_value(const Model& model, const Policy& policy, State i0, std::size_t n_paths,
                          std::uint64_t master_seed, const SimulationOptions& options = {});
DetailedEstimate estimate_value_detailed(const Model& model, const Policy& policy, State i0, std::size_t n_paths,
                                         std::uint64_t master_seed, const SimulationOptions& options = {});

/// Aggregates per-path log-utilities into an MCEstimate.
MCEstimate aggregate_log_utilities(std::span<const double> log_utilities, std::uint64_t master_seed);

/// Jump-destination distribution of slot (i, k) in `segment`, aligned with the
/// segment's entries for that slot. Empty when the slot has no exit rate.
std::vector<double> destination_probabilities(const Model& model, std::size_t segment, State i, std::size_t k);

struct PolicyComparison {
    std::vector<MCEstimate> estimates;
    /// difference[a][b] = estimate_a - estimate_b (linear domain).
    std::vector<std::vector<double>> difference;
    /// sqrt(se_a^2 + se_b^2)
    std::vector<std::vector<double>> combined_error;
    /// Standard error of the per-path paired difference, sharper under
    /// common random numbers.
    std::vector<std::vector<double>> paired_error;
    /// Policy indices by ascending estimate.
    std::vector<std::size_t> ranking;
};

/// Estimates every policy on the same per-path streams (common random numbers).
PolicyComparison compare_policies(const Model& model, std::span<const Policy> policies, State i0,
                                  std::size_t n_paths, std::uint64_t master_seed,
                                  const SimulationOptions& options = {});

}  // namespace rsctmdp
