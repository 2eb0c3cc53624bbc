#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/model.hpp"
#include "rsctmdp/solver.hpp"

namespace rsctmdp {

/// One solve of the ladder, on the model truncated at `level`.
struct LadderRung {
    WeightLevel level;
    std::size_t active_count = 0;
    /// Indexed like LadderReport::probes.
    std::vector<double> psi0;
    /// |psi0 - previous rung's psi0|; empty on the first rung.
    std::vector<double> diff_prev;
    std::vector<double> bound_log;
    std::vector<bool> within_bound;
    /// Policy actions at each probe over the grid nodes.
    std::vector<std::vector<double>> probe_policy;
    /// max q*(i) over the active set, and whether it stays below M * level.
    double max_q_star = 0.0;
    bool rates_bounded = true;
};

struct LadderReport {
    std::vector<State> probes;
    std::vector<LadderRung> rungs;
    /// Smallest rung index from which the probe policies no longer change.
    std::size_t policies_agree_from = 0;
    bool all_within_bound = true;
    bool all_rates_bounded = true;
    /// Successive differences strictly decrease at every probe.
    bool diffs_decreasing = true;
};

/// Thresholds giving active sets of exactly the requested sizes. Throws when
/// ties in the weights make a size unreachable.
std::vector<WeightLevel> levels_for_window_sizes(const LyapunovCertificate& cert, std::span<const std::size_t> sizes);

/// Probe states used when none are given: 0 and the midpoint of the
/// smallest active set, so they sit inside every rung.
std::vector<State> default_probes(const Model& base, const LyapunovCertificate& cert,
                                  std::span<const WeightLevel> levels);

/// Solves the truncated models for each level in ascending order. The
/// certificate is checked against `base` when it carries no report.
LadderReport run_truncation_ladder(const Model& base, const LyapunovCertificate& cert,
                                   std::span<const WeightLevel> levels, const TimeGrid& grid,
                                   std::span<const State> probes);

struct RefinementRow {
    std::size_t steps = 0;
    double psi0 = 0.0;
    /// |psi0 - previous row|; NaN on the first row.
    double diff_prev = 0.0;
    /// Observed order from the last two differences; NaN until available
    /// or when a difference vanishes.
    double observed_order = 0.0;
};

std::vector<RefinementRow> run_step_refinement(const Model& model, std::span<const std::size_t> grid_steps,
                                               State probe);

}  // namespace rsctmdp
