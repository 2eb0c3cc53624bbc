#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsctmdp {

using State = std::size_t;

/// How transitions that point outside the state window are treated.
enum class BoundaryMode {
    absorbing,  ///< drop them, so the window edge holds the mass
    reject,     ///< refuse to build the model
};

std::string_view to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(std::string_view text);

/// Piecewise-constant, right-continuous function of time:
/// `values[k]` holds on `[breakpoints[k-1], breakpoints[k])`.
struct Schedule {
    std::vector<double> breakpoints;
    std::vector<double> values;

    static Schedule constant(double value);

    bool is_constant() const { return breakpoints.empty(); }
    double at(double t) const;

    bool operator==(const Schedule&) const = default;
};

/// Rates and costs of one time segment in flat slot layout.
///
/// A slot is a (state, action index) pair numbered `slot_offset[i] + k`.
/// Off-diagonal entries of slot `s` occupy `[entry_offset[s], entry_offset[s+1])`
/// sorted by destination; the diagonal is never stored, it is `-exit_rate[s]`.
struct SegmentTable {
    std::vector<std::size_t> entry_offset;
    std::vector<std::int32_t> entry_from;
    std::vector<std::int32_t> entry_to;
    std::vector<double> entry_rate;
    std::vector<double> cost;
    std::vector<double> exit_rate;

    bool operator==(const SegmentTable&) const = default;
};

/// A finite-window CTMDP instance. Immutable once built; see ModelBuilder.
class Model {
public:
    std::size_t state_count() const { return terminal_.size(); }
    double horizon() const { return horizon_; }
    BoundaryMode boundary_mode() const { return boundary_; }

    std::span<const double> actions(State i) const;
    std::size_t action_count(State i) const { return slot_offset_[i + 1] - slot_offset_[i]; }
    /// Index of `a` in the action grid of `i`; exact match required.
    std::size_t action_index(State i, double a) const;

    std::size_t slot(State i, std::size_t k) const { return slot_offset_[i] + k; }
    std::size_t slot_count() const { return slot_offset_.back(); }
    std::span<const std::size_t> slot_offsets() const { return slot_offset_; }

    std::span<const double> breakpoints() const { return breakpoints_; }
    std::size_t segment_count() const { return segments_.size(); }
    /// Segment holding `[t, t + eps)`.
    std::size_t segment_at(double t) const;
    /// Segment holding `(t - eps, t]`.
    std::size_t segment_at_left(double t) const;
    double segment_start(std::size_t s) const { return s == 0 ? 0.0 : breakpoints_[s - 1]; }
    const SegmentTable& segment(std::size_t s) const { return segments_[s]; }
    bool time_homogeneous() const { return breakpoints_.empty(); }

    /// q(j | t, i, a_k), diagonal included.
    double rate(State j, double t, State i, std::size_t k) const;
    /// q(t, i, a_k) = -q(i | t, i, a_k).
    double exit_rate(double t, State i, std::size_t k) const;
    double cost(double t, State i, std::size_t k) const;
    double terminal(State i) const { return terminal_[i]; }
    std::span<const double> terminal() const { return terminal_; }

    /// Supremum over time and the action grid of the exit rate of `i`.
    double q_star(State i) const { return q_star_[i]; }
    std::span<const double> q_star() const { return q_star_; }

    /// 64-bit FNV-1a digest of every numeric field.
    std::uint64_t fingerprint() const;

    /// Same primitives restricted to `[s, T]` and re-based to start at 0.
    Model shifted(double s) const;

    /// States with `active[i] == false` lose all outgoing rates, running cost
    /// and terminal cost. Rates into them are kept.
    Model restricted_to(const std::vector<bool>& active) const;

    bool operator==(const Model&) const = default;

private:
    friend class ModelBuilder;

    double horizon_ = 0.0;
    BoundaryMode boundary_ = BoundaryMode::absorbing;
    std::vector<double> actions_;
    std::vector<std::size_t> slot_offset_;
    std::vector<double> breakpoints_;
    std::vector<SegmentTable> segments_;
    std::vector<double> terminal_;
    std::vector<double> q_star_;
};

/// Collects primitives and validates them into a Model.
///
/// Rates and costs may omit the action index, in which case they apply to
/// every action of the state. `where` labels, when given, are used in error
/// messages to point at the source of an entry.
class ModelBuilder {
public:
    ModelBuilder(std::size_t state_count, double horizon);

    ModelBuilder& boundary(BoundaryMode mode);
    ModelBuilder& actions(std::vector<double> grid);
    ModelBuilder& actions(State i, std::vector<double> grid);
    ModelBuilder& rate(State from, std::size_t to, std::optional<std::size_t> action, Schedule value,
                       std::string where = {});
    ModelBuilder& rate(State from, std::size_t to, std::optional<std::size_t> action, double value,
                       std::string where = {});
    ModelBuilder& cost(State i, std::optional<std::size_t> action, Schedule value, std::string where = {});
    ModelBuilder& cost(State i, std::optional<std::size_t> action, double value, std::string where = {});
    ModelBuilder& terminal(State i, double value);

    Model build() const;

private:
    struct RateEntry {
        State from;
        std::size_t to;
        std::optional<std::size_t> action;
        Schedule value;
        std::string where;
    };
    struct CostEntry {
        State state;
        std::optional<std::size_t> action;
        Schedule value;
        std::string where;
    };

    std::size_t states_;
    double horizon_;
    BoundaryMode boundary_ = BoundaryMode::absorbing;
    std::vector<std::vector<double>> grids_;
    std::vector<RateEntry> rates_;
    std::vector<CostEntry> costs_;
    std::vector<double> terminal_;
};

/// Parameters of the controlled M/M/infinity queue: arrivals at rate `lambda`,
/// a common service rate chosen from `[mu_min, mu_max]`, running cost
/// `C1 * i + a` and terminal cost `-C2 * i`.
struct MMInfinityParams {
    double lambda = 1.0;
    double mu_min = 0.0;
    double mu_max = 2.0;
    double C1 = 1.0;
    double C2 = 0.0;
    std::size_t N = 40;
    double horizon = 1.0;
    std::size_t action_points = 21;
    BoundaryMode boundary = BoundaryMode::absorbing;

    /// Throws ValidationError naming the first offending field.
    void validate() const;
    bool operator==(const MMInfinityParams&) const = default;
};

Model build_mm_infinity(const MMInfinityParams& params);

/// Threshold on the Lyapunov weight, held in log form because weights such
/// as `exp(d * i)` leave the double range quickly.
struct WeightLevel {
    double log_threshold = 0.0;

    static WeightLevel from_value(double threshold);
    static WeightLevel from_log(double log_threshold) { return WeightLevel{log_threshold}; }

    bool admits(double log_weight) const { return log_weight <= log_threshold; }
    auto operator<=>(const WeightLevel&) const = default;
};

struct TruncatedModel {
    Model model;
    WeightLevel level;
    std::vector<bool> active;

    std::size_t active_count() const;
};

/// Keeps the dynamics on `{i : V(i) <= level}` and makes every other state
/// absorbing with zero running and terminal cost.
TruncatedModel truncate(const Model& base, std::span<const double> log_weights, WeightLevel level);

}  // namespace rsctmdp
