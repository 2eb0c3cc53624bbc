#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/model.hpp"

namespace rsctmdp {

/// Uniform grid t_k = k T / steps on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    double step() const { return horizon_ / static_cast<double>(steps_); }
    /// t_k; t_steps is exactly the horizon.
    double time(std::size_t k) const {
        return k == steps_ ? horizon_ : horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
    }
    /// Index k with t_k <= t < t_{k+1}, clamped to [0, steps - 1].
    std::size_t cell_of(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t steps_;
};

/// psi(k, i) = log phi(t_k, i) on a TimeGrid.
class ValueFunction {
public:
    ValueFunction(TimeGrid grid, std::size_t states, std::uint64_t model_fingerprint);

    const TimeGrid& grid() const { return grid_; }
    std::size_t state_count() const { return states_; }
    std::uint64_t model_fingerprint() const { return fingerprint_; }

    double psi(std::size_t k, State i) const { return psi_[k * states_ + i]; }
    double phi(std::size_t k, State i) const { return std::exp(psi(k, i)); }
    std::span<const double> row(std::size_t k) const { return {psi_.data() + k * states_, states_}; }
    std::span<double> row(std::size_t k) { return {psi_.data() + k * states_, states_}; }

    bool operator==(const ValueFunction&) const = default;

private:
    TimeGrid grid_;
    std::size_t states_;
    std::uint64_t fingerprint_;
    std::vector<double> psi_;
};

/// Deterministic Markov policy, constant on each cell [t_k, t_{k+1}).
/// Row `steps` holds the minimiser at the horizon itself.
class Policy {
public:
    Policy(TimeGrid grid, std::size_t states);

    /// Uses the same action index at every time for each state.
    static Policy constant(const Model& model, const TimeGrid& grid, std::span<const std::size_t> action_index);

    const TimeGrid& grid() const { return grid_; }
    std::size_t state_count() const { return states_; }

    std::size_t action_index(std::size_t k, State i) const { return index_[k * states_ + i]; }
    double action(std::size_t k, State i) const { return action_[k * states_ + i]; }
    void set(std::size_t k, State i, std::size_t index, double action);
    /// f(t, i) under the right-continuous convention.
    std::size_t action_index_at(double t, State i) const { return action_index(grid_.cell_of(t), i); }

    bool operator==(const Policy&) const = default;

private:
    TimeGrid grid_;
    std::size_t states_;
    std::vector<std::size_t> index_;
    std::vector<double> action_;
};

/// Minimum over the action grid of the log-domain Bellman rate
///   r(a) = c(t,i,a) - q(t,i,a) + sum_{j != i} q(j|t,i,a) exp(psi(j) - psi(i)),
/// with the smallest minimising action on ties.
struct BellmanValue {
    double rate = 0.0;
    std::size_t action_index = 0;
    double action = 0.0;
};

BellmanValue bellman_rhs(const Model& model, std::span<const double> psi_row, double t, State i);

struct Solution {
    ValueFunction values;
    Policy policy;
};

/// Backward classical RK4 on d psi / ds = -r_min(s, psi) from psi(T) = g.
/// The policy row k is the minimiser at (t_k, psi(k, .)). Throws
/// NumericalError when psi stops being finite.
Solution solve(const Model& model, const TimeGrid& grid);

/// Re-evaluates the minimiser at every node of `values`.
Policy extract_policy(const ValueFunction& values, const Model& model);

/// Exact solution of the single-action backward equation:
/// row `i` of exp((T - s)(Q + diag c)) exp(g). Requires a time-homogeneous
/// model with one action per state.
double linear_oracle(const Model& model, double s, State i);
std::vector<double> linear_oracle(const Model& model, double s);

/// Solves the model shifted to start at t_s over the remaining grid cells and
/// returns max_i |psi_shifted(0, i) - psi(s_index, i)|.
double shift_consistency(const Model& model, const ValueFunction& values, std::size_t s_index);

struct BoundViolation {
    State state = 0;
    double psi0 = 0.0;
    double bound_log = 0.0;
};

/// States where psi(0, i) exceeds value_bound by more than `slack`.
std::vector<BoundViolation> check_value_bound(const ValueFunction& values, const LyapunovCertificate& cert,
                                              double slack = 1e-6);

}  // namespace rsctmdp
