#include "rsctmdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rsctmdp/dense_expm.hpp"
#include "rsctmdp/errors.hpp"
#include "rsctmdp/kernels/kernels.hpp"

namespace rsctmdp {

// ---------------------------------------------------------------------------
// Grid, value and policy containers

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(std::isfinite(horizon) && horizon > 0.0)) throw ValidationError("time grid: horizon must be positive");
    if (steps == 0) throw ValidationError("time grid: steps must be >= 1");
}

std::size_t TimeGrid::cell_of(double t) const {
    if (!(t > 0.0)) return 0;
    auto k = static_cast<std::size_t>(std::min(std::floor(t / step()), static_cast<double>(steps_ - 1)));
    // Division rounding can land one cell off; settle against the node times.
    while (k > 0 && time(k) > t) --k;
    while (k + 1 < steps_ && time(k + 1) <= t) ++k;
    return k;
}

ValueFunction::ValueFunction(TimeGrid grid, std::size_t states, std::uint64_t model_fingerprint)
    : grid_(grid), states_(states), fingerprint_(model_fingerprint), psi_((grid.steps() + 1) * states, 0.0) {}

Policy::Policy(TimeGrid grid, std::size_t states)
    : grid_(grid), states_(states), index_((grid.steps() + 1) * states, 0), action_((grid.steps() + 1) * states, 0.0) {}

Policy Policy::constant(const Model& model, const TimeGrid& grid, std::span<const std::size_t> action_index) {
    if (action_index.size() != model.state_count()) {
        throw ValidationError("constant policy: one action index per state required");
    }
    Policy p(grid, model.state_count());
    for (State i = 0; i < model.state_count(); ++i) {
        if (action_index[i] >= model.action_count(i)) {
            throw ValidationError("constant policy: action index outside the grid of state " + std::to_string(i));
        }
        const double a = model.actions(i)[action_index[i]];
        for (std::size_t k = 0; k <= grid.steps(); ++k) p.set(k, i, action_index[i], a);
    }
    return p;
}

void Policy::set(std::size_t k, State i, std::size_t index, double action) {
    index_[k * states_ + i] = index;
    action_[k * states_ + i] = action;
}

// ---------------------------------------------------------------------------
// Bellman rate

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_row(const Model& model, std::span<const double> psi_row) {
    if (psi_row.size() != model.state_count()) {
        throw ValidationError("psi row has " + std::to_string(psi_row.size()) + " entries, model has " +
                              std::to_string(model.state_count()) + " states");
    }
}

/// Evaluates the minimised Bellman rate for every state of one segment.
class BellmanRow {
public:
    explicit BellmanRow(const Model& model) : model_(model) {
        std::size_t most = 0;
        for (std::size_t s = 0; s < model.segment_count(); ++s) {
            most = std::max(most, model.segment(s).entry_rate.size());
        }
        terms_.resize(most);
    }

    void evaluate(std::size_t segment, std::span<const double> psi, std::span<double> rate,
                  std::span<std::size_t> index) {
        const SegmentTable& seg = model_.segment(segment);
        const std::size_t entries = seg.entry_rate.size();
        kernels::weighted_exp_gather(seg.entry_rate, seg.entry_to, seg.entry_from, psi,
                                     std::span<double>(terms_.data(), entries));
        for (State i = 0; i < model_.state_count(); ++i) {
            double best = kInf;
            std::size_t best_k = 0;
            for (std::size_t k = 0; k < model_.action_count(i); ++k) {
                const std::size_t slot = model_.slot(i, k);
                double sum = 0.0;
                for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) sum += terms_[e];
                const double r = (seg.cost[slot] - seg.exit_rate[slot]) + sum;
                if (k == 0 || r < best) {
                    best = r;
                    best_k = k;
                }
            }
            rate[i] = best;
            index[i] = best_k;
        }
    }

private:
    const Model& model_;
    std::vector<double> terms_;
};

[[noreturn]] void non_finite(std::size_t k, State i) {
    std::ostringstream os;
    os << "non-finite psi at (k=" << k << ", i=" << i
       << "): exp(psi(j) - psi(i)) left the double range; enlarge the truncation window or review the scaling";
    throw NumericalError(os.str());
}

void require_finite(std::span<const double> v, std::size_t k) {
    for (State i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) non_finite(k, i);
    }
}

void check_grid(const Model& model, const TimeGrid& grid) {
    if (std::abs(grid.horizon() - model.horizon()) > 1e-12 * model.horizon()) {
        throw ValidationError("grid horizon does not match the model horizon");
    }
}

}  // namespace

BellmanValue bellman_rhs(const Model& model, std::span<const double> psi_row, double t, State i) {
    check_row(model, psi_row);
    if (i >= model.state_count()) throw ValidationError("bellman_rhs: state outside the window");
    for (double v : psi_row) {
        if (!std::isfinite(v)) throw ValidationError("bellman_rhs: psi row must be finite");
    }
    if (model.action_count(i) == 0) throw ValidationError("bellman_rhs: empty action grid");

    const SegmentTable& seg = model.segment(model.segment_at(t));
    BellmanValue best{kInf, 0, 0.0};
    for (std::size_t k = 0; k < model.action_count(i); ++k) {
        const std::size_t slot = model.slot(i, k);
        double sum = 0.0;
        for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) {
            sum += seg.entry_rate[e] * std::exp(psi_row[static_cast<std::size_t>(seg.entry_to[e])] - psi_row[i]);
        }
        const double r = (seg.cost[slot] - seg.exit_rate[slot]) + sum;
        if (k == 0 || r < best.rate) best = BellmanValue{r, k, model.actions(i)[k]};
    }
    return best;
}

// ---------------------------------------------------------------------------
// Backward integration

Solution solve(const Model& model, const TimeGrid& grid) {
    check_grid(model, grid);
    const std::size_t n = model.state_count();
    const std::size_t steps = grid.steps();
    const double h = grid.step();

    ValueFunction values(grid, n, model.fingerprint());
    Policy policy(grid, n);
    BellmanRow bellman(model);

    std::vector<double> k1(n), k2(n), k3(n), k4(n), y(n), r_node(n);
    std::vector<std::size_t> idx(n), scratch_idx(n);

    auto record_policy = [&](std::size_t k) {
        for (State i = 0; i < n; ++i) policy.set(k, i, idx[i], model.actions(i)[idx[i]]);
    };

    {
        auto terminal = values.row(steps);
        std::copy(model.terminal().begin(), model.terminal().end(), terminal.begin());
        bellman.evaluate(model.segment_at(grid.time(steps)), terminal, r_node, idx);
        require_finite(r_node, steps);
        record_policy(steps);
    }

    for (std::size_t k = steps; k-- > 0;) {
        const double t1 = grid.time(k + 1);
        const double t0 = grid.time(k);
        const double tm = t0 + 0.5 * h;
        const auto psi = values.row(k + 1);

        // Stage 1 sits at t_{k+1}, approached from the left.
        const std::size_t seg1 = model.segment_at_left(t1);
        if (seg1 == model.segment_at(t1)) {
            std::copy(r_node.begin(), r_node.end(), k1.begin());
        } else {
            bellman.evaluate(seg1, psi, k1, scratch_idx);
            require_finite(k1, k + 1);
        }
        const std::size_t seg_mid = model.segment_at(tm);
        for (State i = 0; i < n; ++i) y[i] = psi[i] + 0.5 * h * k1[i];
        bellman.evaluate(seg_mid, y, k2, scratch_idx);
        require_finite(k2, k);
        for (State i = 0; i < n; ++i) y[i] = psi[i] + 0.5 * h * k2[i];
        bellman.evaluate(seg_mid, y, k3, scratch_idx);
        require_finite(k3, k);
        const std::size_t seg0 = model.segment_at(t0);
        for (State i = 0; i < n; ++i) y[i] = psi[i] + h * k3[i];
        bellman.evaluate(seg0, y, k4, scratch_idx);
        require_finite(k4, k);

        auto next = values.row(k);
        for (State i = 0; i < n; ++i) next[i] = psi[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        require_finite(next, k);

        bellman.evaluate(seg0, next, r_node, idx);
        require_finite(r_node, k);
        record_policy(k);
    }
    return Solution{std::move(values), std::move(policy)};
}

Policy extract_policy(const ValueFunction& values, const Model& model) {
    if (values.model_fingerprint() != model.fingerprint() || values.state_count() != model.state_count()) {
        throw ValidationError("extract_policy: value function was not produced for this model");
    }
    check_grid(model, values.grid());
    const std::size_t n = model.state_count();
    Policy policy(values.grid(), n);
    BellmanRow bellman(model);
    std::vector<double> rate(n);
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k <= values.grid().steps(); ++k) {
        bellman.evaluate(model.segment_at(values.grid().time(k)), values.row(k), rate, idx);
        for (State i = 0; i < n; ++i) policy.set(k, i, idx[i], model.actions(i)[idx[i]]);
    }
    return policy;
}

// ---------------------------------------------------------------------------
// Oracles and diagnostics

std::vector<double> linear_oracle(const Model& model, double s) {
    if (!model.time_homogeneous()) throw ValidationError("linear_oracle: rates must be time-homogeneous");
    const std::size_t n = model.state_count();
    for (State i = 0; i < n; ++i) {
        if (model.action_count(i) != 1) throw ValidationError("linear_oracle: every state needs exactly one action");
    }
    if (!(s >= 0.0 && s <= model.horizon())) throw ValidationError("linear_oracle: s outside [0, T]");

    const SegmentTable& seg = model.segment(0);
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (State i = 0; i < n; ++i) {
        const std::size_t slot = model.slot(i, 0);
        for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) {
            gen(static_cast<Eigen::Index>(i), seg.entry_to[e]) += seg.entry_rate[e];
        }
        gen(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += seg.cost[slot] - seg.exit_rate[slot];
    }
    Eigen::VectorXd terminal(static_cast<Eigen::Index>(n));
    for (State i = 0; i < n; ++i) terminal(static_cast<Eigen::Index>(i)) = std::exp(model.terminal(i));

    const Eigen::VectorXd phi = dense_expm((model.horizon() - s) * gen) * terminal;
    return std::vector<double>(phi.data(), phi.data() + phi.size());
}

double linear_oracle(const Model& model, double s, State i) {
    if (i >= model.state_count()) throw ValidationError("linear_oracle: state outside the window");
    return linear_oracle(model, s)[i];
}

double shift_consistency(const Model& model, const ValueFunction& values, std::size_t s_index) {
    if (values.model_fingerprint() != model.fingerprint()) {
        throw ValidationError("shift_consistency: value function was not produced for this model");
    }
    const TimeGrid& grid = values.grid();
    if (s_index > grid.steps()) throw ValidationError("shift_consistency: index outside the grid");
    for (double b : model.breakpoints()) {
        const double cells = b / grid.step();
        if (std::abs(cells - std::round(cells)) > 1e-9) {
            throw ValidationError("shift_consistency: schedule breakpoint " + std::to_string(b) +
                                  " is not aligned with the time grid");
        }
    }
    double worst = 0.0;
    if (s_index == grid.steps()) {
        for (State i = 0; i < model.state_count(); ++i) {
            worst = std::max(worst, std::abs(model.terminal(i) - values.psi(s_index, i)));
        }
        return worst;
    }
    const double ts = grid.time(s_index);
    const Model shifted = model.shifted(ts);
    const Solution sub = solve(shifted, TimeGrid(shifted.horizon(), grid.steps() - s_index));
    for (State i = 0; i < model.state_count(); ++i) {
        worst = std::max(worst, std::abs(sub.values.psi(0, i) - values.psi(s_index, i)));
    }
    return worst;
}

std::vector<BoundViolation> check_value_bound(const ValueFunction& values, const LyapunovCertificate& cert,
                                              double slack) {
    if (cert.state_count() != values.state_count()) {
        throw ValidationError("check_value_bound: certificate and value function differ in state count");
    }
    std::vector<BoundViolation> out;
    for (State i = 0; i < values.state_count(); ++i) {
        const double bound = value_bound(cert, values.grid().horizon(), i);
        if (!(values.psi(0, i) <= bound + slack)) out.push_back(BoundViolation{i, values.psi(0, i), bound});
    }
    return out;
}

}  // namespace rsctmdp
