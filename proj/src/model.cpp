#include "rsctmdp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

namespace {

std::string label(const std::string& where, const std::string& fallback) {
    return where.empty() ? fallback : where;
}

template <typename... Args>
std::string concat(const Args&... args) {
    std::ostringstream os;
    os.precision(17);
    (os << ... << args);
    return os.str();
}

void check_schedule(const Schedule& s, double horizon, const std::string& where) {
    if (s.values.size() != s.breakpoints.size() + 1) {
        throw ParseError(concat(where, ": schedule needs breakpoints.size() + 1 values (got ",
                                s.values.size(), " values for ", s.breakpoints.size(), " breakpoints)"));
    }
    for (std::size_t k = 0; k < s.breakpoints.size(); ++k) {
        const double b = s.breakpoints[k];
        if (!std::isfinite(b) || b <= 0.0 || b >= horizon) {
            throw ParseError(concat(where, ": breakpoint ", b, " outside (0, horizon)"));
        }
        if (k > 0 && !(s.breakpoints[k - 1] < b)) {
            throw ParseError(concat(where, ": breakpoints not ascending"));
        }
    }
    for (double v : s.values) {
        if (!std::isfinite(v)) throw ParseError(concat(where, ": non-finite value"));
    }
}

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < n; ++k) {
            hash_ ^= p[k];
            hash_ *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    template <typename T>
    void range(const std::vector<T>& v) {
        u64(v.size());
        for (const T& x : v) {
            if constexpr (std::is_floating_point_v<T>) {
                f64(x);
            } else {
                u64(static_cast<std::uint64_t>(x));
            }
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string_view to_string(BoundaryMode mode) {
    return mode == BoundaryMode::absorbing ? "absorbing" : "reject";
}

BoundaryMode parse_boundary_mode(std::string_view text) {
    if (text == "absorbing") return BoundaryMode::absorbing;
    if (text == "reject") return BoundaryMode::reject;
    throw ParseError(concat("boundary_mode: expected \"absorbing\" or \"reject\", got \"", text, "\""));
}

Schedule Schedule::constant(double value) { return Schedule{{}, {value}}; }

double Schedule::at(double t) const {
    const auto k = std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin();
    return values[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Model

std::span<const double> Model::actions(State i) const {
    return std::span<const double>(actions_).subspan(slot_offset_[i], action_count(i));
}

std::size_t Model::action_index(State i, double a) const {
    const auto grid = actions(i);
    const auto it = std::lower_bound(grid.begin(), grid.end(), a);
    if (it == grid.end() || *it != a) {
        throw ValidationError(concat("action ", a, " is not on the grid of state ", i));
    }
    return static_cast<std::size_t>(it - grid.begin());
}

std::size_t Model::segment_at(double t) const {
    return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t) -
                                    breakpoints_.begin());
}

std::size_t Model::segment_at_left(double t) const {
    return static_cast<std::size_t>(std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t) -
                                    breakpoints_.begin());
}

double Model::rate(State j, double t, State i, std::size_t k) const {
    const SegmentTable& seg = segments_[segment_at(t)];
    const std::size_t s = slot(i, k);
    if (j == i) return -seg.exit_rate[s];
    for (std::size_t e = seg.entry_offset[s]; e < seg.entry_offset[s + 1]; ++e) {
        if (static_cast<State>(seg.entry_to[e]) == j) return seg.entry_rate[e];
    }
    return 0.0;
}

double Model::exit_rate(double t, State i, std::size_t k) const {
    return segments_[segment_at(t)].exit_rate[slot(i, k)];
}

double Model::cost(double t, State i, std::size_t k) const {
    return segments_[segment_at(t)].cost[slot(i, k)];
}

std::uint64_t Model::fingerprint() const {
    Fnv1a h;
    h.f64(horizon_);
    h.u64(static_cast<std::uint64_t>(boundary_));
    h.range(actions_);
    h.range(slot_offset_);
    h.range(breakpoints_);
    for (const SegmentTable& seg : segments_) {
        h.range(seg.entry_offset);
        h.range(seg.entry_from);
        h.range(seg.entry_to);
        h.range(seg.entry_rate);
        h.range(seg.cost);
    }
    h.range(terminal_);
    return h.value();
}

Model Model::shifted(double s) const {
    if (!(s >= 0.0) || !(s < horizon_)) {
        throw ValidationError(concat("shift ", s, " outside [0, horizon)"));
    }
    Model out = *this;
    out.horizon_ = horizon_ - s;
    const std::size_t first = segment_at(s);
    out.breakpoints_.clear();
    for (std::size_t k = first; k < breakpoints_.size(); ++k) out.breakpoints_.push_back(breakpoints_[k] - s);
    out.segments_.assign(segments_.begin() + static_cast<std::ptrdiff_t>(first), segments_.end());
    std::fill(out.q_star_.begin(), out.q_star_.end(), 0.0);
    for (const SegmentTable& seg : out.segments_) {
        for (State i = 0; i < state_count(); ++i) {
            for (std::size_t k = slot_offset_[i]; k < slot_offset_[i + 1]; ++k) {
                out.q_star_[i] = std::max(out.q_star_[i], seg.exit_rate[k]);
            }
        }
    }
    return out;
}

Model Model::restricted_to(const std::vector<bool>& active) const {
    if (active.size() != state_count()) {
        throw ValidationError("restriction mask does not match the state count");
    }
    Model out = *this;
    for (SegmentTable& seg : out.segments_) {
        SegmentTable kept;
        kept.entry_offset.push_back(0);
        for (State i = 0; i < state_count(); ++i) {
            for (std::size_t s = slot_offset_[i]; s < slot_offset_[i + 1]; ++s) {
                if (active[i]) {
                    for (std::size_t e = seg.entry_offset[s]; e < seg.entry_offset[s + 1]; ++e) {
                        kept.entry_from.push_back(seg.entry_from[e]);
                        kept.entry_to.push_back(seg.entry_to[e]);
                        kept.entry_rate.push_back(seg.entry_rate[e]);
                    }
                    kept.cost.push_back(seg.cost[s]);
                    kept.exit_rate.push_back(seg.exit_rate[s]);
                } else {
                    kept.cost.push_back(0.0);
                    kept.exit_rate.push_back(0.0);
                }
                kept.entry_offset.push_back(kept.entry_rate.size());
            }
        }
        seg = std::move(kept);
    }
    for (State i = 0; i < state_count(); ++i) {
        if (!active[i]) {
            out.terminal_[i] = 0.0;
            out.q_star_[i] = 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModelBuilder

ModelBuilder::ModelBuilder(std::size_t state_count, double horizon)
    : states_(state_count), horizon_(horizon), grids_(state_count), terminal_(state_count, 0.0) {}

ModelBuilder& ModelBuilder::boundary(BoundaryMode mode) {
    boundary_ = mode;
    return *this;
}

ModelBuilder& ModelBuilder::actions(std::vector<double> grid) {
    for (auto& g : grids_) g = grid;
    return *this;
}

ModelBuilder& ModelBuilder::actions(State i, std::vector<double> grid) {
    if (i >= states_) throw ValidationError(concat("actions: state ", i, " outside the window"));
    grids_[i] = std::move(grid);
    return *this;
}

ModelBuilder& ModelBuilder::rate(State from, std::size_t to, std::optional<std::size_t> action, Schedule value,
                                 std::string where) {
    rates_.push_back(RateEntry{from, to, action, std::move(value), std::move(where)});
    return *this;
}

ModelBuilder& ModelBuilder::rate(State from, std::size_t to, std::optional<std::size_t> action, double value,
                                 std::string where) {
    return rate(from, to, action, Schedule::constant(value), std::move(where));
}

ModelBuilder& ModelBuilder::cost(State i, std::optional<std::size_t> action, Schedule value, std::string where) {
    costs_.push_back(CostEntry{i, action, std::move(value), std::move(where)});
    return *this;
}

ModelBuilder& ModelBuilder::cost(State i, std::optional<std::size_t> action, double value, std::string where) {
    return cost(i, action, Schedule::constant(value), std::move(where));
}

ModelBuilder& ModelBuilder::terminal(State i, double value) {
    if (i >= states_) throw ValidationError(concat("terminal: state ", i, " outside the window"));
    terminal_[i] = value;
    return *this;
}

Model ModelBuilder::build() const {
    if (states_ == 0) throw ValidationError("model needs at least one state");
    if (!std::isfinite(horizon_) || !(horizon_ > 0.0)) {
        throw ValidationError(concat("horizon must be positive and finite (got ", horizon_, ")"));
    }
    if (states_ > static_cast<std::size_t>(INT32_MAX)) throw ValidationError("too many states");

    Model m;
    m.horizon_ = horizon_;
    m.boundary_ = boundary_;
    m.slot_offset_.push_back(0);
    for (State i = 0; i < states_; ++i) {
        std::vector<double> grid = grids_[i].empty() ? std::vector<double>{0.0} : grids_[i];
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (!std::isfinite(grid[k])) throw ValidationError(concat("actions of state ", i, ": non-finite value"));
            if (k > 0 && !(grid[k - 1] < grid[k])) {
                throw ValidationError(concat("actions of state ", i, ": grid not strictly ascending"));
            }
        }
        m.actions_.insert(m.actions_.end(), grid.begin(), grid.end());
        m.slot_offset_.push_back(m.actions_.size());
    }
    for (State i = 0; i < states_; ++i) {
        if (!std::isfinite(terminal_[i])) throw ValidationError(concat("terminal(", i, ") is not finite"));
    }
    m.terminal_ = terminal_;

    // Expand per-action entries and reject duplicates.
    using RateKey = std::tuple<State, std::size_t, std::size_t>;
    std::map<RateKey, std::pair<const Schedule*, std::string>> rate_map;
    std::vector<double> all_breaks;
    for (std::size_t r = 0; r < rates_.size(); ++r) {
        const RateEntry& e = rates_[r];
        const std::string where = label(e.where, concat("rate #", r));
        if (e.from >= states_) throw ParseError(concat(where, ": from=", e.from, " outside the window"));
        if (e.to == e.from) throw ParseError(concat(where, ": diagonal entries are derived, not supplied"));
        check_schedule(e.value, horizon_, where);
        for (double v : e.value.values) {
            if (v < 0.0) throw ParseError(concat(where, ": negative off-diagonal rate ", v));
        }
        if (e.to >= states_) {
            if (boundary_ == BoundaryMode::reject) {
                const bool nonzero = std::any_of(e.value.values.begin(), e.value.values.end(),
                                                 [](double v) { return v > 0.0; });
                if (nonzero) {
                    throw ValidationError(
                        concat(where, ": rate from ", e.from, " leaves the window (to=", e.to, ")"));
                }
            }
            continue;
        }
        const std::size_t n_act = m.action_count(e.from);
        if (e.action && *e.action >= n_act) {
            throw ParseError(concat(where, ": action index ", *e.action, " outside the grid of state ", e.from));
        }
        const std::size_t k0 = e.action.value_or(0);
        const std::size_t k1 = e.action ? *e.action + 1 : n_act;
        for (std::size_t k = k0; k < k1; ++k) {
            auto [it, inserted] = rate_map.try_emplace(RateKey{e.from, e.to, k}, &e.value, where);
            if (!inserted) {
                throw ParseError(concat(where, ": duplicate rate entry (from=", e.from, ", to=", e.to,
                                        ", action=", k, "), first given at ", it->second.second));
            }
        }
        all_breaks.insert(all_breaks.end(), e.value.breakpoints.begin(), e.value.breakpoints.end());
    }

    std::vector<const Schedule*> cost_of(m.slot_count(), nullptr);
    std::vector<std::string> cost_where(m.slot_count());
    for (std::size_t c = 0; c < costs_.size(); ++c) {
        const CostEntry& e = costs_[c];
        const std::string where = label(e.where, concat("cost #", c));
        if (e.state >= states_) throw ParseError(concat(where, ": state ", e.state, " outside the window"));
        check_schedule(e.value, horizon_, where);
        const std::size_t n_act = m.action_count(e.state);
        if (e.action && *e.action >= n_act) {
            throw ParseError(concat(where, ": action index ", *e.action, " outside the grid of state ", e.state));
        }
        const std::size_t k0 = e.action.value_or(0);
        const std::size_t k1 = e.action ? *e.action + 1 : n_act;
        for (std::size_t k = k0; k < k1; ++k) {
            const std::size_t s = m.slot(e.state, k);
            if (cost_of[s] != nullptr) {
                throw ParseError(concat(where, ": duplicate cost entry (state=", e.state, ", action=", k,
                                        "), first given at ", cost_where[s]));
            }
            cost_of[s] = &e.value;
            cost_where[s] = where;
        }
        all_breaks.insert(all_breaks.end(), e.value.breakpoints.begin(), e.value.breakpoints.end());
    }

    std::sort(all_breaks.begin(), all_breaks.end());
    all_breaks.erase(std::unique(all_breaks.begin(), all_breaks.end()), all_breaks.end());
    m.breakpoints_ = all_breaks;

    m.q_star_.assign(states_, 0.0);
    for (std::size_t seg_index = 0; seg_index <= all_breaks.size(); ++seg_index) {
        const double t = m.segment_start(seg_index);
        SegmentTable seg;
        seg.entry_offset.push_back(0);
        for (State i = 0; i < states_; ++i) {
            for (std::size_t k = 0; k < m.action_count(i); ++k) {
                const std::size_t s = m.slot(i, k);
                double exit = 0.0;
                // rate_map is ordered by (from, to, action); collect this slot's row.
                for (auto jt = rate_map.lower_bound(RateKey{i, 0, 0});
                     jt != rate_map.end() && std::get<0>(jt->first) == i; ++jt) {
                    if (std::get<2>(jt->first) != k) continue;
                    const double v = jt->second.first->at(t);
                    if (v == 0.0) continue;
                    seg.entry_from.push_back(static_cast<std::int32_t>(i));
                    seg.entry_to.push_back(static_cast<std::int32_t>(std::get<1>(jt->first)));
                    seg.entry_rate.push_back(v);
                    exit += v;
                }
                seg.entry_offset.push_back(seg.entry_rate.size());
                seg.exit_rate.push_back(exit);
                seg.cost.push_back(cost_of[s] ? cost_of[s]->at(t) : 0.0);
                m.q_star_[i] = std::max(m.q_star_[i], exit);
            }
        }
        m.segments_.push_back(std::move(seg));
    }
    return m;
}

// ---------------------------------------------------------------------------
// M/M/infinity

void MMInfinityParams::validate() const {
    auto fail = [](const std::string& field, const std::string& what, double got) {
        throw ValidationError(concat("mm_infinity: ", field, " ", what, " (got ", got, ")"));
    };
    if (!(std::isfinite(lambda) && lambda > 0.0)) fail("lambda", "must be > 0", lambda);
    if (!(std::isfinite(mu_min) && mu_min >= 0.0)) fail("mu_min", "must be >= 0", mu_min);
    if (!(std::isfinite(mu_max) && mu_max >= mu_min)) fail("mu_max", "must be >= mu_min", mu_max);
    if (!(std::isfinite(C1) && C1 >= 0.0)) fail("C1", "must be >= 0", C1);
    if (!std::isfinite(C2)) fail("C2", "must be finite", C2);
    if (N < 2) fail("N", "must be >= 2", static_cast<double>(N));
    if (!(std::isfinite(horizon) && horizon > 0.0)) fail("horizon", "must be > 0", horizon);
    if (action_points < 1) fail("action_points", "must be >= 1", 0.0);
    if (action_points == 1 && mu_min != mu_max) {
        fail("action_points", "must be >= 2 when mu_min < mu_max", 1.0);
    }
}

Model build_mm_infinity(const MMInfinityParams& p) {
    p.validate();
    std::vector<double> grid;
    if (p.mu_min == p.mu_max) {
        grid.push_back(p.mu_min);
    } else {
        const std::size_t n = p.action_points;
        for (std::size_t k = 0; k < n; ++k) {
            grid.push_back(k + 1 == n ? p.mu_max
                                      : p.mu_min + (p.mu_max - p.mu_min) * static_cast<double>(k) /
                                                       static_cast<double>(n - 1));
        }
    }
    if (p.boundary == BoundaryMode::reject) {
        throw ValidationError("mm_infinity: arrivals leave every finite window; use boundary_mode \"absorbing\"");
    }

    ModelBuilder b(p.N, p.horizon);
    b.boundary(p.boundary).actions(grid);
    for (State i = 0; i < p.N; ++i) {
        const double di = static_cast<double>(i);
        if (i + 1 < p.N) b.rate(i, i + 1, std::nullopt, p.lambda);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (i >= 1) b.rate(i, i - 1, k, grid[k] * di);
            b.cost(i, k, p.C1 * di + grid[k]);
        }
        b.terminal(i, -p.C2 * di);
    }
    return b.build();
}

// ---------------------------------------------------------------------------
// Truncation

WeightLevel WeightLevel::from_value(double threshold) {
    if (!(threshold > 0.0)) throw ValidationError(concat("weight level must be positive (got ", threshold, ")"));
    return WeightLevel{std::log(threshold)};
}

std::size_t TruncatedModel::active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

TruncatedModel truncate(const Model& base, std::span<const double> log_weights, WeightLevel level) {
    if (log_weights.size() != base.state_count()) {
        throw ValidationError("weight vector does not match the state count");
    }
    std::vector<bool> active(base.state_count());
    bool any = false;
    for (State i = 0; i < base.state_count(); ++i) {
        active[i] = level.admits(log_weights[i]);
        any = any || active[i];
    }
    if (!any) {
        throw ValidationError(concat("truncation level exp(", level.log_threshold, ") leaves no active state"));
    }
    return TruncatedModel{base.restricted_to(active), level, std::move(active)};
}

}  // namespace rsctmdp
