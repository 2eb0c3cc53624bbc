#include "rsctmdp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "rsctmdp/errors.hpp"
#include "rsctmdp/kernels/kernels.hpp"
#include "rsctmdp/rng.hpp"

namespace rsctmdp {

namespace {

/// Maximal interval on which the policy action and the model segment of one
/// state are both constant.
struct Piece {
    double start;
    double end;
    std::size_t slot;
    std::size_t segment;
    double cost;
    double exit_rate;
};

/// Per-state piecewise-constant view of (cost, exit rate, slot) along [0, T]
/// under a fixed policy.
class PolicyTrack {
public:
    PolicyTrack(const Model& model, const Policy& policy) {
        const TimeGrid& grid = policy.grid();
        std::vector<double> cuts;
        cuts.reserve(grid.steps() + model.breakpoints().size() + 1);
        for (std::size_t k = 0; k <= grid.steps(); ++k) cuts.push_back(grid.time(k));
        cuts.insert(cuts.end(), model.breakpoints().begin(), model.breakpoints().end());
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        offset_.push_back(0);
        for (State i = 0; i < model.state_count(); ++i) {
            for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
                const double a = cuts[m];
                const double b = cuts[m + 1];
                const std::size_t seg = model.segment_at(a);
                const std::size_t slot = model.slot(i, policy.action_index_at(a, i));
                const bool extend = pieces_.size() > offset_.back() && pieces_.back().slot == slot &&
                                    pieces_.back().segment == seg;
                if (extend) {
                    pieces_.back().end = b;
                } else {
                    const SegmentTable& table = model.segment(seg);
                    pieces_.push_back(Piece{a, b, slot, seg, table.cost[slot], table.exit_rate[slot]});
                }
            }
            offset_.push_back(pieces_.size());
        }
        starts_.reserve(pieces_.size());
        for (const Piece& p : pieces_) starts_.push_back(p.start);
    }

    std::size_t locate(State i, double t) const {
        const auto first = starts_.begin() + static_cast<std::ptrdiff_t>(offset_[i]);
        const auto last = starts_.begin() + static_cast<std::ptrdiff_t>(offset_[i + 1]);
        const auto it = std::upper_bound(first, last, t);
        return static_cast<std::size_t>((it == first ? it : it - 1) - starts_.begin());
    }

    const Piece& at(State i, double t) const { return pieces_[locate(i, t)]; }

    /// int_a^b c(t, i, f(t, i)) dt for 0 <= a <= b <= T.
    double integrate(State i, double a, double b) const {
        std::size_t p = locate(i, a);
        const std::size_t last = offset_[i + 1];
        double total = 0.0;
        while (true) {
            const Piece& piece = pieces_[p];
            const bool final = p + 1 == last || b <= piece.end;
            const double hi = final ? b : piece.end;
            const double lo = std::max(a, piece.start);
            total += piece.cost * (hi - lo);
            if (final) return total;
            ++p;
        }
    }

private:
    std::vector<Piece> pieces_;
    std::vector<double> starts_;
    std::vector<std::size_t> offset_;
};

void check_inputs(const Model& model, const Policy& policy, State i0) {
    if (policy.state_count() != model.state_count()) {
        throw ValidationError("policy covers " + std::to_string(policy.state_count()) + " states, model has " +
                              std::to_string(model.state_count()));
    }
    if (std::abs(policy.grid().horizon() - model.horizon()) > 1e-12 * model.horizon()) {
        throw ValidationError("policy grid does not cover the model horizon");
    }
    for (std::size_t k = 0; k <= policy.grid().steps(); ++k) {
        for (State i = 0; i < model.state_count(); ++i) {
            if (policy.action_index(k, i) >= model.action_count(i)) {
                throw ValidationError("policy action outside the grid of state " + std::to_string(i));
            }
        }
    }
    if (i0 >= model.state_count()) throw ValidationError("initial state outside the window");
}

/// Thinning loop; `record` collects the jump chain when non-null.
PathSummary run_path(const Model& model, const PolicyTrack& track, State i0, CounterStream& rng,
                     std::size_t guard, PathOutcome* record) {
    const double horizon = model.horizon();
    double t = 0.0;
    State i = i0;
    double log_u = 0.0;
    std::size_t jumps = 0;
    while (true) {
        const double qs = model.q_star(i);
        if (!(qs > 0.0)) {
            log_u += track.integrate(i, t, horizon);
            break;
        }
        const double tau = t + rng.exponential(qs);
        if (tau >= horizon) {
            log_u += track.integrate(i, t, horizon);
            break;
        }
        log_u += track.integrate(i, t, tau);
        const Piece& piece = track.at(i, tau);
        if (rng.uniform() * qs < piece.exit_rate) {
            const SegmentTable& seg = model.segment(piece.segment);
            const std::size_t first = seg.entry_offset[piece.slot];
            const std::size_t last = seg.entry_offset[piece.slot + 1];
            const double target = rng.uniform() * piece.exit_rate;
            std::size_t e = first;
            double cumulative = seg.entry_rate[e];
            while (e + 1 < last && cumulative <= target) cumulative += seg.entry_rate[++e];
            i = static_cast<State>(seg.entry_to[e]);
            if (++jumps >= guard) {
                throw NumericalError("explosion guard tripped after " + std::to_string(jumps) +
                                     " jumps; the model may be explosive");
            }
            if (record != nullptr) {
                record->jump_times.push_back(tau);
                record->visited_states.push_back(i);
            }
        }
        t = tau;
    }
    log_u += model.terminal(i);
    return PathSummary{jumps, log_u};
}

}  // namespace

double MCEstimate::estimate() const { return std::exp(log_mean); }

PathOutcome simulate_path(const Model& model, const Policy& policy, State i0, std::uint64_t master_seed,
                          std::uint64_t stream, const SimulationOptions& options) {
    check_inputs(model, policy, i0);
    const PolicyTrack track(model, policy);
    CounterStream rng(master_seed, stream);
    PathOutcome out;
    out.visited_states.push_back(i0);
    const PathSummary s = run_path(model, track, i0, rng, options.explosion_guard, &out);
    out.log_utility = s.log_utility;
    out.jump_count = s.jumps;
    return out;
}

MCEstimate aggregate_log_utilities(std::span<const double> u, std::uint64_t master_seed) {
    if (u.empty()) throw ValidationError("aggregate_log_utilities: no paths");
    const auto n = static_cast<double>(u.size());
    const double shift = kernels::max_value(u);
    if (!std::isfinite(shift)) throw NumericalError("non-finite path log-utility");
    const kernels::ExpMoments m = kernels::exp_moments(u, shift);

    MCEstimate est;
    est.n_paths = u.size();
    est.master_seed = master_seed;
    est.log_mean = shift + std::log(m.first / n);
    est.log_second_moment = 2.0 * shift + std::log(m.second / n);
    if (u.size() >= 2) {
        const double excess = n * m.second / (m.first * m.first) - 1.0;
        est.rel_std_error = std::sqrt(std::max(0.0, excess) / (n - 1.0));
    }
    est.std_error = est.rel_std_error * std::exp(est.log_mean);
    return est;
}

DetailedEstimate estimate_value_detailed(const Model& model, const Policy& policy, State i0, std::size_t n_paths,
                                         std::uint64_t master_seed, const SimulationOptions& options) {
    check_inputs(model, policy, i0);
    if (n_paths == 0) throw ValidationError("estimate_value: n_paths must be >= 1");
    const PolicyTrack track(model, policy);

    std::vector<PathSummary> paths(n_paths);
    unsigned workers = options.workers != 0 ? options.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_paths));

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> error_path(workers, n_paths);
    auto work = [&](unsigned w) {
        const std::size_t begin = n_paths * w / workers;
        const std::size_t end = n_paths * (w + 1) / workers;
        for (std::size_t p = begin; p < end; ++p) {
            try {
                CounterStream rng(master_seed, p);
                paths[p] = run_path(model, track, i0, rng, options.explosion_guard, nullptr);
            } catch (...) {
                errors[w] = std::current_exception();
                error_path[w] = p;
                return;
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (unsigned w = 0; w < workers; ++w) {
        if (!errors[w]) continue;
        const std::string where = "path " + std::to_string(error_path[w]) + ": ";
        try {
            std::rethrow_exception(errors[w]);
        } catch (const NumericalError& e) {
            throw NumericalError(where + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
    }

    std::vector<double> u(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) u[p] = paths[p].log_utility;
    return DetailedEstimate{aggregate_log_utilities(u, master_seed), std::move(paths)};
}

MCEstimate estimate_value(const Model& model, const Policy& policy, State i0, std::size_t n_paths,
                          std::uint64_t master_seed, const SimulationOptions& options) {
    return estimate_value_detailed(model, policy, i0, n_paths, master_seed, options).estimate;
}

std::vector<double> destination_probabilities(const Model& model, std::size_t segment, State i, std::size_t k) {
    const SegmentTable& seg = model.segment(segment);
    const std::size_t slot = model.slot(i, k);
    std::vector<double> p;
    if (!(seg.exit_rate[slot] > 0.0)) return p;
    for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) {
        p.push_back(seg.entry_rate[e] / seg.exit_rate[slot]);
    }
    return p;
}

PolicyComparison compare_policies(const Model& model, std::span<const Policy> policies, State i0,
                                  std::size_t n_paths, std::uint64_t master_seed, const SimulationOptions& options) {
    if (policies.size() < 2) throw ValidationError("compare_policies: need at least two policies");
    const std::size_t m = policies.size();
    std::vector<DetailedEstimate> runs;
    runs.reserve(m);
    for (const Policy& p : policies) runs.push_back(estimate_value_detailed(model, p, i0, n_paths, master_seed, options));

    PolicyComparison out;
    for (const auto& r : runs) out.estimates.push_back(r.estimate);
    out.difference.assign(m, std::vector<double>(m, 0.0));
    out.combined_error.assign(m, std::vector<double>(m, 0.0));
    out.paired_error.assign(m, std::vector<double>(m, 0.0));
    const auto n = static_cast<double>(n_paths);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const MCEstimate& ea = out.estimates[a];
            const MCEstimate& eb = out.estimates[b];
            const double top = std::max(ea.log_mean, eb.log_mean);
            out.difference[a][b] = std::exp(top) * (std::exp(ea.log_mean - top) - std::exp(eb.log_mean - top));
            out.combined_error[a][b] = std::hypot(ea.std_error, eb.std_error);
            if (a == b || n_paths < 2) continue;

            double shift = -std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < n_paths; ++p) {
                shift = std::max({shift, runs[a].paths[p].log_utility, runs[b].paths[p].log_utility});
            }
            double mean = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                mean += std::exp(runs[a].paths[p].log_utility - shift) - std::exp(runs[b].paths[p].log_utility - shift);
            }
            mean /= n;
            double ss = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = std::exp(runs[a].paths[p].log_utility - shift) -
                                 std::exp(runs[b].paths[p].log_utility - shift) - mean;
                ss += d * d;
            }
            out.paired_error[a][b] = std::exp(shift) * std::sqrt(ss / (n - 1.0) / n);
        }
    }
    out.ranking.resize(m);
    for (std::size_t a = 0; a < m; ++a) out.ranking[a] = a;
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t x, std::size_t y) {
        return out.estimates[x].log_mean < out.estimates[y].log_mean;
    });
    return out;
}

}  // namespace rsctmdp
