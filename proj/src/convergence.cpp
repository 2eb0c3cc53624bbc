#include "rsctmdp/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

std::vector<WeightLevel> levels_for_window_sizes(const LyapunovCertificate& cert, std::span<const std::size_t> sizes) {
    std::vector<double> sorted = cert.log_V;
    std::sort(sorted.begin(), sorted.end());
    std::vector<WeightLevel> out;
    for (std::size_t size : sizes) {
        if (size == 0 || size > sorted.size()) {
            throw ValidationError("window size " + std::to_string(size) + " outside [1, " +
                                  std::to_string(sorted.size()) + "]");
        }
        const double threshold = sorted[size - 1];
        if (size < sorted.size() && !(sorted[size] > threshold)) {
            throw ValidationError("window size " + std::to_string(size) + " is not a sublevel set of V (tied weights)");
        }
        out.push_back(WeightLevel::from_log(threshold));
    }
    return out;
}

std::vector<State> default_probes(const Model& base, const LyapunovCertificate& cert,
                                  std::span<const WeightLevel> levels) {
    if (levels.empty()) throw ValidationError("default_probes: no levels");
    if (cert.state_count() != base.state_count()) throw ValidationError("certificate does not match the model");
    const WeightLevel smallest = *std::min_element(levels.begin(), levels.end());
    std::vector<State> active;
    for (State i = 0; i < base.state_count(); ++i) {
        if (smallest.admits(cert.log_V[i])) active.push_back(i);
    }
    std::vector<State> probes{0};
    if (!active.empty()) {
        const State mid = active[(active.size() - 1) / 2];
        if (mid != 0) probes.push_back(mid);
    }
    return probes;
}

LadderReport run_truncation_ladder(const Model& base, const LyapunovCertificate& cert,
                                   std::span<const WeightLevel> levels, const TimeGrid& grid,
                                   std::span<const State> probes) {
    if (levels.empty()) throw ValidationError("truncation ladder: no levels");
    for (std::size_t r = 1; r < levels.size(); ++r) {
        if (!(levels[r - 1] < levels[r])) throw ValidationError("truncation ladder: levels must be strictly ascending");
    }
    if (probes.empty()) throw ValidationError("truncation ladder: no probe states");
    const LyapunovCertificate checked = cert.report ? cert : certify(base, cert);
    if (!checked.report->supports_value_bound()) {
        throw CertificateError("truncation ladder: certificate does not support the value bound on the base model");
    }

    LadderReport report;
    report.probes.assign(probes.begin(), probes.end());
    const double horizon = base.horizon();

    for (std::size_t r = 0; r < levels.size(); ++r) {
        const TruncatedModel tm = truncate(base, checked.log_V, levels[r]);
        for (State p : probes) {
            if (p >= base.state_count() || !tm.active[p]) {
                throw ValidationError("probe " + std::to_string(p) + " lies outside the active set at rung " +
                                      std::to_string(r));
            }
        }
        const Solution sol = solve(tm.model, grid);

        LadderRung rung;
        rung.level = levels[r];
        rung.active_count = tm.active_count();
        for (State i = 0; i < base.state_count(); ++i) {
            if (!tm.active[i]) continue;
            rung.max_q_star = std::max(rung.max_q_star, tm.model.q_star(i));
            if (!(sol.values.psi(0, i) <= value_bound(checked, horizon, i) + 1e-6)) report.all_within_bound = false;
        }
        rung.rates_bounded = std::log(rung.max_q_star) <= checked.log_M + levels[r].log_threshold + 1e-12;
        report.all_rates_bounded = report.all_rates_bounded && rung.rates_bounded;

        for (std::size_t q = 0; q < probes.size(); ++q) {
            const State p = probes[q];
            const double psi0 = sol.values.psi(0, p);
            const double bound = value_bound(checked, horizon, p);
            rung.psi0.push_back(psi0);
            rung.bound_log.push_back(bound);
            rung.within_bound.push_back(psi0 <= bound + 1e-6);
            std::vector<double> column(grid.steps() + 1);
            for (std::size_t k = 0; k <= grid.steps(); ++k) column[k] = sol.policy.action(k, p);
            rung.probe_policy.push_back(std::move(column));
            if (r > 0) rung.diff_prev.push_back(std::abs(psi0 - report.rungs.back().psi0[q]));
        }
        report.rungs.push_back(std::move(rung));
    }

    const std::size_t last = report.rungs.size() - 1;
    std::size_t agree = last;
    while (agree > 0 && report.rungs[agree - 1].probe_policy == report.rungs[last].probe_policy) --agree;
    report.policies_agree_from = agree;

    for (std::size_t r = 2; r < report.rungs.size(); ++r) {
        for (std::size_t q = 0; q < probes.size(); ++q) {
            const double cur = report.rungs[r].diff_prev[q];
            const double prev = report.rungs[r - 1].diff_prev[q];
            if (!(cur < prev || cur == 0.0)) report.diffs_decreasing = false;
        }
    }
    return report;
}

std::vector<RefinementRow> run_step_refinement(const Model& model, std::span<const std::size_t> grid_steps,
                                               State probe) {
    if (probe >= model.state_count()) throw ValidationError("step refinement: probe outside the window");
    for (std::size_t r = 1; r < grid_steps.size(); ++r) {
        if (!(grid_steps[r - 1] < grid_steps[r])) throw ValidationError("step refinement: step counts must ascend");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<RefinementRow> rows;
    for (std::size_t r = 0; r < grid_steps.size(); ++r) {
        const Solution sol = solve(model, TimeGrid(model.horizon(), grid_steps[r]));
        RefinementRow row{grid_steps[r], sol.values.psi(0, probe), nan, nan};
        if (r > 0) row.diff_prev = std::abs(row.psi0 - rows.back().psi0);
        if (r > 1 && row.diff_prev > 0.0 && rows.back().diff_prev > 0.0) {
            const double ratio = static_cast<double>(grid_steps[r]) / static_cast<double>(grid_steps[r - 1]);
            row.observed_order = std::log(rows.back().diff_prev / row.diff_prev) / std::log(ratio);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rsctmdp
