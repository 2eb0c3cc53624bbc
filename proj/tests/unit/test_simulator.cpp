#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "rsctmdp/errors.hpp"
#include "rsctmdp/model.hpp"
#include "rsctmdp/rng.hpp"
#include "rsctmdp/simulator.hpp"
#include "rsctmdp/solver.hpp"
#include "test_models.hpp"

using namespace rsctmdp;

namespace {

Policy first_action(const Model& m, std::size_t steps) {
    const std::vector<std::size_t> zeros(m.state_count(), 0);
    return Policy::constant(m, TimeGrid(m.horizon(), steps), zeros);
}

/// Mean and standard error of the per-path jump count.
std::pair<double, double> jump_statistics(const DetailedEstimate& d) {
    const double n = static_cast<double>(d.paths.size());
    double sum = 0.0, sq = 0.0;
    for (const PathSummary& p : d.paths) {
        sum += static_cast<double>(p.jumps);
        sq += static_cast<double>(p.jumps) * static_cast<double>(p.jumps);
    }
    const double mean = sum / n;
    return {mean, std::sqrt((sq / n - mean * mean) / (n - 1.0))};
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using P = Philox4x32;
    CHECK(P::block({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(P::block({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
          P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter streams") {
    CounterStream a(7, 0), b(7, 0), c(7, 1), d(8, 0);
    for (int k = 0; k < 10; ++k) {
        const std::uint64_t x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
        CHECK(x != d.next_u64());
    }
    CHECK(a.blocks_drawn() == 5);
    CounterStream u(1, 2);
    for (int k = 0; k < 10000; ++k) {
        const double v = u.uniform();
        CHECK((v > 0.0 && v < 1.0));
    }
}

TEST_CASE("deterministic path without transitions") {
    const Model m = ModelBuilder(3, 2.0).cost(1, std::nullopt, 0.75).terminal(1, -0.3).build();
    const Policy p = first_action(m, 100);
    const PathOutcome path = simulate_path(m, p, 1, 42);
    CHECK(path.jump_count == 0);
    CHECK(path.jump_times.empty());
    CHECK(path.visited_states == std::vector<State>{1});
    CHECK(path.log_utility == 0.75 * 2.0 + -0.3);

    const MCEstimate est = estimate_value(m, p, 1, 50, 42);
    CHECK(est.log_mean == 0.75 * 2.0 - 0.3);
    CHECK(est.std_error == 0.0);
    CHECK(est.rel_std_error == 0.0);
    CHECK(est.n_paths == 50);
}

TEST_CASE("time-varying costs are integrated exactly along a path") {
    const Model m = ModelBuilder(1, 1.0).cost(0, std::nullopt, Schedule{{0.25}, {2.0, -1.0}}).build();
    const PathOutcome path = simulate_path(m, first_action(m, 8), 0, 1);
    CHECK(path.log_utility == doctest::Approx(0.5 - 0.75).epsilon(1e-15));
}

TEST_CASE("path records are consistent") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const Solution sol = solve(m, TimeGrid(1.0, 100));
    for (std::uint64_t s = 0; s < 20; ++s) {
        const PathOutcome path = simulate_path(m, sol.policy, 3, 9, s);
        CHECK(path.visited_states.front() == 3);
        CHECK(path.visited_states.size() == path.jump_count + 1);
        CHECK(path.jump_times.size() == path.jump_count);
        for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
            CHECK(path.jump_times[k] > (k == 0 ? 0.0 : path.jump_times[k - 1]));
            CHECK(path.jump_times[k] < 1.0);
            const State from = path.visited_states[k], to = path.visited_states[k + 1];
            CHECK((to + 1 == from || to == from + 1));
        }
        const PathOutcome again = simulate_path(m, sol.policy, 3, 9, s);
        CHECK(again.log_utility == path.log_utility);
        CHECK(again.jump_times == path.jump_times);
    }
}

TEST_CASE("pure-birth jump counts match the Poisson mean") {
    const double lambda = 1.5, horizon = 2.0;
    ModelBuilder b(60, horizon);
    for (State i = 0; i + 1 < 60; ++i) b.rate(i, i + 1, std::nullopt, lambda);
    const Model m = b.build();
    const DetailedEstimate d = estimate_value_detailed(m, first_action(m, 10), 0, 100000, 5);
    CHECK(d.estimate.log_mean == 0.0);
    CHECK(d.estimate.std_error == 0.0);
    const auto [mean, se] = jump_statistics(d);
    CHECK(std::abs(mean - lambda * horizon) <= 3.0 * se);
}

TEST_CASE("thinning against a loose majorant keeps the jump law") {
    // q*(i) = 3 from the unused action; the policy's rate is 1 on [0, 0.5) and 2 after.
    const Model m = ModelBuilder(2, 1.0)
                        .actions({0.0, 1.0})
                        .rate(0, 1, 0, Schedule{{0.5}, {1.0, 2.0}})
                        .rate(1, 0, 0, Schedule{{0.5}, {1.0, 2.0}})
                        .rate(0, 1, 1, 3.0)
                        .rate(1, 0, 1, 3.0)
                        .build();
    CHECK(m.q_star(0) == 3.0);
    const DetailedEstimate d = estimate_value_detailed(m, first_action(m, 16), 0, 100000, 11);
    const auto [mean, se] = jump_statistics(d);
    CHECK(std::abs(mean - 1.5) <= 3.0 * se);
}

TEST_CASE("two-state estimate agrees with the matrix-exponential oracle") {
    const Model m = test::two_state_model();
    const double oracle = linear_oracle(m, 0.0, 0);
    const MCEstimate est = estimate_value(m, first_action(m, 10), 0, 100000, 2024);
    CHECK(std::abs(est.estimate() - oracle) <= 3.0 * est.std_error);
}

TEST_CASE("estimates do not depend on the worker count") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const Solution sol = solve(m, TimeGrid(1.0, 200));
    SimulationOptions one, many, odd;
    one.workers = 1;
    many.workers = 4;
    odd.workers = 7;
    const MCEstimate a = estimate_value(m, sol.policy, 0, 5001, 99, one);
    CHECK(a == estimate_value(m, sol.policy, 0, 5001, 99, many));
    CHECK(a == estimate_value(m, sol.policy, 0, 5001, 99, odd));
    CHECK(a == estimate_value(m, sol.policy, 0, 5001, 99));
    CHECK(!(a == estimate_value(m, sol.policy, 0, 5001, 100)));
}

TEST_CASE("destination probabilities sum to one") {
    for (const Model& m : {build_mm_infinity(test::default_mm_params()), test::random_controlled_model(4, 6)}) {
        for (std::size_t s = 0; s < m.segment_count(); ++s) {
            for (State i = 0; i < m.state_count(); ++i) {
                for (std::size_t k = 0; k < m.action_count(i); ++k) {
                    const auto p = destination_probabilities(m, s, i, k);
                    if (m.exit_rate(m.segment_start(s), i, k) == 0.0) {
                        CHECK(p.empty());
                        continue;
                    }
                    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("aggregation in the log domain") {
    const std::vector<double> u{0.1, -0.4, 1.2, 0.3, 0.0};
    const MCEstimate e = aggregate_log_utilities(u, 3);
    double s1 = 0.0, s2 = 0.0;
    for (double v : u) {
        s1 += std::exp(v);
        s2 += std::exp(2.0 * v);
    }
    const double n = 5.0, mean = s1 / n;
    const double var = (s2 / n - mean * mean) * n / (n - 1.0);
    CHECK(e.estimate() == doctest::Approx(mean).epsilon(1e-14));
    CHECK(std::exp(e.log_second_moment) == doctest::Approx(s2 / n).epsilon(1e-14));
    CHECK(e.std_error == doctest::Approx(std::sqrt(var / n)).epsilon(1e-12));
    CHECK(e.master_seed == 3);

    // Utilities far beyond the double range stay representable in log form.
    const std::vector<double> big{1000.0, 1001.0};
    const MCEstimate f = aggregate_log_utilities(big, 0);
    CHECK(f.log_mean == doctest::Approx(1000.0 + std::log((1.0 + std::exp(1.0)) / 2.0)).epsilon(1e-15));
    CHECK(std::isinf(f.std_error));
    CHECK(std::isfinite(f.rel_std_error));
    CHECK_THROWS_AS(aggregate_log_utilities(std::vector<double>{}, 0), ValidationError);
}

TEST_CASE("explosion guard aborts runaway paths") {
    const Model m = ModelBuilder(2, 1.0).rate(0, 1, std::nullopt, 1e5).rate(1, 0, std::nullopt, 1e5).build();
    SimulationOptions opts;
    opts.explosion_guard = 1000;
    opts.workers = 2;
    CHECK_THROWS_WITH_AS(estimate_value(m, first_action(m, 4), 0, 10, 1, opts), doctest::Contains("path 0"),
                         NumericalError);
    CHECK_THROWS_AS(simulate_path(m, first_action(m, 4), 0, 1, 0, opts), NumericalError);
}

TEST_CASE("inputs are validated") {
    const Model m = test::two_state_model();
    CHECK_THROWS_AS(simulate_path(m, first_action(m, 4), 2, 1), ValidationError);
    CHECK_THROWS_AS(simulate_path(m, first_action(test::two_state_model(2.0), 4), 0, 1), ValidationError);
    CHECK_THROWS_AS(estimate_value(m, first_action(m, 4), 0, 0, 1), ValidationError);
}

TEST_CASE("policy comparison under common random numbers") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const TimeGrid grid(1.0, 400);
    const Solution sol = solve(m, grid);
    std::vector<Policy> same{sol.policy, sol.policy};
    const PolicyComparison eq = compare_policies(m, same, 0, 2000, 8);
    CHECK(eq.difference[0][1] == 0.0);
    CHECK(eq.paired_error[0][1] == 0.0);
    CHECK(eq.estimates[0] == eq.estimates[1]);

    std::vector<Policy> field{sol.policy};
    for (std::size_t k : {std::size_t{0}, std::size_t{20}, std::size_t{10}}) {
        field.push_back(Policy::constant(m, grid, std::vector<std::size_t>(m.state_count(), k)));
    }
    const PolicyComparison cmp = compare_policies(m, field, 0, 20000, 8);
    for (std::size_t b = 1; b < field.size(); ++b) {
        CHECK(cmp.estimates[0].estimate() <= cmp.estimates[b].estimate() + 3.0 * cmp.combined_error[0][b]);
        CHECK(cmp.difference[0][b] == doctest::Approx(-cmp.difference[b][0]));
    }
    CHECK(cmp.ranking.size() == 4);
    CHECK_THROWS_AS(compare_policies(m, std::span<const Policy>(field.data(), 1), 0, 10, 1), ValidationError);
}

TEST_CASE("zero cost gives utility one for every policy") {
    const Model m = ModelBuilder(3, 1.0)
                        .actions({0.0, 1.0})
                        .rate(0, 1, 0, 1.0)
                        .rate(0, 2, 1, 2.0)
                        .rate(1, 0, std::nullopt, 1.0)
                        .rate(2, 1, std::nullopt, 0.5)
                        .build();
    const TimeGrid grid(1.0, 10);
    std::vector<Policy> ps{Policy::constant(m, grid, std::vector<std::size_t>{0, 0, 0}),
                           Policy::constant(m, grid, std::vector<std::size_t>{1, 1, 1})};
    const PolicyComparison cmp = compare_policies(m, ps, 0, 500, 4);
    for (const MCEstimate& e : cmp.estimates) {
        CHECK(e.estimate() == 1.0);
        CHECK(e.std_error == 0.0);
    }
    CHECK(cmp.difference[0][1] == 0.0);
}
