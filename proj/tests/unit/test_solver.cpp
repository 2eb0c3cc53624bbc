#include <cmath>
#include <vector>

#include "doctest.h"

#include "frozen_oracles.hpp"
#include "rsctmdp/errors.hpp"
#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/model.hpp"
#include "rsctmdp/solver.hpp"
#include "test_models.hpp"

using namespace rsctmdp;

namespace {

double max_rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("time grid nodes") {
    const TimeGrid g(1.0, 3);
    CHECK(g.time(0) == 0.0);
    CHECK(g.time(3) == 1.0);
    CHECK(g.cell_of(0.0) == 0);
    CHECK(g.cell_of(1.0 / 3.0) == 1);
    CHECK(g.cell_of(0.999) == 2);
    CHECK(g.cell_of(1.0) == 2);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), ValidationError);
}

TEST_CASE("bellman rate on the uncontrolled two-state chain") {
    const Model m = test::two_state_model();
    const std::vector<double> psi{std::log(2.0), std::log(3.0)};
    const BellmanValue v = bellman_rhs(m, psi, 0.0, 0);
    CHECK(v.rate == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(v.action_index == 0);
    CHECK_THROWS_AS(bellman_rhs(m, std::vector<double>{0.0, INFINITY}, 0.0, 0), ValidationError);
}

TEST_CASE("bellman argmin follows the sign of the affine coefficient") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const Solution sol = solve(m, TimeGrid(1.0, 200));
    for (std::size_t k : {0u, 50u, 150u, 200u}) {
        const auto psi = sol.values.row(k);
        for (State i = 1; i < m.state_count(); ++i) {
            const double x = static_cast<double>(i);
            // Coefficient divided by phi(t, i) > 0.
            const double coeff = 1.0 + x * (std::exp(psi[i - 1] - psi[i]) - 1.0);
            const BellmanValue v = bellman_rhs(m, psi, sol.values.grid().time(k), i);
            if (coeff > 1e-12) CHECK(v.action == 0.0);
            if (coeff < -1e-12) CHECK(v.action == 2.0);
        }
    }
}

TEST_CASE("singleton action grid is always chosen") {
    const Model m = test::random_singleton_model(5, 4);
    const std::vector<double> psi{0.3, -1.0, 2.0, 0.0};
    for (State i = 0; i < 4; ++i) CHECK(bellman_rhs(m, psi, 0.5, i).action_index == 0);
}

TEST_CASE("zero cost keeps psi at zero") {
    const Model m = ModelBuilder(3, 1.0)
                        .actions({0.0, 1.0})
                        .rate(0, 1, 0, 1.5)
                        .rate(1, 2, std::nullopt, 0.7)
                        .rate(2, 0, 1, 2.0)
                        .build();
    const Solution sol = solve(m, TimeGrid(1.0, 50));
    for (std::size_t k = 0; k <= 50; ++k) {
        for (State i = 0; i < 3; ++i) {
            CHECK(sol.values.psi(k, i) == 0.0);
            CHECK(sol.policy.action_index(k, i) == 0);
        }
    }
    CHECK(extract_policy(sol.values, m) == sol.policy);
}

TEST_CASE("single state with constant cost is integrated exactly") {
    const double c0 = 1.7, g0 = -0.4, horizon = 2.0;
    const Model m = test::single_state_model(c0, g0, horizon);
    const TimeGrid grid(horizon, 64);
    const Solution sol = solve(m, grid);
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const double exact = c0 * (horizon - grid.time(k)) + g0;
        CHECK(std::abs(sol.values.psi(k, 0) - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("terminal row equals the terminal cost exactly") {
    for (const Model& m : {test::two_state_model(), build_mm_infinity(test::default_mm_params()),
                           test::random_controlled_model(3, 6)}) {
        const Solution sol = solve(m, TimeGrid(m.horizon(), 20));
        for (State i = 0; i < m.state_count(); ++i) CHECK(sol.values.psi(20, i) == m.terminal(i));
    }
}

TEST_CASE("linear oracle reproduces the high-precision reference") {
    const Model m = test::two_state_model();
    const auto at0 = linear_oracle(m, 0.0);
    CHECK(max_rel(at0[0], test::kTwoStateSpan1State0) <= 1e-14);
    CHECK(max_rel(at0[1], test::kTwoStateSpan1State1) <= 1e-14);
    CHECK(max_rel(linear_oracle(m, 0.5, 0), test::kTwoStateSpanHalfState0) <= 1e-14);
    CHECK(max_rel(linear_oracle(m, 0.5, 1), test::kTwoStateSpanHalfState1) <= 1e-14);
    CHECK(linear_oracle(m, 1.0, 0) == 1.0);
}

TEST_CASE("linear oracle trivial cases and preconditions") {
    const Model zero = ModelBuilder(3, 1.0).build();
    for (double s : {0.0, 0.3, 1.0}) {
        for (State i = 0; i < 3; ++i) CHECK(linear_oracle(zero, s, i) == 1.0);
    }
    const Model single = test::single_state_model(0.8, 0.25, 1.5);
    CHECK(max_rel(linear_oracle(single, 0.5, 0), std::exp(0.8 * 1.0 + 0.25)) <= 1e-14);
    CHECK_THROWS_AS(linear_oracle(build_mm_infinity(test::default_mm_params()), 0.0), ValidationError);
    const Model timed = ModelBuilder(2, 1.0).rate(0, 1, std::nullopt, Schedule{{0.5}, {1.0, 2.0}}).build();
    CHECK_THROWS_AS(linear_oracle(timed, 0.0), ValidationError);
}

TEST_CASE("two-state solve matches the oracle at 2000 steps") {
    const Model m = test::two_state_model();
    const Solution sol = solve(m, TimeGrid(1.0, 2000));
    CHECK(std::abs(sol.values.phi(0, 0) - test::kTwoStateSpan1State0) <= 1e-8);
    CHECK(std::abs(sol.values.phi(0, 1) - test::kTwoStateSpan1State1) <= 1e-8);
    CHECK(std::abs(sol.values.phi(1000, 0) - test::kTwoStateSpanHalfState0) <= 1e-8);
}

TEST_CASE("oracle equivalence on random singleton-action models") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const std::size_t n = 1 + seed % 8;
        const Model m = test::random_singleton_model(seed, n);
        const Solution sol = solve(m, TimeGrid(1.0, 4000));
        const auto oracle = linear_oracle(m, 0.0);
        for (State i = 0; i < n; ++i) {
            INFO("seed " << seed << " state " << i);
            CHECK(max_rel(sol.values.phi(0, i), oracle[i]) <= 1e-6);
        }
    }
}

TEST_CASE("log-domain and linear-domain integrators agree") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const Model m = test::random_controlled_model(seed, 5);
        const TimeGrid grid(1.0, 400);
        std::vector<std::vector<std::size_t>> index;
        const auto phi = test::linear_domain_rk4(m, grid, &index);
        const Solution sol = solve(m, grid);
        double worst = 0.0;
        bool same_policy = true;
        for (std::size_t k = 0; k <= grid.steps(); ++k) {
            for (State i = 0; i < m.state_count(); ++i) {
                worst = std::max(worst, max_rel(sol.values.phi(k, i), phi[k][i]));
                same_policy = same_policy && sol.policy.action_index(k, i) == index[k][i];
            }
        }
        INFO("seed " << seed);
        CHECK(worst <= 1e-8);
        CHECK(same_policy);
    }
}

TEST_CASE("cost monotonicity") {
    const Model low = test::random_controlled_model(11, 5);
    ModelBuilder b(5, 1.0);
    // Same rates; every cost raised by 0.1, terminal by 0.05.
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> rate(0.0, 2.0), cost(-0.5, 0.5);
    b.actions({0.0, 1.0});
    for (State i = 0; i < 5; ++i) {
        for (State j = 0; j < 5; ++j) {
            if (i == j) continue;
            b.rate(i, j, 0, rate(gen));
            b.rate(i, j, 1, rate(gen));
        }
        b.cost(i, 0, cost(gen) + 0.1);
        b.cost(i, 1, cost(gen) + 0.1);
        b.terminal(i, cost(gen) + 0.05);
    }
    const Model high = b.build();
    const TimeGrid grid(1.0, 200);
    const Solution a = solve(low, grid), c = solve(high, grid);
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        for (State i = 0; i < 5; ++i) CHECK(a.values.psi(k, i) <= c.values.psi(k, i) + 1e-9);
    }
}

TEST_CASE("values respect the certificate bound") {
    const MMInfinityParams p = test::default_mm_params();
    const Model m = build_mm_infinity(p);
    const LyapunovCertificate cert = certify(m, derive_example_weights(p));
    const Solution sol = solve(m, TimeGrid(1.0, 500));
    CHECK(check_value_bound(sol.values, cert).empty());
    for (State i = 0; i < m.state_count(); ++i) CHECK(sol.values.psi(0, i) <= value_bound(cert, 1.0, i) + 1e-6);
}

TEST_CASE("solve is deterministic") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const TimeGrid grid(1.0, 300);
    const Solution a = solve(m, grid), b = solve(m, grid);
    CHECK(a.values == b.values);
    CHECK(a.policy == b.policy);
}

TEST_CASE("extracted policy matches the solver's") {
    for (const Model& m : {build_mm_infinity(test::default_mm_params()), test::random_controlled_model(21, 6),
                           test::random_singleton_model(2, 3)}) {
        const Solution sol = solve(m, TimeGrid(m.horizon(), 250));
        CHECK(extract_policy(sol.values, m) == sol.policy);
    }
    const Model single = test::random_singleton_model(2, 3);
    const Solution sol = solve(single, TimeGrid(1.0, 10));
    const std::vector<std::size_t> zeros(3, 0);
    CHECK(sol.policy == Policy::constant(single, TimeGrid(1.0, 10), zeros));
    CHECK_THROWS_AS(extract_policy(sol.values, test::two_state_model()), ValidationError);
}

TEST_CASE("extracted M/M/infinity actions sit at the interval ends") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const Solution sol = solve(m, TimeGrid(1.0, 400));
    const Policy p = extract_policy(sol.values, m);
    bool saw_max = false;
    for (std::size_t k = 0; k <= 400; ++k) {
        for (State i = 0; i < m.state_count(); ++i) {
            const double a = p.action(k, i);
            const double x = static_cast<double>(i);
            const double phi_i = sol.values.phi(k, i);
            const double coeff = i == 0 ? phi_i : phi_i + x * (sol.values.phi(k, i - 1) - phi_i);
            if (std::abs(coeff) > 1e-10) CHECK((a == 0.0 || a == 2.0));
            saw_max = saw_max || a == 2.0;
        }
    }
    CHECK(saw_max);
}

TEST_CASE("shift consistency") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const Solution sol = solve(m, TimeGrid(1.0, 400));
    CHECK(shift_consistency(m, sol.values, 0) == 0.0);
    CHECK(shift_consistency(m, sol.values, 400) == 0.0);
    CHECK(shift_consistency(m, sol.values, 200) <= 1e-6);

    const Model timed = ModelBuilder(2, 1.0)
                            .rate(0, 1, std::nullopt, Schedule{{0.5}, {1.0, 2.0}})
                            .rate(1, 0, std::nullopt, 1.0)
                            .cost(0, std::nullopt, 0.3)
                            .build();
    const Solution st = solve(timed, TimeGrid(1.0, 100));
    CHECK(shift_consistency(timed, st.values, 30) <= 1e-9);
    CHECK(shift_consistency(timed, st.values, 70) <= 1e-9);
    const Solution misaligned = solve(timed, TimeGrid(1.0, 7));
    CHECK_THROWS_AS(shift_consistency(timed, misaligned.values, 3), ValidationError);
}

TEST_CASE("overflow is reported with its grid location") {
    const Model m = ModelBuilder(2, 1.0).rate(0, 1, std::nullopt, 1.0).terminal(1, 800.0).build();
    CHECK_THROWS_WITH_AS(solve(m, TimeGrid(1.0, 10)), doctest::Contains("k=10"), NumericalError);
}
