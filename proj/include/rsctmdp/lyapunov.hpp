#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "rsctmdp/model.hpp"

namespace rsctmdp {

/// The five inequalities a certificate is checked against. With weights
/// V, V1 >= 1 and constants rho, M, rho1, M1, at every grid point (t, i, a):
///
///   drift              sum_j q(j|t,i,a) V(j)      <= rho  V(i)
///   exit_rate_bound    q*(i)                      <= M V(i)
///   cost_bound         exp(2(1+T)|c(t,i,a)|)      <= M V(i), same for g(i)
///   square_drift       sum_j V1(j)^2 q(j|t,i,a)   <= rho1 V1(i)^2
///   weight_domination  V(i)^2                     <= M1 V1(i)
///
/// The first three give the uniform value bound `M exp(rho T) V(i)`; the last
/// two control the time derivative of the value function.
enum class Condition { drift, exit_rate_bound, cost_bound, square_drift, weight_domination };

inline constexpr std::array<Condition, 5> kConditions = {Condition::drift, Condition::exit_rate_bound,
                                                         Condition::cost_bound, Condition::square_drift,
                                                         Condition::weight_domination};

std::string_view to_string(Condition c);

/// Where an inequality was evaluated. `action` is empty for state-only
/// inequalities; `terminal` marks the terminal-cost half of cost_bound.
struct GridPoint {
    std::size_t segment = 0;
    double t = 0.0;
    State state = 0;
    std::optional<double> action;
    bool terminal = false;
};

/// Verdict for one inequality.
///
/// `margin` is the tightest slack found. Drift conditions report it in
/// per-unit-weight form, `rho - sum_j q(j) W(j) / W(i)`; the bound conditions
/// report `log(rhs / lhs)`. Either way a negative margin is a violation
/// (up to the 1e-12 relative evaluation tolerance).
struct ConditionCheck {
    Condition condition = Condition::drift;
    bool pass = true;
    double margin = 0.0;
    std::optional<GridPoint> tightest;
    std::optional<GridPoint> first_violation;
    std::size_t evaluated = 0;
};

struct CertificateReport {
    std::array<ConditionCheck, 5> checks;

    const ConditionCheck& operator[](Condition c) const { return checks[static_cast<std::size_t>(c)]; }
    ConditionCheck& operator[](Condition c) { return checks[static_cast<std::size_t>(c)]; }
    /// drift, exit_rate_bound and cost_bound all pass.
    bool supports_value_bound() const;
    bool all_pass() const;
};

/// Lyapunov weights and constants. Weights are stored as logarithms.
struct LyapunovCertificate {
    std::vector<double> log_V;
    std::vector<double> log_V1;
    double rho = 0.0;
    double log_M = 0.0;
    double rho1 = 0.0;
    double log_M1 = 0.0;
    std::optional<CertificateReport> report;

    std::size_t state_count() const { return log_V.size(); }

    /// Throws ValidationError unless V, V1 >= 1, M > 1, M1 > 0 and rho, rho1 > 0.
    void validate() const;
};

/// Weights of the M/M/infinity example: V(i) = exp(d1 i), V1(i) = exp(2 d1 i)
/// with d1 = 2(1+T)(C1+|C2|), rho = exp(d1+1) lambda, rho1 = exp(2 d2+1) lambda,
/// M = exp(2(1+T) mu_max) + mu_max + lambda and M1 = 1.
LyapunovCertificate derive_example_weights(const MMInfinityParams& params);

/// Evaluates all five inequalities at every (segment, state, action) of the
/// model. Failures are verdicts, not errors.
CertificateReport check_certificate(const Model& model, const LyapunovCertificate& cert);

/// Returns `cert` with the report of check_certificate attached.
LyapunovCertificate certify(const Model& model, LyapunovCertificate cert);

/// log(M) + T rho + log V(i), the log of the bound on the risk-sensitive
/// value of any policy started at `i`. Throws CertificateError unless the
/// attached report supports it.
double value_bound(const LyapunovCertificate& cert, double horizon, State i);

}  // namespace rsctmdp
