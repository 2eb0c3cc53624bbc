#include "rsctmdp/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

namespace {

constexpr double kTolerance = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Records one evaluation: `margin` is the reported slack, `ok` the verdict.
void record(ConditionCheck& check, double margin, bool ok, const GridPoint& where) {
    if (check.evaluated == 0 || margin < check.margin) {
        check.margin = margin;
        check.tightest = where;
    }
    ++check.evaluated;
    if (!ok) {
        if (check.pass) check.first_violation = where;
        check.pass = false;
    }
}

// Drift of log-weights `w` for one slot: compares the positive part
// sum_{j != i} q(j) W(j) / W(i) against bound + q(i) in log space.
void drift_point(ConditionCheck& check, const SegmentTable& seg, std::size_t slot, std::span<const double> w,
                 State i, double bound, const GridPoint& where) {
    double log_terms_max = -kInf;
    for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) {
        const double lt = std::log(seg.entry_rate[e]) + (w[static_cast<std::size_t>(seg.entry_to[e])] - w[i]);
        log_terms_max = std::max(log_terms_max, lt);
    }
    double log_positive = -kInf;
    if (log_terms_max > -kInf) {
        double sum = 0.0;
        for (std::size_t e = seg.entry_offset[slot]; e < seg.entry_offset[slot + 1]; ++e) {
            const double lt = std::log(seg.entry_rate[e]) + (w[static_cast<std::size_t>(seg.entry_to[e])] - w[i]);
            sum += std::exp(lt - log_terms_max);
        }
        log_positive = log_terms_max + std::log(sum);
    }
    const double rhs = bound + seg.exit_rate[slot];
    const bool ok = log_positive <= std::log(rhs) + kTolerance;
    record(check, rhs - std::exp(log_positive), ok, where);
}

void log_bound_point(ConditionCheck& check, double log_lhs, double log_rhs, const GridPoint& where) {
    record(check, log_rhs - log_lhs, log_lhs <= log_rhs + kTolerance, where);
}

}  // namespace

std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::drift: return "drift";
        case Condition::exit_rate_bound: return "exit_rate_bound";
        case Condition::cost_bound: return "cost_bound";
        case Condition::square_drift: return "square_drift";
        case Condition::weight_domination: return "weight_domination";
    }
    return "?";
}

bool CertificateReport::supports_value_bound() const {
    return (*this)[Condition::drift].pass && (*this)[Condition::exit_rate_bound].pass &&
           (*this)[Condition::cost_bound].pass;
}

bool CertificateReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const ConditionCheck& c) { return c.pass; });
}

void LyapunovCertificate::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("certificate: " + what); };
    if (log_V.size() != log_V1.size()) fail("V and V1 have different lengths");
    for (std::size_t i = 0; i < log_V.size(); ++i) {
        if (!(log_V[i] >= 0.0) || std::isnan(log_V[i])) fail("V(" + std::to_string(i) + ") < 1");
        if (!(log_V1[i] >= 0.0) || std::isnan(log_V1[i])) fail("V1(" + std::to_string(i) + ") < 1");
    }
    if (!(rho > 0.0)) fail("rho must be > 0");
    if (!(rho1 > 0.0)) fail("rho1 must be > 0");
    if (!(log_M > 0.0)) fail("M must be > 1");
    if (std::isnan(log_M1) || log_M1 == -kInf) fail("M1 must be > 0");
}

LyapunovCertificate derive_example_weights(const MMInfinityParams& p) {
    p.validate();
    const double horizon_factor = 2.0 * (1.0 + p.horizon);
    const double d1 = horizon_factor * (p.C1 + std::abs(p.C2));
    const double d2 = 2.0 * d1;

    LyapunovCertificate cert;
    cert.log_V.resize(p.N);
    cert.log_V1.resize(p.N);
    for (std::size_t i = 0; i < p.N; ++i) {
        cert.log_V[i] = d1 * static_cast<double>(i);
        cert.log_V1[i] = d2 * static_cast<double>(i);
    }
    cert.rho = std::exp(d1 + 1.0) * p.lambda;
    // square_drift sums V1^2 = exp(2 d2 i), so the drift constant is rho(2 d2).
    cert.rho1 = std::exp(2.0 * d2 + 1.0) * p.lambda;
    // log(exp(a) + mu_max + lambda) without forming exp(a).
    const double a = horizon_factor * p.mu_max;
    cert.log_M = a + std::log1p((p.mu_max + p.lambda) * std::exp(-a));
    cert.log_M1 = 0.0;
    return cert;
}

CertificateReport check_certificate(const Model& model, const LyapunovCertificate& cert) {
    cert.validate();
    if (cert.state_count() != model.state_count()) {
        throw ValidationError("certificate covers " + std::to_string(cert.state_count()) +
                              " states, model has " + std::to_string(model.state_count()));
    }
    CertificateReport report;
    for (Condition c : kConditions) report[c].condition = c;

    const std::size_t n = model.state_count();
    const double horizon_factor = 2.0 * (1.0 + model.horizon());
    std::vector<double> log_V1_sq(n);
    for (State i = 0; i < n; ++i) log_V1_sq[i] = 2.0 * cert.log_V1[i];

    for (std::size_t s = 0; s < model.segment_count(); ++s) {
        const SegmentTable& seg = model.segment(s);
        const double t = model.segment_start(s);
        for (State i = 0; i < n; ++i) {
            const auto grid = model.actions(i);
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const std::size_t slot = model.slot(i, k);
                const GridPoint where{s, t, i, grid[k], false};
                drift_point(report[Condition::drift], seg, slot, cert.log_V, i, cert.rho, where);
                drift_point(report[Condition::square_drift], seg, slot, log_V1_sq, i, cert.rho1, where);
                log_bound_point(report[Condition::cost_bound], horizon_factor * std::abs(seg.cost[slot]),
                                cert.log_M + cert.log_V[i], where);
            }
        }
    }
    for (State i = 0; i < n; ++i) {
        const GridPoint where{0, 0.0, i, std::nullopt, false};
        log_bound_point(report[Condition::exit_rate_bound], std::log(model.q_star(i)), cert.log_M + cert.log_V[i],
                        where);
        log_bound_point(report[Condition::cost_bound], horizon_factor * std::abs(model.terminal(i)),
                        cert.log_M + cert.log_V[i], GridPoint{0, model.horizon(), i, std::nullopt, true});
        log_bound_point(report[Condition::weight_domination], 2.0 * cert.log_V[i], cert.log_M1 + cert.log_V1[i],
                        where);
    }
    return report;
}

LyapunovCertificate certify(const Model& model, LyapunovCertificate cert) {
    cert.report = check_certificate(model, cert);
    return cert;
}

double value_bound(const LyapunovCertificate& cert, double horizon, State i) {
    if (!cert.report || !cert.report->supports_value_bound()) {
        throw CertificateError("bound unavailable without certificate");
    }
    if (i >= cert.state_count()) throw ValidationError("value_bound: state outside the certificate");
    return cert.log_M + horizon * cert.rho + cert.log_V[i];
}

}  // namespace rsctmdp
