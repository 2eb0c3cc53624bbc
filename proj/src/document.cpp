#include "rsctmdp/document.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    expect_object(j, where);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError(where + ": unknown key \"" + key + "\"");
        }
    }
}

const json& require(const json& j, std::string_view key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing key \"" + std::string(key) + "\"");
    return *it;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(where + ": expected a finite number");
    return v;
}

std::size_t index(const json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(where + ": expected a non-negative integer");
    return static_cast<std::size_t>(j.get<long long>());
}

std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) throw ParseError(where + ": expected a string");
    return j.get<std::string>();
}

Schedule schedule(const json& j, const std::string& where) {
    check_keys(j, {"breakpoints", "values"}, where);
    Schedule s{number_list(require(j, "breakpoints", where), where + ".breakpoints"),
               number_list(require(j, "values", where), where + ".values")};
    for (std::size_t k = 1; k < s.breakpoints.size(); ++k) {
        if (!(s.breakpoints[k - 1] < s.breakpoints[k])) throw ParseError(where + ": breakpoints not ascending");
    }
    return s;
}

/// Entry value: exactly one of `value` and `schedule`.
Schedule entry_value(const json& j, const std::string& where) {
    const bool has_value = j.contains("value");
    const bool has_schedule = j.contains("schedule");
    if (has_value == has_schedule) throw ParseError(where + ": give exactly one of \"value\" and \"schedule\"");
    return has_value ? Schedule::constant(number(j["value"], where + ".value"))
                     : schedule(j["schedule"], where + ".schedule");
}

std::optional<std::size_t> optional_action(const json& j, const std::string& where) {
    if (!j.contains("action")) return std::nullopt;
    return index(j["action"], where + ".action");
}

json number_or_marker(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

json grid_point(const std::optional<GridPoint>& p) {
    if (!p) return nullptr;
    json out = {{"segment", p->segment}, {"t", p->t}, {"state", p->state}, {"terminal", p->terminal}};
    out["action"] = p->action ? json(*p->action) : json(nullptr);
    return out;
}

}  // namespace

ModelDocument load_tabular(const json& doc, const LoadOptions& options) {
    check_keys(doc, {"model", "states", "actions", "rates", "costs", "terminal", "horizon"}, "document");
    const json& model = require(doc, "model", "document");
    check_keys(model, {"kind", "boundary_mode", "parameters"}, "model");
    const std::string kind = text(require(model, "kind", "model"), "model.kind");
    const BoundaryMode boundary = model.contains("boundary_mode")
                                      ? parse_boundary_mode(text(model["boundary_mode"], "model.boundary_mode"))
                                      : BoundaryMode::absorbing;

    const json& states = require(doc, "states", "document");
    check_keys(states, {"count"}, "states");
    const std::size_t count = index(require(states, "count", "states"), "states.count");
    const double horizon = number(require(doc, "horizon", "document"), "horizon");

    ModelDocument out;
    if (kind == "mm_infinity") {
        for (const char* key : {"rates", "costs", "terminal"}) {
            if (doc.contains(key)) throw ParseError(std::string(key) + ": not allowed for kind \"mm_infinity\"");
        }
        MMInfinityParams p;
        p.N = count;
        p.horizon = horizon;
        p.boundary = boundary;
        const json& params = require(model, "parameters", "model");
        check_keys(params, {"lambda", "mu_min", "mu_max", "C1", "C2"}, "model.parameters");
        p.lambda = number(require(params, "lambda", "model.parameters"), "model.parameters.lambda");
        p.mu_min = number(require(params, "mu_min", "model.parameters"), "model.parameters.mu_min");
        p.mu_max = number(require(params, "mu_max", "model.parameters"), "model.parameters.mu_max");
        p.C1 = number(require(params, "C1", "model.parameters"), "model.parameters.C1");
        p.C2 = number(require(params, "C2", "model.parameters"), "model.parameters.C2");
        if (doc.contains("actions")) {
            check_keys(doc["actions"], {"points"}, "actions");
            if (doc["actions"].contains("points")) p.action_points = index(doc["actions"]["points"], "actions.points");
        }
        if (options.action_points) p.action_points = *options.action_points;
        out.kind = ModelDocument::Kind::mm_infinity;
        out.model = build_mm_infinity(p);
        out.params = p;
        return out;
    }
    if (kind != "tabular") throw ParseError("model.kind: expected \"mm_infinity\" or \"tabular\", got \"" + kind + "\"");
    if (model.contains("parameters")) throw ParseError("model.parameters: not allowed for kind \"tabular\"");
    if (count == 0) throw ParseError("states.count: must be >= 1");

    ModelBuilder b(count, horizon);
    b.boundary(boundary);
    if (doc.contains("actions")) {
        const json& actions = doc["actions"];
        check_keys(actions, {"values", "per_state"}, "actions");
        if (actions.contains("values") == actions.contains("per_state")) {
            throw ParseError("actions: give exactly one of \"values\" and \"per_state\"");
        }
        if (actions.contains("values")) {
            b.actions(number_list(actions["values"], "actions.values"));
        } else {
            const json& per = actions["per_state"];
            if (!per.is_array() || per.size() != count) {
                throw ParseError("actions.per_state: expected one grid per state");
            }
            for (std::size_t i = 0; i < count; ++i) {
                b.actions(i, number_list(per[i], "actions.per_state[" + std::to_string(i) + "]"));
            }
        }
    }
    if (doc.contains("rates")) {
        const json& rates = doc["rates"];
        if (!rates.is_array()) throw ParseError("rates: expected an array");
        for (std::size_t r = 0; r < rates.size(); ++r) {
            const std::string where = "rates[" + std::to_string(r) + "]";
            check_keys(rates[r], {"from", "to", "action", "value", "schedule"}, where);
            b.rate(index(require(rates[r], "from", where), where + ".from"),
                   index(require(rates[r], "to", where), where + ".to"), optional_action(rates[r], where),
                   entry_value(rates[r], where), where);
        }
    }
    if (doc.contains("costs")) {
        const json& costs = doc["costs"];
        if (!costs.is_array()) throw ParseError("costs: expected an array");
        for (std::size_t c = 0; c < costs.size(); ++c) {
            const std::string where = "costs[" + std::to_string(c) + "]";
            check_keys(costs[c], {"state", "action", "value", "schedule"}, where);
            b.cost(index(require(costs[c], "state", where), where + ".state"), optional_action(costs[c], where),
                   entry_value(costs[c], where), where);
        }
    }
    if (doc.contains("terminal")) {
        const std::vector<double> g = number_list(doc["terminal"], "terminal");
        if (g.size() != count) throw ParseError("terminal: expected one value per state");
        for (std::size_t i = 0; i < count; ++i) b.terminal(i, g[i]);
    }
    out.kind = ModelDocument::Kind::tabular;
    out.model = b.build();
    return out;
}

ModelDocument load_model_document(std::string_view text_in, const LoadOptions& options) {
    json doc;
    try {
        doc = json::parse(text_in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model document is not valid JSON: ") + e.what());
    }
    return load_tabular(doc, options);
}

ModelDocument load_model_file(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read model document " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model_document(buf.str(), options);
}

json certificate_to_json(const LyapunovCertificate& cert) {
    json out;
    out["format"] = "rsctmdp-certificate";
    out["version"] = 1;
    out["states"] = cert.state_count();
    out["log_V"] = cert.log_V;
    out["log_V1"] = cert.log_V1;
    out["rho"] = number_or_marker(cert.rho);
    out["log_M"] = number_or_marker(cert.log_M);
    out["rho1"] = number_or_marker(cert.rho1);
    out["log_M1"] = number_or_marker(cert.log_M1);
    if (cert.report) {
        json verdicts = json::object();
        for (Condition c : kConditions) {
            const ConditionCheck& check = (*cert.report)[c];
            verdicts[std::string(to_string(c))] = {{"pass", check.pass},
                                                    {"margin", number_or_marker(check.margin)},
                                                    {"evaluated", check.evaluated},
                                                    {"tightest", grid_point(check.tightest)},
                                                    {"first_violation", grid_point(check.first_violation)}};
        }
        out["verdicts"] = verdicts;
        out["all_pass"] = cert.report->all_pass();
    }
    return out;
}

LyapunovCertificate certificate_from_json(const json& doc) {
    check_keys(doc, {"format", "version", "states", "log_V", "log_V1", "rho", "log_M", "rho1", "log_M1", "verdicts",
                     "all_pass"},
               "certificate");
    if (doc.contains("format") && doc["format"] != "rsctmdp-certificate") {
        throw ParseError("certificate.format: expected \"rsctmdp-certificate\"");
    }
    LyapunovCertificate cert;
    cert.log_V = number_list(require(doc, "log_V", "certificate"), "certificate.log_V");
    cert.log_V1 = number_list(require(doc, "log_V1", "certificate"), "certificate.log_V1");
    cert.rho = number(require(doc, "rho", "certificate"), "certificate.rho");
    cert.log_M = number(require(doc, "log_M", "certificate"), "certificate.log_M");
    cert.rho1 = number(require(doc, "rho1", "certificate"), "certificate.rho1");
    cert.log_M1 = number(require(doc, "log_M1", "certificate"), "certificate.log_M1");
    if (doc.contains("states") && index(doc["states"], "certificate.states") != cert.log_V.size()) {
        throw ParseError("certificate.states: does not match the weight vectors");
    }
    cert.validate();
    return cert;
}

LyapunovCertificate load_certificate_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read certificate " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("certificate is not valid JSON: ") + e.what());
    }
    return certificate_from_json(doc);
}

}  // namespace rsctmdp
