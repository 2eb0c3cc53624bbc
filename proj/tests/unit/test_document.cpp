#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"

#include "rsctmdp/document.hpp"
#include "rsctmdp/errors.hpp"
#include "rsctmdp/tables.hpp"
#include "test_models.hpp"

using namespace rsctmdp;
using nlohmann::json;

namespace {

const std::filesystem::path kModels = RSCTMDP_MODELS_DIR;

json two_state_doc() {
    return json::parse(R"({
      "model": {"kind": "tabular"},
      "states": {"count": 2},
      "actions": {"values": [0.0]},
      "rates": [{"from": 0, "to": 1, "value": 1.0}, {"from": 1, "to": 0, "value": 1.0}],
      "costs": [{"state": 1, "value": 1.0}],
      "terminal": [0.0, 0.0],
      "horizon": 1.0
    })");
}

json mm_doc() {
    return json::parse(R"({
      "model": {"kind": "mm_infinity",
                "parameters": {"lambda": 1.0, "mu_min": 0.0, "mu_max": 2.0, "C1": 1.0, "C2": 0.0}},
      "states": {"count": 40},
      "actions": {"points": 21},
      "horizon": 1.0
    })");
}

}  // namespace

TEST_CASE("tabular two-state document") {
    const ModelDocument d = load_tabular(two_state_doc());
    CHECK(d.kind == ModelDocument::Kind::tabular);
    CHECK(!d.params);
    CHECK(d.model.rate(0, 0.0, 0, 0) == -1.0);
    CHECK(d.model.rate(1, 0.0, 0, 0) == 1.0);
    CHECK(d.model.cost(0.3, 1, 0) == 1.0);
    CHECK(d.model == test::two_state_model());
    CHECK(load_model_file(kModels / "two_state.json").model == d.model);
}

TEST_CASE("errors name the offending entry") {
    json doc = two_state_doc();
    doc["rates"][1]["value"] = -0.5;
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("rates[1]"), ParseError);

    doc = two_state_doc();
    doc["rates"][0].erase("value");
    doc["rates"][0]["schedule"] = {{"breakpoints", {0.5, 0.2}}, {"values", {1.0, 2.0, 3.0}}};
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("breakpoints not ascending"), ParseError);

    doc = two_state_doc();
    doc["rates"][0]["schedule"] = {{"breakpoints", {0.5}}, {"values", {1.0, 2.0}}};
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("exactly one"), ParseError);

    doc = two_state_doc();
    doc["terminal"] = {0.0};
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("terminal"), ParseError);

    doc = two_state_doc();
    doc["costs"][0]["state"] = 1.5;
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("costs[0].state"), ParseError);

    doc = two_state_doc();
    doc["horizon"] = "one";
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("horizon"), ParseError);

    doc = two_state_doc();
    doc["model"]["kind"] = "fluid";
    CHECK_THROWS_AS(load_tabular(doc), ParseError);

    CHECK_THROWS_AS(load_model_document("{ not json"), ParseError);
    CHECK_THROWS_AS(load_model_file(kModels / "does_not_exist.json"), IoError);
}

TEST_CASE("unknown keys are rejected at every level") {
    for (auto mutate : {+[](json& d) { d["extra"] = 1; }, +[](json& d) { d["model"]["flavour"] = "x"; },
                        +[](json& d) { d["states"]["size"] = 2; }, +[](json& d) { d["rates"][0]["rate"] = 1; },
                        +[](json& d) { d["costs"][0]["when"] = 0; }, +[](json& d) { d["actions"]["grid"] = 1; }}) {
        json doc = two_state_doc();
        mutate(doc);
        CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("unknown key"), ParseError);
    }
    json doc = mm_doc();
    doc["model"]["parameters"]["mu"] = 1.0;
    CHECK_THROWS_WITH_AS(load_tabular(doc), doctest::Contains("unknown key"), ParseError);
}

TEST_CASE("mm_infinity documents build the same model as the constructor") {
    const ModelDocument d = load_tabular(mm_doc());
    CHECK(d.kind == ModelDocument::Kind::mm_infinity);
    REQUIRE(d.params);
    CHECK(*d.params == test::default_mm_params());
    CHECK(d.model == build_mm_infinity(test::default_mm_params()));
    CHECK(d.model.fingerprint() == build_mm_infinity(test::default_mm_params()).fingerprint());
    CHECK(load_model_file(kModels / "mm_infinity_default.json").model == d.model);

    LoadOptions opts;
    opts.action_points = 5;
    const ModelDocument coarse = load_tabular(mm_doc(), opts);
    CHECK(coarse.model.action_count(0) == 5);

    json bad = mm_doc();
    bad["rates"] = json::array();
    CHECK_THROWS_WITH_AS(load_tabular(bad), doctest::Contains("not allowed"), ParseError);
    bad = mm_doc();
    bad["model"]["parameters"]["mu_min"] = 3.0;
    CHECK_THROWS_AS(load_tabular(bad), ValidationError);
    bad = mm_doc();
    bad["model"]["boundary_mode"] = "reject";
    CHECK_THROWS_AS(load_tabular(bad), ValidationError);
}

TEST_CASE("schedules and per-action entries") {
    const Model m = load_model_file(kModels / "scheduled_service.json").model;
    CHECK(m.breakpoints().size() == 1);
    CHECK(m.rate(1, 0.2, 0, 0) == 1.0);
    CHECK(m.rate(1, 0.7, 0, 1) == 2.0);
    CHECK(m.rate(0, 0.7, 1, 1) == 1.5);
    CHECK(m.cost(0.2, 2, 0) == 2.5);
    CHECK(m.cost(0.7, 0, 1) == 0.25);
    CHECK(m.terminal(2) == 1.0);
}

TEST_CASE("per-state action grids") {
    json doc = two_state_doc();
    doc["actions"] = {{"per_state", {{0.0, 1.0}, {2.0}}}};
    const Model m = load_tabular(doc).model;
    CHECK(m.action_count(0) == 2);
    CHECK(m.action_count(1) == 1);
    CHECK(m.actions(1).front() == 2.0);
    doc["actions"] = {{"per_state", {{0.0}}}};
    CHECK_THROWS_AS(load_tabular(doc), ParseError);
    doc["actions"] = {{"per_state", {{0.0}, {0.0}}}, {"values", {0.0}}};
    CHECK_THROWS_AS(load_tabular(doc), ParseError);
}

TEST_CASE("certificate round trip") {
    const MMInfinityParams p = test::default_mm_params();
    const LyapunovCertificate cert = certify(build_mm_infinity(p), derive_example_weights(p));
    const json j = certificate_to_json(cert);
    CHECK(j["format"] == "rsctmdp-certificate");
    CHECK(j["all_pass"] == true);
    CHECK(j["verdicts"]["square_drift"]["pass"] == true);
    const LyapunovCertificate back = certificate_from_json(json::parse(j.dump()));
    CHECK(back.log_V == cert.log_V);
    CHECK(back.log_V1 == cert.log_V1);
    CHECK(back.rho == cert.rho);
    CHECK(back.rho1 == cert.rho1);
    CHECK(back.log_M == cert.log_M);
    CHECK(back.log_M1 == cert.log_M1);
    CHECK(!back.report);

    json bad = j;
    bad["log_V"].push_back(1.0);
    CHECK_THROWS_AS(certificate_from_json(bad), ValidationError);
    bad = j;
    bad["rho"] = -1.0;
    CHECK_THROWS_AS(certificate_from_json(bad), ValidationError);
    bad = j;
    bad["format"] = "other";
    CHECK_THROWS_AS(certificate_from_json(bad), ValidationError);
    bad = j;
    bad["unexpected"] = 0;
    CHECK_THROWS_AS(certificate_from_json(bad), ValidationError);
}

TEST_CASE("number formatting round-trips") {
    for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.02214076e23, 4.9e-324}) {
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_hash(0xabc) == "0000000000000abc");
}

TEST_CASE("policy table round trip") {
    const Model m = build_mm_infinity(test::default_mm_params());
    const TimeGrid grid(1.0, 40);
    const Solution sol = solve(m, grid);
    std::stringstream ss;
    write_policy_table(ss, TableHeader{m.fingerprint(), "T=1,steps=40", "{}"}, sol.policy);
    const Policy back = read_policy_table(ss, m);
    CHECK(back == sol.policy);

    std::stringstream other;
    write_policy_table(other, TableHeader{m.fingerprint() ^ 1, "T=1,steps=40", "{}"}, sol.policy);
    CHECK_THROWS_WITH_AS(read_policy_table(other, m), doctest::Contains("written for model"), ValidationError);

    std::stringstream truncated;
    write_policy_table(truncated, TableHeader{m.fingerprint(), "T=1,steps=40", "{}"}, sol.policy);
    std::string text = truncated.str();
    text.resize(text.rfind('\n', text.size() - 2) + 1);
    std::stringstream cut(text);
    CHECK_THROWS_AS(read_policy_table(cut, m), ParseError);
}

TEST_CASE("value table layout") {
    const Model m = test::two_state_model();
    const Solution sol = solve(m, TimeGrid(1.0, 2));
    std::stringstream ss;
    write_value_table(ss, TableHeader{m.fingerprint(), "T=1,steps=2", "{\"a\":1}"}, sol.values);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "# tool=rsctmdp version=0.1.0");
    std::getline(ss, line);
    CHECK(line == "# model_hash=" + format_hash(m.fingerprint()));
    std::getline(ss, line);
    CHECK(line == "# grid=T=1,steps=2");
    std::getline(ss, line);
    CHECK(line == "# config={\"a\":1}");
    std::getline(ss, line);
    CHECK(line == "t,state,psi,phi");
    std::size_t rows = 0;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 6);
}
