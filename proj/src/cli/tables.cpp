#include "rsctmdp/tables.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_hash(std::uint64_t h) {
    std::array<char, 17> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + 16, h, 16);
    std::string s(buf.data(), res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

void write_header(std::ostream& out, const TableHeader& header) {
    out << "# tool=" << kToolName << " version=" << kToolVersion << '\n';
    out << "# model_hash=" << format_hash(header.model_hash) << '\n';
    if (!header.grid.empty()) out << "# grid=" << header.grid << '\n';
    if (!header.config.empty()) out << "# config=" << header.config << '\n';
}

void write_value_table(std::ostream& out, const TableHeader& header, const ValueFunction& values) {
    write_header(out, header);
    out << "t,state,psi,phi\n";
    const TimeGrid& grid = values.grid();
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const std::string t = format_double(grid.time(k));
        for (State i = 0; i < values.state_count(); ++i) {
            out << t << ',' << i << ',' << format_double(values.psi(k, i)) << ',' << format_double(values.phi(k, i))
                << '\n';
        }
    }
}

void write_policy_table(std::ostream& out, const TableHeader& header, const Policy& policy) {
    write_header(out, header);
    out << "t,state,action\n";
    const TimeGrid& grid = policy.grid();
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const std::string t = format_double(grid.time(k));
        for (State i = 0; i < policy.state_count(); ++i) {
            out << t << ',' << i << ',' << format_double(policy.action(k, i)) << '\n';
        }
    }
}

void write_estimate_table(std::ostream& out, const TableHeader& header, const std::vector<EstimateRow>& rows) {
    write_header(out, header);
    out << "policy_id,initial_state,log_estimate,estimate,std_error,n_paths,master_seed\n";
    for (const EstimateRow& r : rows) {
        out << r.policy_id << ',' << r.initial_state << ',' << format_double(r.estimate.log_mean) << ','
            << format_double(r.estimate.estimate()) << ',' << format_double(r.estimate.std_error) << ','
            << r.estimate.n_paths << ',' << r.estimate.master_seed << '\n';
    }
}

void write_paths_table(std::ostream& out, const TableHeader& header, const std::vector<PathSummary>& paths) {
    write_header(out, header);
    out << "path,jumps,log_utility\n";
    for (std::size_t p = 0; p < paths.size(); ++p) {
        out << p << ',' << paths[p].jumps << ',' << format_double(paths[p].log_utility) << '\n';
    }
}

namespace {

void write_point(std::ostream& out, const std::optional<GridPoint>& p) {
    if (!p) {
        out << ",,";
        return;
    }
    out << format_double(p->t) << ',' << p->state << ',';
    if (p->terminal) {
        out << "terminal";
    } else if (p->action) {
        out << format_double(*p->action);
    }
}

}  // namespace

void write_certificate_table(std::ostream& out, const TableHeader& header, const CertificateReport& report) {
    write_header(out, header);
    out << "condition,verdict,margin,evaluated,tightest_t,tightest_state,tightest_action,first_violation_t,"
           "first_violation_state,first_violation_action\n";
    for (Condition c : kConditions) {
        const ConditionCheck& check = report[c];
        out << to_string(c) << ',' << (check.pass ? "PASS" : "FAIL") << ',' << format_double(check.margin) << ','
            << check.evaluated << ',';
        write_point(out, check.tightest);
        out << ',';
        write_point(out, check.first_violation);
        out << '\n';
    }
}

void write_ladder_table(std::ostream& out, const TableHeader& header, const LadderReport& report) {
    write_header(out, header);
    out << "level,active_count,probe_state,psi0,diff_prev,bound_log,policy_at_probe,level_log,within_bound\n";
    for (const LadderRung& rung : report.rungs) {
        for (std::size_t q = 0; q < report.probes.size(); ++q) {
            out << format_double(std::exp(rung.level.log_threshold)) << ',' << rung.active_count << ','
                << report.probes[q] << ',' << format_double(rung.psi0[q]) << ','
                << (rung.diff_prev.empty() ? std::string() : format_double(rung.diff_prev[q])) << ','
                << format_double(rung.bound_log[q]) << ',' << format_double(rung.probe_policy[q].front()) << ','
                << format_double(rung.level.log_threshold) << ',' << (rung.within_bound[q] ? "yes" : "no") << '\n';
        }
    }
}

void write_refinement_table(std::ostream& out, const TableHeader& header, const std::vector<RefinementRow>& rows) {
    write_header(out, header);
    out << "steps,psi0,diff_prev,observed_order\n";
    for (const RefinementRow& r : rows) {
        out << r.steps << ',' << format_double(r.psi0) << ','
            << (std::isnan(r.diff_prev) ? std::string() : format_double(r.diff_prev)) << ','
            << (std::isnan(r.observed_order) ? std::string() : format_double(r.observed_order)) << '\n';
    }
}

void write_compare_tables(std::ostream& ranking, std::ostream& pairs, const TableHeader& header,
                          const std::vector<std::string>& policy_ids, State initial_state,
                          const PolicyComparison& comparison) {
    write_header(ranking, header);
    ranking << "rank,policy_id,initial_state,log_estimate,estimate,std_error,n_paths,master_seed\n";
    for (std::size_t r = 0; r < comparison.ranking.size(); ++r) {
        const std::size_t p = comparison.ranking[r];
        const MCEstimate& e = comparison.estimates[p];
        ranking << r + 1 << ',' << policy_ids[p] << ',' << initial_state << ',' << format_double(e.log_mean) << ','
                << format_double(e.estimate()) << ',' << format_double(e.std_error) << ',' << e.n_paths << ','
                << e.master_seed << '\n';
    }
    write_header(pairs, header);
    pairs << "policy_a,policy_b,difference,combined_error,paired_error\n";
    for (std::size_t a = 0; a < policy_ids.size(); ++a) {
        for (std::size_t b = 0; b < policy_ids.size(); ++b) {
            if (a == b) continue;
            pairs << policy_ids[a] << ',' << policy_ids[b] << ',' << format_double(comparison.difference[a][b]) << ','
                  << format_double(comparison.combined_error[a][b]) << ','
                  << format_double(comparison.paired_error[a][b]) << '\n';
        }
    }
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("policy table line " + std::to_string(line) + ": bad number \"" + std::string(s) + "\"");
    }
    return v;
}

std::size_t parse_size(std::string_view s, std::size_t line) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("policy table line " + std::to_string(line) + ": bad integer \"" + std::string(s) + "\"");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t pos = s.find(sep); pos != std::string_view::npos; pos = s.find(sep, start)) {
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    out.push_back(s.substr(start));
    return out;
}

}  // namespace

Policy read_policy_table(std::istream& in, const Model& model) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::uint64_t> hash;
    std::optional<TimeGrid> grid;
    bool columns_seen = false;
    while (!columns_seen && std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# model_hash=", 0) == 0) {
            std::uint64_t h = 0;
            const std::string_view v = std::string_view(line).substr(13);
            const auto res = std::from_chars(v.data(), v.data() + v.size(), h, 16);
            if (res.ec != std::errc()) throw ParseError("policy table: bad model_hash");
            hash = h;
        } else if (line.rfind("# grid=", 0) == 0) {
            double horizon = 0.0;
            std::size_t steps = 0;
            for (std::string_view part : split(std::string_view(line).substr(7), ',')) {
                if (part.rfind("T=", 0) == 0) horizon = parse_double(part.substr(2), line_no);
                if (part.rfind("steps=", 0) == 0) steps = parse_size(part.substr(6), line_no);
            }
            grid.emplace(horizon, steps);
        } else if (line.rfind('#', 0) != 0) {
            if (line != "t,state,action") throw ParseError("policy table: expected columns t,state,action");
            columns_seen = true;
        }
    }
    if (!hash || !grid || !columns_seen) throw ParseError("policy table: missing model_hash, grid or column header");
    if (*hash != model.fingerprint()) {
        throw ValidationError("policy table was written for model " + format_hash(*hash) + ", not " +
                              format_hash(model.fingerprint()));
    }
    const std::size_t n = model.state_count();
    Policy policy(*grid, n);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3) throw ParseError("policy table line " + std::to_string(line_no) + ": expected 3 fields");
        const std::size_t k = rows / n;
        const State i = rows % n;
        if (k > grid->steps()) throw ParseError("policy table: too many rows");
        if (parse_size(fields[1], line_no) != i || parse_double(fields[0], line_no) != grid->time(k)) {
            throw ParseError("policy table line " + std::to_string(line_no) + ": rows out of order");
        }
        const double a = parse_double(fields[2], line_no);
        policy.set(k, i, model.action_index(i, a), a);
        ++rows;
    }
    if (rows != (grid->steps() + 1) * n) throw ParseError("policy table: expected one row per node and state");
    return policy;
}

Policy read_policy_file(const std::filesystem::path& path, const Model& model) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read policy table " + path.string());
    return read_policy_table(in, model);
}

}  // namespace rsctmdp
