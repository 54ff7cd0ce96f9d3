// Command line front end: one subcommand per harness, a JSON scenario file in,
// a JSON report (stdout or output.report) and for simulate a CSV series out.

#include "qmax/localization.hpp"
#include "qmax/scenario.hpp"
#include "qmax/studies.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace qmax;
using nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string report_path, csv_path;
};

ScenarioConfig load(const Common& o) {
    ScenarioConfig c = load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.report_path.empty()) c.report_path = o.report_path;
    if (!o.csv_path.empty()) c.csv_path = o.csv_path;
    return c;
}

void emit(const json& report, const std::string& path) {
    const std::string text = report.dump(2) + "\n";
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::config_invalid, "cannot write report '" + path + "'");
    out << text;
}

int run_simulate(const Common& o) {
    ScenarioConfig c = load(o);
    SimulationResult r = simulate(c);
    if (!c.csv_path.empty()) {
        std::ofstream csv(c.csv_path, std::ios::binary);
        if (!csv) throw Error(ErrorCode::config_invalid, "cannot write csv '" + c.csv_path + "'");
        write_series_csv(csv, r.series);
    }
    emit(r.report, c.report_path);
    const BlowupReport& b = r.run.report;
    if (b.status == "reached") return int(ExitCode::ok);
    if (b.status == "monitor") return int(ExitCode::monitor_triggered);
    std::cerr << "simulate: " << b.detail << "\n";
    return int(b.failure ? exit_code_for(*b.failure) : ExitCode::internal);
}

int run_check_compat(const Common& o) {
    ScenarioConfig c = load(o);
    json r = check_compat_report(c);
    emit(r, c.report_path);
    return int(r.at("pass").get<bool>() ? ExitCode::ok : ExitCode::compat_failure);
}

int run_energy_audit(const Common& o) {
    ScenarioConfig c = load(o);
    emit(energy_audit_report(c), c.report_path);
    return int(ExitCode::ok);
}

int run_study_cmd(const std::string& kind, const Common& o) {
    ScenarioConfig c = load(o);
    StudyResult s = run_study(kind, c);
    json r = s.to_json();
    r["command"] = kind;
    r["config"] = c.to_json();
    emit(r, c.report_path);
    return int(s.pass ? ExitCode::ok : ExitCode::study_failed);
}

struct LocalizeOptions {
    std::string chart = "all";
    std::string params = "{}";
    std::uint64_t seed = 2024;
    int samples = 64;
    bool printed_sign = false;
    std::string report_path;
};

int run_localize(const LocalizeOptions& o) {
    json params;
    try {
        params = json::parse(o.params);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::config_invalid, std::string("--params is not valid JSON: ") + e.what());
    }
    std::vector<std::string> names = o.chart == "all" ? chart_names() : std::vector<std::string>{o.chart};
    VerifyOptions v;
    v.seed = o.seed;
    v.random_boundary = v.random_interior = o.samples;
    v.loc.printed_sign = o.printed_sign;
    json table = json::array();
    bool pass = true;
    double worst = 0.0;
    for (const auto& n : names) {
        ChartPtr c = build_chart(n, o.chart == "all" ? json::object() : params);
        ChartVerification r = verify_chart(*c, v);
        pass = pass && r.pass;
        worst = std::max(worst, r.identity_residual);
        table.push_back(r.to_json());
    }
    json report = {{"command", "localize-verify"}, {"seed", o.seed},          {"printed_sign", o.printed_sign},
                   {"charts", table},              {"max_identity_residual", worst}, {"pass", pass}};
    emit(report, o.report_path);
    return int(pass ? ExitCode::ok : ExitCode::identity_violation);
}

void add_common(CLI::App* sub, Common& o, bool csv) {
    sub->add_option("config", o.config_path, "scenario file (JSON)")->required();
    sub->add_option("--seed", o.seed, "seed for every random choice (overrides the config)");
    sub->add_option("--report", o.report_path, "report path (overrides output.report; '-' for stdout)");
    if (csv) sub->add_option("--csv", o.csv_path, "CSV series path (overrides output.csv)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasilinear Maxwell solver with absorbing boundary conditions"};
    app.require_subcommand(1);

    Common sim, cc, ea, contraction, convergence, dependence;
    LocalizeOptions loc;
    auto* s_sim = app.add_subcommand("simulate", "maximal continuation of the Picard solver");
    add_common(s_sim, sim, true);
    auto* s_cc = app.add_subcommand("check-compat", "compatibility residuals of the data at t0");
    add_common(s_cc, cc, false);
    auto* s_ea = app.add_subcommand("energy-audit", "energy balance of the linear problem frozen at u = 0");
    add_common(s_ea, ea, false);
    auto* s_con = app.add_subcommand("contraction-study", "Picard ratios over data amplitudes");
    add_common(s_con, contraction, false);
    auto* s_cv = app.add_subcommand("convergence-study", "manufactured-solution errors over resolutions");
    add_common(s_cv, convergence, false);
    auto* s_dep = app.add_subcommand("dependence-study", "solution differences under data scaling");
    add_common(s_dep, dependence, false);
    auto* s_loc = app.add_subcommand("localize-verify", "structural identities of the boundary charts");
    s_loc->add_option("chart", loc.chart, "chart name or 'all'");
    s_loc->add_option("--params", loc.params, "chart parameters (JSON object)");
    s_loc->add_option("--seed", loc.seed, "seed of the random samples");
    s_loc->add_option("--samples", loc.samples, "random samples per set")->check(CLI::NonNegativeNumber);
    s_loc->add_flag("--printed-sign", loc.printed_sign, "use the sign of R-hat as printed");
    s_loc->add_option("--report", loc.report_path, "report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : int(ExitCode::config_invalid);
    }

    try {
        if (*s_sim) return run_simulate(sim);
        if (*s_cc) return run_check_compat(cc);
        if (*s_ea) return run_energy_audit(ea);
        if (*s_con) return run_study_cmd("contraction-study", contraction);
        if (*s_cv) return run_study_cmd("convergence-study", convergence);
        if (*s_dep) return run_study_cmd("dependence-study", dependence);
        if (*s_loc) return run_localize(loc);
    } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
        return int(exit_code_for(e.code()));
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return int(ExitCode::internal);
    }
    return int(ExitCode::internal);
}
