#pragma once

#include "qmax/quasilinear.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qmax {

// Parsed and validated scenario file. Every key is checked; unknown keys and
// unknown registry names throw config_invalid naming the offending key.
struct ScenarioConfig {
    Grid grid;
    double t0 = 0.0, T = 1.0;
    double dt = 0.0, cfl = 0.4;
    Integrator integrator = Integrator::rk4;

    std::string law_name;
    nlohmann::json law_params = nlohmann::json::object();
    std::string data_name;
    nlohmann::json data_params = nlohmann::json::object();
    double data_scale = 1.0;

    QuasilinearParams solver;  // t0, dt, cfl and integrator mirror the fields above
    double gamma = 0.0;        // 0: gamma0 of the linear estimate
    ContinuationOptions monitor;

    std::string report_path, csv_path;
    int csv_stride = 1;
    std::uint64_t seed = 0;

    nlohmann::json study = nlohmann::json::object();

    nlohmann::json to_json() const;
};

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

LawPtr build_law(const ScenarioConfig& c);
DataPtr build_data(const ScenarioConfig& c, const LawPtr& law);

// One CSV row per stored state.
struct SeriesRow {
    double t = 0.0, l2 = 0.0, hm = 0.0, omega = 0.0, dist_boundary_u = 0.0, trace_sup = 0.0;
    double energy_lhs = 0.0, energy_rhs = 0.0;
};
inline constexpr const char* kSeriesHeader = "t,L2,Hm,omega,dist_boundaryU,trace_sup,energy_lhs,energy_rhs";
void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows);

// Energy balance of a (possibly nonlinear) trajectory with the coefficients
// frozen at the trajectory itself; pieces with different step sizes are chained.
// Needs every step stored.
struct EnergySeries {
    std::vector<double> times, lhs, rhs;
};
EnergySeries energy_series(const Trajectory& tr, const LawPtr& law, const ScenarioData& data);

struct SimulationResult {
    ContinuationResult run;
    std::vector<SeriesRow> series;
    nlohmann::json report;
};

SimulationResult simulate(const ScenarioConfig& c);

// Subcommand reports.
nlohmann::json check_compat_report(const ScenarioConfig& c);
// lhs, rhs, residual and the order estimate from the grid with doubled spacing.
nlohmann::json energy_audit_report(const ScenarioConfig& c);

// Process exit codes of the command line tool.
enum class ExitCode : int {
    ok = 0,
    internal = 1,
    config_invalid = 2,
    monitor_triggered = 3,
    compat_failure = 4,
    no_contraction = 5,
    domain_exit = 6,
    numerical = 7,
    identity_violation = 8,
    study_failed = 9,
};
ExitCode exit_code_for(ErrorCode e);

}  // namespace qmax
