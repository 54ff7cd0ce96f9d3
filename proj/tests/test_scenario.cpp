#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmax/linear.hpp"
#include "qmax/scenario.hpp"
#include "qmax/studies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

using namespace qmax;
using nlohmann::json;

namespace {

json plane_wave_config() {
    return {{"grid", {{"n", 10}, {"periodic3", true}}},
            {"time", {{"T", 0.2}}},
            {"law", {{"name", "linear"}}},
            {"data", {{"name", "plane-wave"}}},
            {"solver", {{"m", 2}, {"tau", 0.1}}}};
}

json kerr_pulse_config(double amp) {
    return {{"grid", {{"n", 10}}},
            {"time", {{"T", 0.1}}},
            {"law", {{"name", "kerr"}, {"params", {{"alpha", 1.0}, {"zeta1", 0.5}}}}},
            {"data", {{"name", "pulse"}, {"params", {{"amplitude", amp}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.25}}}}},
            {"solver", {{"m", 2}, {"tau", 0.1}}}};
}

ErrorCode code_of(const json& j) {
    try {
        parse_config(j);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a config error");
    return ErrorCode::config_invalid;
}

std::string message_of(const json& j) {
    try {
        parse_config(j);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("config defaults") {
    ScenarioConfig c = parse_config({{"grid", {{"n", 6}}}, {"law", {{"name", "linear"}}}, {"data", {{"name", "zero"}}}});
    CHECK(c.grid.n1 == 6);
    CHECK(c.grid.n3 == 6);
    CHECK(c.t0 == 0.0);
    CHECK(c.T == 1.0);
    CHECK(c.solver.m == 3);
    CHECK(c.solver.check_compat);
    CHECK_FALSE(c.solver.enforce_ball);
    CHECK(c.csv_stride == 1);
    CHECK(c.seed == 0);
    CHECK(c.integrator == Integrator::rk4);
}

TEST_CASE("config round trip through to_json") {
    json j = kerr_pulse_config(0.05);
    j["grid"] = {{"n", {8, 6, 9}}, {"L", {1.0, 2.0}}, {"H", 1.5}};
    j["seed"] = 11;
    j["output"] = {{"csv", "a.csv"}, {"stride", 2}};
    j["solver"]["constants"] = {{"c_m0", 4.0}};
    ScenarioConfig a = parse_config(j);
    CHECK(a.grid.n2 == 6);
    CHECK(a.grid.L2 == 2.0);
    CHECK(a.solver.constants.c_m0 == 4.0);
    ScenarioConfig b = parse_config(a.to_json());
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("config errors name the offending key") {
    json j = plane_wave_config();
    j["bogus"] = 1;
    CHECK(code_of(j) == ErrorCode::config_invalid);
    CHECK(contains(message_of(j), "'bogus'"));

    j = plane_wave_config();
    j["solver"]["tua"] = 0.1;
    CHECK(contains(message_of(j), "'solver.tua'"));

    j = plane_wave_config();
    j["law"]["name"] = "no-such-law";
    CHECK(code_of(j) == ErrorCode::config_invalid);
    CHECK(contains(message_of(j), "law.name"));

    j = plane_wave_config();
    j["data"]["name"] = "no-such-data";
    CHECK(contains(message_of(j), "data.name"));

    j = plane_wave_config();
    j["time"]["T"] = -1.0;
    CHECK(contains(message_of(j), "time.T"));

    j = plane_wave_config();
    j["seed"] = -3;
    CHECK(contains(message_of(j), "seed"));

    j = plane_wave_config();
    j["solver"]["compat_mode"] = "loose";
    CHECK(code_of(j) == ErrorCode::config_invalid);

    j = plane_wave_config();
    j.erase("grid");
    CHECK(code_of(j) == ErrorCode::config_invalid);

    CHECK_THROWS_AS(load_config("/nonexistent/qmax.json"), Error);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorCode::config_invalid) == ExitCode::config_invalid);
    CHECK(exit_code_for(ErrorCode::compat_failure) == ExitCode::compat_failure);
    CHECK(exit_code_for(ErrorCode::no_contraction) == ExitCode::no_contraction);
    CHECK(exit_code_for(ErrorCode::domain_exit) == ExitCode::domain_exit);
    CHECK(exit_code_for(ErrorCode::nan_detected) == ExitCode::numerical);
    CHECK(exit_code_for(ErrorCode::identity_violation) == ExitCode::identity_violation);
    CHECK(exit_code_for(ErrorCode::perturbed_run_failure) == ExitCode::study_failed);
}

TEST_CASE("csv series") {
    std::ostringstream os;
    SeriesRow r;
    r.t = 0.5;
    r.dist_boundary_u = std::numeric_limits<double>::infinity();
    r.energy_lhs = std::numeric_limits<double>::quiet_NaN();
    write_series_csv(os, {r, r});
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,L2,Hm,omega,dist_boundaryU,trace_sup,energy_lhs,energy_rhs");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
        CHECK(contains(line, "inf"));
        CHECK(contains(line, "nan"));
    }
    CHECK(rows == 2);
}

TEST_CASE("check-compat report") {
    json j = {{"grid", {{"n", 6}}}, {"law", {{"name", "kerr"}}}, {"data", {{"name", "zero"}}}, {"solver", {{"m", 3}}}};
    json r = check_compat_report(parse_config(j));
    CHECK(r["pass"] == true);
    CHECK(r["command"] == "check-compat");

    // a pulse sitting on the face without matching boundary data violates order 0
    j["law"] = {{"name", "linear"}};
    j["data"] = {{"name", "pulse"}, {"params", {{"center", {0.5, 0.5, 0.0}}, {"width", 0.4}}}};
    r = check_compat_report(parse_config(j));
    CHECK(r["pass"] == false);

    j["study"] = {{"kind", "sideways"}};
    CHECK_THROWS_AS(check_compat_report(parse_config(j)), Error);
}

TEST_CASE("simulate: linear plane wave") {
    ScenarioConfig c = parse_config(plane_wave_config());
    SimulationResult r = simulate(c);
    CHECK(r.report["status"] == "reached");
    CHECK(r.report["converged"] == true);
    CHECK(r.report["iterations"] == 1);
    CHECK(r.report["t_reached"].get<double>() == doctest::Approx(0.2));
    CHECK(r.series.size() == r.run.report.rows.size());
    CHECK(r.series.front().t == 0.0);
    CHECK(r.series.back().t == doctest::Approx(0.2));
    // centered differences in a periodic box lose energy only through the time integrator
    CHECK(r.report["energy_residual"].get<double>() < 1e-6);

    SimulationResult again = simulate(c);
    CHECK(r.report.dump() == again.report.dump());

    c.csv_stride = 3;
    SimulationResult thin = simulate(c);
    CHECK(thin.series.front().t == 0.0);
    CHECK(thin.series.back().t == doctest::Approx(0.2));
    CHECK(thin.series.size() == (r.series.size() - 1 + 2) / 3 + ((r.series.size() - 1) % 3 != 0));
}

TEST_CASE("energy series of a linear trajectory matches the direct audit") {
    auto law = make_law("linear", {{"sigma", 0.2}});
    auto data = make_data("pulse", {{"amplitude", 1.0}, {"width", 0.4}}, law);
    Grid g;
    g.n1 = g.n2 = g.n3 = 8;
    auto c = law_coefficients(*law, g);
    SolverOptions o;
    o.t_final = 0.3;
    Trajectory tr = solve_linear(*c, data->initial(g, 0.0), *data, o);
    EnergyAudit direct = energy_audit(tr, *c, *data);
    EnergySeries es = energy_series(tr, law, *data);
    REQUIRE(es.lhs.size() == tr.states.size());
    CHECK(es.lhs.back() == doctest::Approx(direct.lhs).epsilon(1e-12));
    CHECK(es.rhs.back() == doctest::Approx(direct.rhs).epsilon(1e-12));

    // split the same trajectory into two step sizes by dropping every other state of the first half
    Trajectory mixed = tr;
    mixed.states.clear();
    mixed.times.clear();
    mixed.steps.clear();
    const int half = tr.n_steps / 2 - (tr.n_steps / 2) % 2;
    for (int s = 0; s <= tr.n_steps; ++s) {
        if (s < half && s % 2 == 1) continue;
        mixed.states.push_back(tr.states[std::size_t(s)]);
        mixed.times.push_back(tr.times[std::size_t(s)]);
        mixed.steps.push_back(s);
    }
    EnergySeries chained = energy_series(mixed, law, *data);
    REQUIRE(chained.lhs.size() == mixed.states.size());
    CHECK(chained.lhs.front() == doctest::Approx(es.lhs.front()));
    // the coarser quadrature differs from the fine one at second order only
    CHECK(std::abs(chained.rhs.back() - es.rhs.back()) < 1e-3 * std::abs(es.rhs.front()));
}

TEST_CASE("fit_loglog_slope") {
    std::vector<double> x = {1e-1, 1e-2, 1e-3}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 2.5));
    CHECK(fit_loglog_slope(x, y) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(std::isnan(fit_loglog_slope({1.0, 1.0}, {2.0, 3.0})));
}

TEST_CASE("dependence study: linear law scales exactly") {
    auto law = make_law("linear");
    auto data = make_data("pulse", {{"amplitude", 0.5}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.25}}, law);
    Grid g;
    g.n1 = g.n2 = g.n3 = 10;
    QuasilinearParams p;
    p.m = 2;
    StudyResult s = dependence_study(law, data, g, {1e-1, 1e-2, 0.0, 1e-3}, 0.1, p);
    CHECK(s.pass);
    CHECK(s.fitted_slope == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.rows[2].value == 0.0);
    // Psi((1 + d) u0) - Psi(u0) = d Psi(u0), so value / d is one number
    const double c0 = s.rows[0].value / 1e-1;
    CHECK(s.rows[1].value / 1e-2 == doctest::Approx(c0).epsilon(1e-6));
    CHECK(s.rows[3].value / 1e-3 == doctest::Approx(c0).epsilon(1e-6));
    CHECK_THROWS_AS(dependence_study(law, data, g, {}, 0.1, p), Error);
}

TEST_CASE("convergence study arguments") {
    auto law = make_law("linear");
    auto man = make_data("manufactured", json::object(), law);
    Grid g;
    QuasilinearParams p;
    CHECK_THROWS_AS(convergence_study(law, man, g, {8, 16}, 0.1, p), Error);
    CHECK_THROWS_AS(convergence_study(law, man, g, {8, 16, 12}, 0.1, p), Error);
    CHECK_THROWS_AS(convergence_study(law, make_data("zero", json::object(), law), g, {6, 8, 10}, 0.1, p), Error);
}

TEST_CASE("contraction study over amplitudes") {
    ScenarioConfig c = parse_config(kerr_pulse_config(1.0));
    c.study = {{"amplitudes", {0.04, 0.02, 0.01}}};
    StudyResult s = run_study("contraction-study", c);
    CHECK(s.pass);
    CHECK(s.monotone);
    REQUIRE(s.rows.size() == 3);
    for (const auto& r : s.rows) {
        INFO(r.error);
        CHECK(r.ok);
        CHECK(r.value < 1.0);
    }
    // the Picard ratio scales like the amplitude squared for the cubic Kerr term
    CHECK(s.fitted_slope > 1.5);

    c.study = {{"amplitude", {0.1}}};
    CHECK_THROWS_AS(run_study("contraction-study", c), Error);
    CHECK_THROWS_AS(run_study("no-such-study", c), Error);
}
