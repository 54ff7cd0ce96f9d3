#include "qmax/scenario.hpp"

#include "qmax/norms.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace qmax {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::config_invalid, msg); }

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) invalid("'" + path + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            invalid("unknown key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
}

double get_num(const json& j, const std::string& path, const char* key, double def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) invalid("'" + path + "." + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid("'" + path + "." + key + "' must be finite");
    return x;
}

int get_int(const json& j, const std::string& path, const char* key, int def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) invalid("'" + path + "." + key + "' must be an integer");
    return v.get<int>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_boolean()) invalid("'" + path + "." + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key, const std::string& def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_string()) invalid("'" + path + "." + key + "' must be a string");
    return v.get<std::string>();
}

json get_obj(const json& j, const char* key) {
    if (!j.contains(key)) return json::object();
    if (!j.at(key).is_object()) invalid(std::string("'") + key + "' must be an object");
    return j.at(key);
}

void parse_grid(const json& j, Grid& g) {
    check_keys(j, "grid", {"n", "L", "H", "periodic3"});
    if (!j.contains("n")) invalid("'grid.n' is required");
    const json& n = j.at("n");
    if (n.is_number_integer()) {
        g.n1 = g.n2 = g.n3 = n.get<int>();
    } else if (n.is_array() && n.size() == 3 && n[0].is_number_integer() && n[1].is_number_integer() &&
               n[2].is_number_integer()) {
        g.n1 = n[0].get<int>();
        g.n2 = n[1].get<int>();
        g.n3 = n[2].get<int>();
    } else {
        invalid("'grid.n' must be an integer or three integers");
    }
    if (j.contains("L")) {
        const json& L = j.at("L");
        if (L.is_number()) {
            g.L1 = g.L2 = L.get<double>();
        } else if (L.is_array() && L.size() == 2 && L[0].is_number() && L[1].is_number()) {
            g.L1 = L[0].get<double>();
            g.L2 = L[1].get<double>();
        } else {
            invalid("'grid.L' must be a number or two numbers");
        }
    }
    g.H = get_num(j, "grid", "H", 1.0);
    g.periodic3 = get_bool(j, "grid", "periodic3", false);
    if (!(g.L1 > 0.0 && g.L2 > 0.0 && g.H > 0.0)) invalid("grid extents must be positive");
    try {
        g.validate();
    } catch (const Error& e) {
        invalid(std::string("'grid': ") + e.what());
    }
}

void parse_named(const json& j, const char* section, std::string& name, json& params) {
    if (!j.contains(section)) invalid(std::string("'") + section + "' is required");
    const json& s = j.at(section);
    const std::string path = section;
    std::set<std::string> allowed = {"name", "params"};
    if (path == "data") allowed.insert("scale");
    check_keys(s, path, allowed);
    if (!s.contains("name") || !s.at("name").is_string()) invalid("'" + path + ".name' must be a string");
    name = s.at("name").get<std::string>();
    params = s.contains("params") ? s.at("params") : json::object();
    if (!params.is_object()) invalid("'" + path + ".params' must be an object");
}

// Registry errors become config errors that name the key.
template <class F>
auto registry_call(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::config_invalid || e.code() == ErrorCode::law_invalid)
            invalid("'" + key + "': " + e.what());
        throw;
    }
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

Grid coarsened(const Grid& g) {
    Grid c = g;
    c.n1 = g.n1 / 2;
    c.n2 = g.n2 / 2;
    c.n3 = g.periodic3 ? g.n3 / 2 : (g.n3 - 1) / 2 + 1;
    return c;
}

}  // namespace

json ScenarioConfig::to_json() const {
    json j;
    j["grid"] = {{"n", {grid.n1, grid.n2, grid.n3}}, {"L", {grid.L1, grid.L2}}, {"H", grid.H},
                 {"periodic3", grid.periodic3}};
    j["time"] = {{"t0", t0}, {"T", T}, {"dt", dt}, {"cfl", cfl}, {"integrator", integrator_name(integrator)}};
    j["law"] = {{"name", law_name}, {"params", law_params}};
    j["data"] = {{"name", data_name}, {"params", data_params}, {"scale", data_scale}};
    const QuasilinearParams& s = solver;
    j["solver"] = {{"m", s.m},
                   {"tau", s.tau},
                   {"tol", s.tol},
                   {"n_max", s.n_max},
                   {"R", s.R},
                   {"kappa", s.kappa},
                   {"kappa_tilde", s.kappa_tilde},
                   {"gamma", gamma},
                   {"enforce_ball", s.enforce_ball},
                   {"check_compat", s.check_compat},
                   {"compat_mode", s.compat.mode},
                   {"compat_rel_tol", s.compat.rel_tol},
                   {"no_contraction_run", s.no_contraction_run},
                   {"dt_safety", s.dt_safety},
                   {"constants", {{"c_m0", s.constants.c_m0}, {"c_bar", s.constants.c_bar}, {"c0", s.constants.c0}}}};
    j["monitor"] = {{"a", monitor.monitor_a}, {"b", monitor.monitor_b}, {"max_halvings", monitor.max_halvings}};
    j["output"] = {{"report", report_path}, {"csv", csv_path}, {"stride", csv_stride}};
    j["seed"] = seed;
    j["study"] = study;
    return j;
}

ScenarioConfig parse_config(const json& j) {
    check_keys(j, "", {"description", "grid", "time", "law", "data", "solver", "monitor", "output", "seed", "study"});
    ScenarioConfig c;
    if (!j.contains("grid")) invalid("'grid' is required");
    parse_grid(j.at("grid"), c.grid);

    const json t = get_obj(j, "time");
    check_keys(t, "time", {"t0", "T", "dt", "cfl", "integrator"});
    c.t0 = get_num(t, "time", "t0", 0.0);
    c.T = get_num(t, "time", "T", 1.0);
    c.dt = get_num(t, "time", "dt", 0.0);
    c.cfl = get_num(t, "time", "cfl", 0.4);
    if (!(c.T > c.t0)) invalid("'time.T' must exceed 'time.t0'");
    if (c.dt < 0.0) invalid("'time.dt' must be nonnegative");
    if (!(c.cfl > 0.0)) invalid("'time.cfl' must be positive");
    c.integrator = registry_call("time.integrator", [&] { return parse_integrator(get_str(t, "time", "integrator", "rk4")); });

    parse_named(j, "law", c.law_name, c.law_params);
    parse_named(j, "data", c.data_name, c.data_params);
    c.data_scale = get_num(j.at("data"), "data", "scale", 1.0);

    const json s = get_obj(j, "solver");
    check_keys(s, "solver", {"m", "tau", "tol", "n_max", "R", "kappa", "kappa_tilde", "gamma", "enforce_ball",
                             "check_compat", "compat_mode", "compat_rel_tol", "no_contraction_run", "dt_safety",
                             "constants"});
    QuasilinearParams& q = c.solver;
    q.m = get_int(s, "solver", "m", 3);
    q.tau = get_num(s, "solver", "tau", 0.25);
    q.tol = get_num(s, "solver", "tol", 1e-10);
    q.n_max = get_int(s, "solver", "n_max", 20);
    q.R = get_num(s, "solver", "R", 0.0);
    q.kappa = get_num(s, "solver", "kappa", 0.0);
    q.kappa_tilde = get_num(s, "solver", "kappa_tilde", 0.0);
    c.gamma = get_num(s, "solver", "gamma", 0.0);
    q.enforce_ball = get_bool(s, "solver", "enforce_ball", false);
    q.check_compat = get_bool(s, "solver", "check_compat", true);
    q.compat.mode = get_str(s, "solver", "compat_mode", "auto");
    q.compat.rel_tol = get_num(s, "solver", "compat_rel_tol", 1e-8);
    q.no_contraction_run = get_int(s, "solver", "no_contraction_run", 3);
    q.dt_safety = get_num(s, "solver", "dt_safety", 0.8);
    if (s.contains("constants")) {
        const json& k = s.at("constants");
        check_keys(k, "solver.constants", {"c_m0", "c_bar", "c0"});
        q.constants.c_m0 = get_num(k, "solver.constants", "c_m0", 1.0);
        q.constants.c_bar = get_num(k, "solver.constants", "c_bar", 1.0);
        q.constants.c0 = get_num(k, "solver.constants", "c0", 1.0);
    }
    if (q.m < 1) invalid("'solver.m' must be at least 1");
    if (!(q.tau > 0.0)) invalid("'solver.tau' must be positive");
    if (!(q.tol > 0.0)) invalid("'solver.tol' must be positive");
    if (q.n_max < 1) invalid("'solver.n_max' must be at least 1");
    if (q.R < 0.0 || q.kappa < 0.0 || q.kappa_tilde < 0.0 || c.gamma < 0.0)
        invalid("'solver' radii and gamma must be nonnegative");
    if (!(q.compat.mode == "auto" || q.compat.mode == "relative" || q.compat.mode == "dx2"))
        invalid("'solver.compat_mode' must be auto, relative or dx2");
    if (q.no_contraction_run < 1) invalid("'solver.no_contraction_run' must be at least 1");
    if (!(q.dt_safety > 0.0 && q.dt_safety <= 1.0)) invalid("'solver.dt_safety' must lie in (0, 1]");
    q.t0 = c.t0;
    q.dt = c.dt;
    q.cfl = c.cfl;
    q.integrator = c.integrator;

    const json mo = get_obj(j, "monitor");
    check_keys(mo, "monitor", {"a", "b", "max_halvings"});
    c.monitor.monitor_a = get_num(mo, "monitor", "a", 0.25);
    c.monitor.monitor_b = get_num(mo, "monitor", "b", 1e3);
    c.monitor.max_halvings = get_int(mo, "monitor", "max_halvings", 4);
    if (!(c.monitor.monitor_a > 0.0 && c.monitor.monitor_b > 1.0 && c.monitor.max_halvings >= 0))
        invalid("'monitor' thresholds out of range");

    const json o = get_obj(j, "output");
    check_keys(o, "output", {"report", "csv", "stride"});
    c.report_path = get_str(o, "output", "report", "");
    c.csv_path = get_str(o, "output", "csv", "");
    c.csv_stride = get_int(o, "output", "stride", 1);
    if (c.csv_stride < 1) invalid("'output.stride' must be at least 1");

    if (j.contains("seed")) {
        const json& sd = j.at("seed");
        if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<std::int64_t>() < 0))
            invalid("'seed' must be a nonnegative integer");
        c.seed = sd.get<std::uint64_t>();
    }
    c.study = get_obj(j, "study");

    // Registry names are resolved here so that a bad name is a config error.
    LawPtr law = build_law(c);
    build_data(c, law);
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) invalid("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        invalid("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

LawPtr build_law(const ScenarioConfig& c) {
    return registry_call("law.name", [&] { return make_law(c.law_name, c.law_params); });
}

DataPtr build_data(const ScenarioConfig& c, const LawPtr& law) {
    DataPtr d = registry_call("data.name", [&] { return make_data(c.data_name, c.data_params, law); });
    return c.data_scale == 1.0 ? d : scale_data(d, c.data_scale);
}

void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows) {
    os << kSeriesHeader << '\n';
    for (const auto& r : rows)
        os << csv_number(r.t) << ',' << csv_number(r.l2) << ',' << csv_number(r.hm) << ',' << csv_number(r.omega)
           << ',' << csv_number(r.dist_boundary_u) << ',' << csv_number(r.trace_sup) << ','
           << csv_number(r.energy_lhs) << ',' << csv_number(r.energy_rhs) << '\n';
}

EnergySeries energy_series(const Trajectory& tr, const LawPtr& law, const ScenarioData& data) {
    EnergySeries out;
    const std::size_t n = tr.states.size();
    if (n == 0) return out;
    if (n == 1) {
        auto one = std::make_shared<Trajectory>(tr);
        FrozenCoefficients fc(law, one);
        EnergyAccumulator acc(fc, data, tr.grid);
        acc.observe(0, tr.times[0], tr.states[0]);
        out.times.push_back(tr.times[0]);
        out.lhs.push_back(acc.result().lhs);
        out.rhs.push_back(acc.result().rhs);
        return out;
    }
    double e0 = 0.0, q_prev = 0.0, p_prev = 0.0;
    std::size_t a = 0;
    while (a + 1 < n) {
        // Maximal piece [a, b] with a uniform step.
        const double h = tr.times[a + 1] - tr.times[a];
        std::size_t b = a + 1;
        while (b + 1 < n && std::abs(tr.times[b + 1] - tr.times[b] - h) <= 1e-9 * std::max(1.0, h)) ++b;
        auto piece = std::make_shared<Trajectory>();
        piece->grid = tr.grid;
        piece->t0 = tr.times[a];
        piece->dt = h;
        piece->n_steps = int(b - a);
        for (std::size_t s = a; s <= b; ++s) {
            piece->steps.push_back(int(s - a));
            piece->times.push_back(tr.times[s]);
            piece->states.push_back(tr.states[s]);
        }
        FrozenCoefficients fc(law, piece);
        EnergyAccumulator acc(fc, data, tr.grid);
        for (std::size_t s = 0; s < piece->states.size(); ++s)
            acc.observe(piece->steps[s], piece->times[s], piece->states[s]);
        const EnergyAudit& r = acc.result();
        if (a == 0) e0 = r.energy_initial;
        for (std::size_t s = (a == 0 ? 0 : 1); s < r.times.size(); ++s) {
            out.times.push_back(r.times[s]);
            out.lhs.push_back(r.lhs_series[s] + q_prev);
            out.rhs.push_back(r.rhs_series[s] - r.energy_initial + e0 + p_prev);
        }
        q_prev += r.dissipation;
        p_prev += r.work;
        a = b;
    }
    return out;
}

SimulationResult simulate(const ScenarioConfig& c) {
    LawPtr law = build_law(c);
    DataPtr data = build_data(c, law);
    SimulationResult out;
    ContinuationOptions opt = c.monitor;
    opt.store_stride = 1;
    out.run = continue_maximal(law, *data, c.grid, c.T, c.solver, opt);
    const BlowupReport& rep = out.run.report;

    EnergySeries es;
    if (out.run.trajectory.states.size() == rep.rows.size()) es = energy_series(out.run.trajectory, law, *data);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const MonitorRow& m = rep.rows[i];
        SeriesRow r;
        r.t = m.t;
        r.l2 = m.l2;
        r.hm = m.hm;
        r.omega = m.omega;
        r.dist_boundary_u = m.dist_boundary_u;
        r.trace_sup = m.trace_sup;
        const bool have = i < es.lhs.size();
        r.energy_lhs = have ? es.lhs[i] : std::numeric_limits<double>::quiet_NaN();
        r.energy_rhs = have ? es.rhs[i] : std::numeric_limits<double>::quiet_NaN();
        if (i % std::size_t(c.csv_stride) == 0 || i + 1 == rep.rows.size()) out.series.push_back(r);
    }

    int iterations = 0;
    bool all_converged = !out.run.histories.empty();
    for (const auto& h : out.run.histories) {
        iterations = std::max(iterations, h.iterations);
        all_converged = all_converged && h.converged;
    }
    json& j = out.report;
    j["command"] = "simulate";
    j["config"] = c.to_json();
    j["converged"] = rep.status == "reached" && all_converged;
    j["status"] = rep.status;
    j["criterion"] = rep.criterion;
    j["t_reached"] = rep.t_reached;
    j["iterations"] = iterations;
    j["windows"] = rep.steps;
    j["energy_residual"] = es.lhs.empty() ? json() : finite_or_null(std::abs(es.lhs.back() - es.rhs.back()));
    j["continuation"] = out.run.to_json();
    return out;
}

json check_compat_report(const ScenarioConfig& c) {
    LawPtr law = build_law(c);
    DataPtr data = build_data(c, law);
    std::string kind = "nonlinear";
    if (c.study.contains("kind")) {
        if (!c.study.at("kind").is_string()) invalid("'study.kind' must be a string");
        kind = c.study.at("kind").get<std::string>();
        if (kind != "linear" && kind != "nonlinear") invalid("'study.kind' must be linear or nonlinear");
    }
    CompatReport r = check_cc(kind, c.solver.m, *data, *law, c.grid, c.t0, c.solver.compat);
    json j = r.to_json();
    j["command"] = "check-compat";
    j["config"] = c.to_json();
    return j;
}

json energy_audit_report(const ScenarioConfig& c) {
    LawPtr law = build_law(c);
    DataPtr data = build_data(c, law);
    SolverOptions o;
    o.t0 = c.t0;
    o.t_final = c.T;
    o.dt = c.dt;
    o.cfl = c.cfl;
    o.integrator = c.integrator;
    auto run = [&](const Grid& g) {
        auto coeffs = law_coefficients(*law, g);
        return run_energy_audit(*coeffs, data->initial(g, c.t0), *data, o);
    };
    EnergyAudit fine = run(c.grid);
    json j = fine.to_json();
    j.erase("times");
    j.erase("lhs_series");
    j.erase("rhs_series");
    j["command"] = "energy-audit";
    j["config"] = c.to_json();
    j["order_estimate"] = json();
    const Grid g2 = coarsened(c.grid);
    bool coarse_ok = true;
    try {
        g2.validate();
    } catch (const Error&) {
        coarse_ok = false;
    }
    if (coarse_ok && c.dt == 0.0) {
        EnergyAudit coarse = run(g2);
        j["coarse_residual"] = coarse.residual;
        if (coarse.residual > 0.0 && fine.residual > 0.0)
            j["order_estimate"] = std::log2(coarse.residual / fine.residual);
    }
    return j;
}

ExitCode exit_code_for(ErrorCode e) {
    switch (e) {
        case ErrorCode::config_invalid:
        case ErrorCode::law_invalid:
        case ErrorCode::grid_too_small:
        case ErrorCode::k_too_large:
        case ErrorCode::degenerate_chart:
        case ErrorCode::order_exceeds_derivative_data:
            return ExitCode::config_invalid;
        case ErrorCode::compat_failure:
            return ExitCode::compat_failure;
        case ErrorCode::no_contraction:
            return ExitCode::no_contraction;
        case ErrorCode::ball_exit:
        case ErrorCode::domain_exit:
        case ErrorCode::domain_violation:
        case ErrorCode::zeta_domain_violation:
            return ExitCode::domain_exit;
        case ErrorCode::nan_detected:
        case ErrorCode::cfl_violation:
        case ErrorCode::singular_a0:
        case ErrorCode::singular_chi:
        case ErrorCode::non_smooth_input:
        case ErrorCode::coefficient_invariant_failure:
        case ErrorCode::positivity_lost:
            return ExitCode::numerical;
        case ErrorCode::identity_violation:
            return ExitCode::identity_violation;
        case ErrorCode::perturbed_run_failure:
            return ExitCode::study_failed;
        case ErrorCode::shape_mismatch:
            return ExitCode::internal;
    }
    return ExitCode::internal;
}

}  // namespace qmax
