#include "qmax/studies.hpp"

#include "qmax/norms.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>

namespace qmax {

using nlohmann::json;

namespace {

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

// Runs the jobs concurrently and returns the results in input order.
template <class R>
std::vector<R> fan_out(std::vector<std::function<R()>> jobs) {
    std::vector<std::future<R>> fut;
    fut.reserve(jobs.size());
    for (auto& j : jobs) fut.push_back(std::async(std::launch::async, std::move(j)));
    std::vector<R> out;
    out.reserve(fut.size());
    for (auto& f : fut) out.push_back(f.get());
    return out;
}

std::vector<double> json_list(const json& study, const char* key, std::vector<double> def) {
    if (!study.contains(key)) return def;
    const json& v = study.at(key);
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::config_invalid, std::string("'study.") + key + "' must be a nonempty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw Error(ErrorCode::config_invalid, std::string("'study.") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

double json_num(const json& study, const char* key, double def) {
    if (!study.contains(key)) return def;
    if (!study.at(key).is_number()) throw Error(ErrorCode::config_invalid, std::string("'study.") + key + "' must be a number");
    return study.at(key).get<double>();
}

}  // namespace

json StudyResult::to_json() const {
    json rows_j = json::array();
    for (const auto& r : rows) {
        json x = {{"parameter", r.parameter}, {"value", num_or_null(r.value)}, {"order", num_or_null(r.order)},
                  {"ok", r.ok}};
        if (!r.error.empty()) x["error"] = r.error;
        if (!r.extra.empty()) x["extra"] = r.extra;
        rows_j.push_back(x);
    }
    return {{"kind", kind},
            {"parameter", parameter},
            {"quantity", quantity},
            {"rows", rows_j},
            {"fitted_slope", num_or_null(fitted_slope)},
            {"monotone", monotone},
            {"pass", pass},
            {"expectation", expectation}};
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

StudyResult convergence_study(const LawPtr& law, const DataPtr& data, const Grid& base, const std::vector<int>& resolutions,
                              double T, const QuasilinearParams& p, double expected_order) {
    if (resolutions.size() < 3) throw Error(ErrorCode::config_invalid, "convergence study needs at least three resolutions");
    for (std::size_t i = 1; i < resolutions.size(); ++i)
        if (resolutions[i] <= resolutions[i - 1])
            throw Error(ErrorCode::config_invalid, "'study.resolutions' must increase");
    {
        Grid g = base;
        g.n1 = g.n2 = g.n3 = resolutions[0];
        if (!data->exact(g, p.t0)) throw Error(ErrorCode::config_invalid, "convergence study needs data with an exact solution");
    }
    const bool linear = law->is_linear();
    StudyResult res;
    res.kind = "convergence";
    res.parameter = "n";
    res.quantity = "l2_error_at_T";
    res.expectation = "fitted order >= " + std::to_string(expected_order) + ", errors decreasing";

    std::vector<std::function<StudyRow()>> jobs;
    for (int n : resolutions) {
        jobs.push_back([=, &law, &data, &base, &p]() {
            StudyRow row;
            row.parameter = n;
            Grid g = base;
            // h3 = H / n, so the spacing halves exactly when n doubles
            g.n1 = g.n2 = n;
            g.n3 = g.periodic3 ? n : n + 1;
            if (g.periodic3) g.H = g.L1 * (n - 1.0) / n;
            try {
                Field final_state;
                double t1 = T;
                if (linear) {
                    auto coeffs = law_coefficients(*law, g);
                    SolverOptions o;
                    o.t0 = p.t0;
                    o.t_final = T;
                    o.dt = p.dt;
                    o.cfl = p.cfl;
                    o.integrator = p.integrator;
                    o.store_stride = 0;
                    Trajectory tr = solve_linear(*coeffs, data->initial(g, p.t0), *data, o);
                    final_state = tr.final_state();
                    row.extra["dt"] = tr.dt;
                } else {
                    QuasilinearParams q = p;
                    q.tau = T - p.t0;
                    QuasilinearResult r = solve_quasilinear(law, *data, g, q);
                    final_state = r.trajectory.final_state();
                    t1 = r.trajectory.t_final();
                    row.extra["dt"] = r.trajectory.dt;
                    row.extra["iterations"] = r.history.iterations;
                    row.extra["bc_residual"] = r.bc_residual;
                    row.extra["pde_residual"] = r.pde_residual;
                }
                row.value = l2_norm(final_state - *data->exact(g, t1));
                row.extra["h"] = g.h_max();
            } catch (const Error& e) {
                row.ok = false;
                row.error = std::string(error_code_name(e.code())) + ": " + e.what();
            }
            return row;
        });
    }
    res.rows = fan_out(std::move(jobs));

    std::vector<double> hs, es;
    bool all_ok = true;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        StudyRow& r = res.rows[i];
        all_ok = all_ok && r.ok;
        if (!r.ok) continue;
        hs.push_back(r.extra["h"].get<double>());
        es.push_back(r.value);
        if (i > 0 && res.rows[i - 1].ok) {
            const StudyRow& prev = res.rows[i - 1];
            r.order = std::log(prev.value / r.value) / std::log(prev.extra["h"].get<double>() / r.extra["h"].get<double>());
            if (!(r.value < prev.value)) res.monotone = false;
        }
    }
    res.fitted_slope = fit_loglog_slope(hs, es);
    res.pass = all_ok && res.monotone && res.fitted_slope >= expected_order;
    return res;
}

StudyResult dependence_study(const LawPtr& law, const DataPtr& data, const Grid& g, const std::vector<double>& deltas,
                             double T, const QuasilinearParams& p, double slope_lo, double slope_hi) {
    if (deltas.empty()) throw Error(ErrorCode::config_invalid, "'study.deltas' is empty");
    QuasilinearParams q = p;
    q.tau = T - p.t0;
    const int k = std::max(0, std::min(p.m, max_norm_order(g)) - 1);

    StudyResult res;
    res.kind = "dependence";
    res.parameter = "delta";
    res.quantity = "g_surrogate_difference";
    res.expectation = "fitted slope in [" + std::to_string(slope_lo) + ", " + std::to_string(slope_hi) + "]";

    using Run = std::pair<std::optional<Trajectory>, std::string>;
    std::vector<std::function<Run()>> jobs;
    std::vector<double> scales = {1.0};
    for (double d : deltas) scales.push_back(1.0 + d);
    for (double s : scales) {
        jobs.push_back([=, &law, &data, &g]() -> Run {
            try {
                DataPtr ds = s == 1.0 ? data : scale_data(data, s);
                QuasilinearResult r = solve_quasilinear(law, *ds, g, q);
                if (!r.history.converged) return {std::nullopt, "Picard iteration did not converge"};
                return {std::move(r.trajectory), ""};
            } catch (const Error& e) {
                return {std::nullopt, std::string(error_code_name(e.code())) + ": " + e.what()};
            }
        });
    }
    std::vector<Run> runs = fan_out(std::move(jobs));
    if (!runs[0].first) throw Error(ErrorCode::perturbed_run_failure, "base run failed: " + runs[0].second);
    const Trajectory& base = *runs[0].first;

    std::vector<double> ds, vs;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        StudyRow row;
        row.parameter = deltas[i];
        const Run& r = runs[i + 1];
        if (!r.first) {
            row.ok = false;
            row.error = "perturbed_run_failure: " + r.second;
        } else {
            row.value = g_distance(*r.first, base, k, true);
            if (deltas[i] != 0.0 && row.value > 0.0) {
                ds.push_back(std::abs(deltas[i]));
                vs.push_back(row.value);
            }
        }
        res.rows.push_back(row);
    }
    res.fitted_slope = fit_loglog_slope(ds, vs);
    res.pass = ds.size() >= 2 && res.fitted_slope >= slope_lo && res.fitted_slope <= slope_hi;
    for (const auto& r : res.rows) res.pass = res.pass && r.ok;
    return res;
}

StudyResult contraction_study(const LawPtr& law, const DataPtr& data, const Grid& g, const std::vector<double>& amplitudes,
                              const QuasilinearParams& p, int max_iterations, double final_ratio_max) {
    if (amplitudes.empty()) throw Error(ErrorCode::config_invalid, "'study.amplitudes' is empty");
    StudyResult res;
    res.kind = "contraction";
    res.parameter = "amplitude";
    res.quantity = "median_picard_ratio";
    res.expectation = "converged, median ratio < 1, final ratio <= " + std::to_string(final_ratio_max) +
                      ", iterations <= " + std::to_string(max_iterations) +
                      ", median ratio nonincreasing as the amplitude decreases";

    std::vector<std::function<StudyRow()>> jobs;
    for (double a : amplitudes) {
        jobs.push_back([=, &law, &data, &g, &p]() {
            StudyRow row;
            row.parameter = a;
            try {
                QuasilinearResult r = solve_quasilinear(law, *scale_data(data, a), g, p);
                const IterationHistory& h = r.history;
                row.value = h.median_ratio;
                row.extra = {{"final_ratio", num_or_null(h.final_ratio)},
                             {"iterations", h.iterations},
                             {"converged", h.converged},
                             {"smallness_pass", r.smallness.pass},
                             {"z", r.smallness.z},
                             {"history", h.to_json()}};
                row.ok = h.converged && h.iterations <= max_iterations &&
                         (h.iterations <= 1 || (h.median_ratio < 1.0 && h.final_ratio <= final_ratio_max));
            } catch (const Error& e) {
                row.ok = false;
                row.error = std::string(error_code_name(e.code())) + ": " + e.what();
            }
            return row;
        });
    }
    res.rows = fan_out(std::move(jobs));

    std::vector<std::size_t> order(res.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(res.rows[a].parameter) > std::abs(res.rows[b].parameter); });
    double prev = std::numeric_limits<double>::infinity();
    bool all_ok = true;
    for (std::size_t i : order) {
        const StudyRow& r = res.rows[i];
        all_ok = all_ok && r.ok;
        if (!r.ok || !std::isfinite(r.value)) continue;
        if (r.value > prev) res.monotone = false;
        prev = r.value;
    }
    std::vector<double> as, qs;
    for (const auto& r : res.rows)
        if (r.ok && r.value > 0.0 && std::isfinite(r.value)) {
            as.push_back(std::abs(r.parameter));
            qs.push_back(r.value);
        }
    res.fitted_slope = fit_loglog_slope(as, qs);
    res.pass = all_ok && res.monotone;
    return res;
}

StudyResult run_study(const std::string& kind, const ScenarioConfig& c) {
    LawPtr law = build_law(c);
    DataPtr data = build_data(c, law);
    const json& s = c.study;
    auto known = [&](std::initializer_list<const char*> keys) {
        for (auto it = s.begin(); it != s.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw Error(ErrorCode::config_invalid, "unknown key 'study." + it.key() + "' for " + kind);
        }
    };
    if (kind == "convergence-study") {
        known({"resolutions", "expected_order"});
        std::vector<int> ns;
        for (double x : json_list(s, "resolutions", {8, 16, 32})) {
            if (x != std::floor(x) || x < 4) throw Error(ErrorCode::config_invalid, "'study.resolutions' must hold integers >= 4");
            ns.push_back(int(x));
        }
        return convergence_study(law, data, c.grid, ns, c.T, c.solver, json_num(s, "expected_order", 1.9));
    }
    if (kind == "dependence-study") {
        known({"deltas", "slope_range"});
        std::vector<double> range = json_list(s, "slope_range", {0.9, 1.1});
        if (range.size() != 2) throw Error(ErrorCode::config_invalid, "'study.slope_range' must hold two numbers");
        return dependence_study(law, data, c.grid, json_list(s, "deltas", {1e-2, 1e-3, 1e-4}), c.T, c.solver, range[0],
                                range[1]);
    }
    if (kind == "contraction-study") {
        known({"amplitudes", "max_iterations", "final_ratio_max"});
        return contraction_study(law, data, c.grid, json_list(s, "amplitudes", {1.0, 0.5, 0.25, 0.125, 0.0625}),
                                 c.solver, int(json_num(s, "max_iterations", 12)), json_num(s, "final_ratio_max", 0.75));
    }
    throw Error(ErrorCode::config_invalid, "unknown study '" + kind + "'");
}

}  // namespace qmax
