// Acceptance run: one line per criterion, exit status 1 when any fails.

#include "qmax/compat.hpp"
#include "qmax/linear.hpp"
#include "qmax/localization.hpp"
#include "qmax/operators.hpp"
#include "qmax/quasilinear.hpp"
#include "qmax/scenario.hpp"
#include "qmax/studies.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef QMAX_CLI_PATH
#error "QMAX_CLI_PATH must name the qmax executable"
#endif

using namespace qmax;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

Grid cube(int n) {
    Grid g;
    g.n1 = g.n2 = g.n3 = n;
    return g;
}

double max_norm(const Field& f) { return max_abs(f); }

Outcome energy_identity() {
    auto law = make_law("linear");
    auto pulse = make_data("pulse", {{"amplitude", 1.0}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.45},
                                     {"e", {1.0, 0.5, 0.0}}, {"h", {0.0, 1.0, 0.3}}},
                           law);
    std::vector<double> res;
    std::ostringstream os;
    for (int n : {24, 48}) {
        Grid g = cube(n);
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 1.0;
        auto a = run_energy_audit(*c, pulse->initial(g, 0.0), *pulse, o);
        res.push_back(a.residual);
        os << "n=" << n << " residual=" << fmt(a.residual) << " dt=" << fmt(a.dt) << "; ";
    }
    const double ratio = res[0] / res[1];
    os << "ratio=" << fmt(ratio) << " (need [3.2, 4.8])";
    return {ratio >= 3.2 && ratio <= 4.8, os.str()};
}

Outcome structural_identity() {
    VerifyOptions v;
    double worst = 0.0;
    int charts = 0, min_samples = 1 << 30;
    bool ok = true;
    for (const auto& name : chart_names()) {
        ChartVerification r = verify_chart(*build_chart(name, json::object()), v);
        worst = std::max(worst, r.identity_residual);
        min_samples = std::min(min_samples, r.boundary_samples);
        ok = ok && r.pass && r.identity_residual <= 1e-10;
        ++charts;
    }
    ok = ok && charts >= 3 && min_samples >= 100;
    return {ok, std::to_string(charts) + " charts, >= " + std::to_string(min_samples) +
                    " boundary samples each, max residual " + fmt(worst) + " (need <= 1e-10)"};
}

Outcome compat_oracle() {
    auto law = make_law("linear", {{"eps", 1.5}, {"mu", 1.0}, {"sigma", 0.3}, {"zeta", 1.2}});
    auto man = make_data("manufactured", json::object(), law);
    Grid g = cube(16);
    Field u0 = man->initial(g, 0.0);
    TimeJet s = s_lin(3, 0.0, frozen_jet(*law, LawComponent::chi, g), frozen_jet(*law, LawComponent::sigma, g), u0,
                      man->source_jets(g, 0.0, 2));
    auto c = law_coefficients(*law, g);
    const double dt0 = cfl_limit(*c, g, 0.0, 0.4);
    std::vector<double> e1, e2, dts;
    for (int r = 0; r < 4; ++r) {
        const double dt = dt0 / std::pow(2.0, r);
        SolverOptions o;
        o.dt = dt;
        o.t_final = 3 * dt;
        auto tr = solve_linear(*c, u0, *man, o);
        const auto& U = tr.states;
        // one-sided second-order differences at t0
        Field d1 = (1.0 / (2 * dt)) * (-3.0 * U[0] + 4.0 * U[1] - 1.0 * U[2]);
        Field d2 = (1.0 / (dt * dt)) * (2.0 * U[0] - 5.0 * U[1] + 4.0 * U[2] - 1.0 * U[3]);
        e1.push_back(max_norm(d1 - s.entries[1]));
        e2.push_back(max_norm(d2 - s.entries[2]));
        dts.push_back(dt);
    }
    const double p1 = fit_loglog_slope(dts, e1), p2 = fit_loglog_slope(dts, e2);
    const bool s0 = max_norm(s.entries[0] - u0) == 0.0;
    return {s0 && p1 >= 0.9 && p2 >= 0.9,
            "16^3, 4 step halvings: p=1 err " + fmt(e1.front()) + " -> " + fmt(e1.back()) + " order " + fmt(p1) +
                ", p=2 err " + fmt(e2.front()) + " -> " + fmt(e2.back()) + " order " + fmt(p2) + " (need >= 0.9)"};
}

Outcome jet_consistency() {
    Grid g = cube(5);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uni(0.5, 2.0), amp(-1.0, 1.0);
    auto random_field = [&] {
        Field f(g);
        for (auto& v : f.v)
            for (int c = 0; c < 6; ++c) v(c) = amp(rng);
        return f;
    };
    int equal_sets = 0;
    for (int rep = 0; rep < 10; ++rep) {
        auto law = make_law("linear", {{"eps", uni(rng)}, {"mu", uni(rng)}, {"sigma", uni(rng) - 0.5}});
        Field u0 = random_field();
        std::vector<Field> f = {random_field(), random_field(), random_field()};
        TimeJet a = s_nl(4, 0.0, *law, u0, f);
        TimeJet b = s_lin(4, 0.0, frozen_jet(*law, LawComponent::chi, g), frozen_jet(*law, LawComponent::sigma, g), u0, f);
        bool eq = true;
        for (int p = 0; p < 4; ++p)
            eq = eq && std::memcmp(a.entries[std::size_t(p)].v.data(), b.entries[std::size_t(p)].v.data(),
                                   g.size() * sizeof(Vec6)) == 0;
        equal_sets += eq;
    }
    return {equal_sets == 10, std::to_string(equal_sets) + "/10 random data sets bitwise equal (m = 4)"};
}

Outcome contraction() {
    auto law = make_law("kerr", {{"alpha", 1.0}, {"zeta1", 0.5}});
    auto data = make_data("pulse", {{"amplitude", 1e-2}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.25},
                                    {"e", {1.0, 0.5, 0.0}}, {"h", {0.0, 1.0, 0.3}}},
                          law);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.2;
    QuasilinearResult r = solve_quasilinear(law, *data, cube(10), p);
    const auto& h = r.history;
    const bool ok = r.smallness.pass && h.converged && h.iterations <= 12 && h.median_ratio < 1.0 && h.final_ratio <= 0.75;
    return {ok, "smallness " + std::string(r.smallness.pass ? "pass" : "fail") + ", iterations " +
                    std::to_string(h.iterations) + ", median ratio " + fmt(h.median_ratio) + ", final ratio " +
                    fmt(h.final_ratio)};
}

Outcome manufactured_convergence() {
    QuasilinearParams p;
    p.m = 2;
    auto lin = make_law("linear", {{"eps", 1.5}, {"mu", 1.0}, {"sigma", 0.3}, {"zeta", 1.2}});
    StudyResult a = convergence_study(lin, make_data("manufactured", json::object(), lin), cube(12), {12, 24, 48}, 0.4, p);
    auto kerr = make_law("kerr", {{"alpha", 1.0}, {"zeta1", 0.5}});
    p.tau = 0.2;
    StudyResult b = convergence_study(kerr, make_data("manufactured", {{"amplitude", 0.2}}, kerr), cube(8), {8, 16, 32},
                                      0.2, p);
    auto errs = [](const StudyResult& s) {
        std::string out;
        for (const auto& r : s.rows) out += (out.empty() ? "" : ",") + fmt(r.value);
        return out;
    };
    return {a.pass && b.pass, "linear 12/24/48 errors " + errs(a) + " order " + fmt(a.fitted_slope) +
                                  "; kerr 8/16/32 errors " + errs(b) + " order " + fmt(b.fitted_slope) +
                                  " (need >= 1.9)"};
}

Outcome continuous_dependence() {
    auto law = make_law("kerr", {{"alpha", 1.0}, {"zeta1", 0.5}});
    auto data = make_data("pulse", {{"amplitude", 0.05}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.25}}, law);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.2;
    StudyResult s = dependence_study(law, data, cube(10), {1e-2, 1e-3, 1e-4}, 0.2, p);
    std::string d;
    for (const auto& r : s.rows) d += (d.empty() ? "" : ",") + fmt(r.value);
    return {s.pass, "differences " + d + ", fitted slope " + fmt(s.fitted_slope) + " (need [0.9, 1.1])"};
}

Outcome traces_check() {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    auto law = make_law("kerr", {{"zeta1", 1.0}});
    double worst_tr = 0.0, worst_b = 0.0;
    for (int s = 0; s < 10000; ++s) {
        Vec3 v(nd(rng), nd(rng), nd(rng));
        Vec3 nu = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        worst_tr = std::max(worst_tr, std::abs(trace_t(v, nu).norm() - trace_tau(v, nu).norm()));
        Mat3 b;
        for (int i = 0; i < 9; ++i) b(i) = nd(rng);
        Vec6 u;
        for (int i = 0; i < 6; ++i) u(i) = nd(rng);
        worst_b = std::max(worst_b, std::abs(apply_B_linear(b, u, nu).dot(nu)));
        Vec6 w = law->domain().sample(rng);
        worst_b = std::max(worst_b, std::abs(apply_B(*law, Vec3::Zero(), w, Vec3(0, 0, -1)).dot(Vec3(0, 0, -1))));
    }
    return {worst_tr <= 1e-13 && worst_b <= 1e-13,
            "1e4 samples: max ||tr_t|-|tr_tau|| " + fmt(worst_tr) + ", max |B u . nu| " + fmt(worst_b)};
}

Outcome jet_extension() {
    Grid g = cube(16);
    auto smooth = [&](double amp, double phase) {
        return sample_field(g, [&](const Vec3& x) {
            Vec6 u;
            for (int c = 0; c < 6; ++c)
                u(c) = amp * 0.05 * (1 + c) * std::sin(2 * M_PI * x(0) + phase + c) * std::cos(2 * M_PI * x(1) - c) *
                       (1 + 0.5 * x(2));
            return u;
        });
    };
    auto mode = [&](int a, int b, double amp) {
        return sample_field(g, [&](const Vec3& x) {
            return Vec6::Constant(amp * std::cos(2 * M_PI * (a * x(0) + b * x(1))));
        });
    };
    std::vector<std::vector<Field>> sets = {
        {smooth(1, 0), smooth(2, 1), smooth(3, 2), smooth(4, 0.5), smooth(2, 1.5)},
        {mode(1, 0, 1.0), mode(2, 1, 0.5), mode(0, 3, 0.25), mode(1, 1, 0.5), mode(3, 2, 0.1)}};
    double worst_rate = 1e9, worst_support = 0.0;
    std::ostringstream os;
    for (const auto& h : sets) {
        JetExtension ext(h);
        double e[2][2];
        for (int r = 0; r < 2; ++r) {
            const double dt = r == 0 ? 2e-3 : 1e-3;
            Field up = ext.evaluate(dt), um = ext.evaluate(-dt), u0 = ext.evaluate(0.0);
            e[0][r] = max_norm((1.0 / (2 * dt)) * (up - um) - h[1]);
            e[1][r] = max_norm((1.0 / (dt * dt)) * (up - 2.0 * u0 + um) - h[2]);
        }
        for (int k = 0; k < 2; ++k) {
            const double rate = std::log2(e[k][0] / e[k][1]);
            worst_rate = std::min(worst_rate, rate);
            os << "k=" << k + 1 << " err " << fmt(e[k][0]) << "->" << fmt(e[k][1]) << " rate " << fmt(rate) << "; ";
        }
        worst_support = std::max(worst_support, max_norm(Field(ext.evaluate(0.0)) - h[0]));
        for (double t : {2.0, -2.0, 3.0, -5.0}) worst_support = std::max(worst_support, max_norm(ext.evaluate(t)));
    }
    os << "max |u(0)-h0|, |u(|t|>=2)| " << fmt(worst_support);
    return {worst_rate >= 1.8 && worst_support <= 1e-12, os.str()};
}

Outcome smallness_check() {
    Grid g = cube(6);
    bool zero = true;
    for (const auto& name : law_names()) {
        auto law = make_law(name, json::object());
        if (law->zeta_depends_on_state()) continue;
        zero = zero && smallness(*law, g, 0.3).z == 0.0;
    }
    auto kz = make_law("kerr", {{"zeta1", 0.0}});
    zero = zero && smallness(*kz, g, 0.3).z == 0.0;
    auto law = make_law("kerr", {{"zeta0", 1.0}, {"zeta1", 1.0}});
    std::ostringstream os;
    double worst = 0.0;
    for (double kb : {0.05, 0.1}) {
        // d_xi zeta[eta] = eta xi^T + xi eta^T, norm 2|xi| at eta parallel to xi
        const double analytic = 2.0 * kb * kb;
        const double z = smallness(*law, g, kb).z;
        worst = std::max(worst, std::abs(z - analytic) / analytic);
        os << "kappa " << kb << ": z " << fmt(z) << " vs " << fmt(analytic) << "; ";
    }
    os << "state-independent zeta gives 0: " << (zero ? "yes" : "no");
    return {zero && worst <= 0.01, os.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("qmax_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const json cfg = {{"grid", {{"n", 10}}},
                      {"time", {{"T", 0.3}}},
                      {"law", {{"name", "kerr"}, {"params", {{"alpha", 1.0}, {"zeta1", 0.5}}}}},
                      {"data", {{"name", "pulse"}, {"params", {{"amplitude", 0.05}, {"width", 0.25}}}}},
                      {"solver", {{"m", 2}, {"tau", 0.15}}},
                      {"output", {{"report", (dir / "report.json").string()}, {"csv", (dir / "series.csv").string()}}},
                      {"seed", 7}};
    const std::string cfg_path = (dir / "scenario.json").string();
    std::ofstream(cfg_path) << cfg.dump(2);

    auto t0 = std::chrono::steady_clock::now();
    simulate(parse_config(cfg));
    const double solver_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string cmd = std::string("\"") + QMAX_CLI_PATH + "\" simulate \"" + cfg_path + "\"";
    std::string reports[2];
    int rc[2];
    t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 2; ++i) {
        rc[i] = std::system(cmd.c_str());
        reports[i] = slurp((dir / "report.json").string());
        fs::remove(dir / "report.json");
    }
    const double cli_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fs::remove_all(dir);
    // process start-up is not solver time
    const double budget = 2.0 * (2.0 * solver_s) + 1.0;
    const bool ok = rc[0] == 0 && rc[1] == 0 && !reports[0].empty() && reports[0] == reports[1] && cli_s < budget;
    return {ok, "exit codes " + std::to_string(rc[0]) + "," + std::to_string(rc[1]) + ", report " +
                    std::to_string(reports[0].size()) + " bytes, identical " +
                    (reports[0] == reports[1] ? "yes" : "no") + ", two runs " + fmt(cli_s) + " s, in-process " +
                    fmt(solver_s) + " s"};
}

Outcome blowup_monitor() {
    auto law = make_law("kerr", {{"alpha", 0.1}, {"zeta1", 0.5}});
    Grid g;
    g.n1 = 24;
    g.n2 = 4;
    g.n3 = 25;
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.1;
    auto pulses = [&](double amp) {
        return make_data("colliding-pulses", {{"amplitude", amp}, {"width", 0.3}, {"x3_width", 0.45}}, law);
    };
    const double r_star = law->domain().trace_radius();
    auto big = pulses(0.9 * r_star);
    const double e0 = max_abs(big->initial(g, 0.0));
    ContinuationResult r = continue_maximal(law, *big, g, 1.0, p);
    ContinuationResult s = continue_maximal(law, *pulses(1e-2), g, 1.0, p);
    const bool ok = r.report.status == "monitor" && (r.report.criterion == "a" || r.report.criterion == "b") &&
                    r.report.t_reached < 1.0 && s.report.status == "reached" && s.report.criterion == "none";
    return {ok, "|E0|_inf " + fmt(e0) + " (r* " + fmt(r_star) + "): status " + r.report.status + ", criterion " +
                    r.report.criterion + " at t " + fmt(r.report.t_reached) + "; amplitude 1e-2: status " +
                    s.report.status + ", criterion " + s.report.criterion + " at t " + fmt(s.report.t_reached)};
}

}  // namespace

int main() {
    const std::vector<Criterion> all = {
        {1, "energy identity", 120.0, energy_identity},
        {2, "structural boundary identity", 5.0, structural_identity},
        {3, "compatibility jets vs time differences", 120.0, compat_oracle},
        {4, "nonlinear/linear jet consistency", 10.0, jet_consistency},
        {5, "Picard contraction", 180.0, contraction},
        {6, "manufactured convergence", 600.0, manufactured_convergence},
        {7, "continuous dependence", 300.0, continuous_dependence},
        {8, "traces", 1.0, traces_check},
        {9, "jet extension", 10.0, jet_extension},
        {10, "smallness", 5.0, smallness_check},
        {11, "determinism", 600.0, determinism},
        {12, "blow-up monitor", 180.0, blowup_monitor},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = s < c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("[%s] %2d %s: %s; %.2f s (limit %g s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), s, c.limit_s, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
