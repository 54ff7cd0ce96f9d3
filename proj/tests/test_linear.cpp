#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmax/linear.hpp"
#include "qmax/operators.hpp"

#include <cmath>
#include <cstring>

using namespace qmax;
using nlohmann::json;

namespace {

Grid make_grid(int n, bool periodic3 = false) {
    Grid g;
    g.n1 = g.n2 = g.n3 = n;
    g.L1 = g.L2 = 1.0;
    g.H = 1.0;
    g.periodic3 = periodic3;
    if (periodic3) g.H = 1.0 - 1.0 / n;  // n3 nodes spaced like the tangential axes
    return g;
}

bool bitwise_equal(const Field& a, const Field& b) {
    return a.v.size() == b.v.size() && std::memcmp(a.v.data(), b.v.data(), a.v.size() * sizeof(Vec6)) == 0;
}

double order(double e1, double e2) { return std::log2(e1 / e2); }

// Compactly supported pulse away from both faces at t0; by T = 1 most of it
// has left through the faces.
DataPtr boundary_pulse(const LawPtr& law) {
    return make_data("pulse", {{"amplitude", 1.0}, {"center", {0.5, 0.5, 0.5}}, {"width", 0.45},
                               {"e", {1.0, 0.5, 0.0}}, {"h", {0.0, 1.0, 0.3}}},
                     law);
}

}  // namespace

TEST_CASE("zero data gives the zero trajectory") {
    Grid g = make_grid(8);
    auto law = make_law("linear");
    auto zero = make_data("zero", json::object(), law);
    auto c = law_coefficients(*law, g);
    SolverOptions o;
    o.t_final = 0.5;
    auto tr = solve_linear(*c, Field(g), *zero, o);
    for (const auto& s : tr.states) CHECK(max_abs(s) <= 1e-13);
    CHECK(tr.n_steps > 0);
    CHECK(tr.t_final() == doctest::Approx(0.5));
}

TEST_CASE("plane wave in a periodic box converges at second order") {
    auto law = make_law("linear", {{"eps", 2.0}, {"mu", 0.5}});
    auto pw = make_data("plane-wave", {{"amplitude", 1.0}}, law);
    double err[2];
    for (int r = 0; r < 2; ++r) {
        Grid g = make_grid(r == 0 ? 16 : 32, true);
        g.H = g.L1 * (g.n3 - 1.0) / g.n3;
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 0.3;
        o.store_stride = 0;
        auto tr = solve_linear(*c, pw->initial(g, 0.0), *pw, o);
        err[r] = l2_norm(tr.final_state() - *pw->exact(g, 0.3));
    }
    MESSAGE("plane wave errors " << err[0] << " " << err[1]);
    CHECK(order(err[0], err[1]) >= 1.9);
}

TEST_CASE("linear manufactured solution converges at second order") {
    auto law = make_law("linear", {{"eps", 1.5}, {"mu", 1.0}, {"sigma", 0.3}, {"zeta", 1.2}});
    auto man = make_data("manufactured", json::object(), law);
    std::vector<double> err;
    for (int n : {12, 24, 48}) {
        Grid g = make_grid(n);
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 0.4;
        o.store_stride = 0;
        auto tr = solve_linear(*c, man->initial(g, 0.0), *man, o);
        err.push_back(l2_norm(tr.final_state() - *man->exact(g, 0.4)));
    }
    MESSAGE("manufactured errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(order(err[0], err[1]) >= 1.9);
    CHECK(order(err[1], err[2]) >= 1.9);
}

TEST_CASE("affine-in-space data with a linear time profile is reproduced to roundoff") {
    auto law = make_law("linear", {{"eps", 1.5}, {"sigma", 0.2}});
    auto ae = make_data("affine-exact", {{"degree", 1}}, law);
    for (int n : {6, 10}) {
        Grid g = make_grid(n);
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 0.3;
        auto tr = solve_linear(*c, ae->initial(g, 0.0), *ae, o);
        CHECK(max_abs(tr.final_state() - *ae->exact(g, 0.3)) <= 1e-10);
    }
}

TEST_CASE("energy identity residual is second order") {
    auto law = make_law("linear");
    auto pulse = boundary_pulse(law);
    std::vector<double> res;
    for (int n : {24, 48}) {
        Grid g = make_grid(n);
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 1.0;
        auto a = run_energy_audit(*c, pulse->initial(g, 0.0), *pulse, o);
        res.push_back(a.residual);
        MESSAGE("n=" << n << " lhs=" << a.lhs << " rhs=" << a.rhs << " residual=" << a.residual
                     << " dissipation=" << a.dissipation);
        CHECK(a.dissipation > 0.0);
    }
    MESSAGE("ratio " << res[0] / res[1]);
    CHECK(res[0] / res[1] >= 3.2);
    CHECK(res[0] / res[1] <= 4.8);
}

TEST_CASE("energy identity with time-varying A0") {
    auto law = make_law("linear");
    auto pulse = boundary_pulse(law);
    std::vector<double> res;
    for (int n : {24, 48}) {
        Grid g = make_grid(n);
        auto c = std::make_shared<RampedCoefficients>(law_coefficients(*law, g), 0.25);
        SolverOptions o;
        o.t_final = 1.0;
        auto a = run_energy_audit(*c, pulse->initial(g, 0.0), *pulse, o);
        res.push_back(a.residual);
    }
    MESSAGE("ramped residuals " << res[0] << " " << res[1]);
    CHECK(res[0] / res[1] >= 3.2);
    CHECK(res[0] / res[1] <= 4.8);
}

TEST_CASE("energy audit from a stored trajectory matches the streaming audit") {
    auto law = make_law("linear");
    auto pulse = boundary_pulse(law);
    Grid g = make_grid(10);
    auto c = law_coefficients(*law, g);
    SolverOptions o;
    o.t_final = 0.2;
    auto tr = solve_linear(*c, pulse->initial(g, 0.0), *pulse, o);
    auto a = energy_audit(tr, *c, *pulse);
    auto b = run_energy_audit(*c, pulse->initial(g, 0.0), *pulse, o);
    CHECK(a.lhs == b.lhs);
    CHECK(a.rhs == b.rhs);
    o.store_stride = 3;
    auto sparse = solve_linear(*c, pulse->initial(g, 0.0), *pulse, o);
    CHECK_THROWS_AS(energy_audit(sparse, *c, *pulse), Error);
    // Zero run: both sides vanish.
    auto zero = make_data("zero", json::object(), law);
    auto z = run_energy_audit(*c, Field(g), *zero, o);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
}

TEST_CASE("absorbing boundary: energy does not grow") {
    auto law = make_law("linear", {{"zeta", 2.0}});
    auto pulse = boundary_pulse(law);
    Grid g = make_grid(16);
    auto c = law_coefficients(*law, g);
    SolverOptions o;
    o.t_final = 0.5;
    double prev = 1e300, defect = 0.0;
    solve_linear(*c, pulse->initial(g, 0.0), *pulse, o, [&](int, double, const Field& u) {
        double e = 0.5 * inner(u, u);
        defect = std::max(defect, e - prev);
        prev = e;
    });
    CHECK(defect <= 1e-6);
}

TEST_CASE("superposition and determinism") {
    auto law = make_law("linear", {{"sigma", 0.1}});
    Grid g = make_grid(8);
    auto c = law_coefficients(*law, g);
    auto a = make_data("manufactured", json::object(), law);
    auto b = boundary_pulse(law);
    SolverOptions o;
    o.t_final = 0.2;
    o.store_stride = 0;
    const double al = 0.7, be = -1.3;
    auto ua = solve_linear(*c, a->initial(g, 0.0), *a, o).final_state();
    auto ub = solve_linear(*c, b->initial(g, 0.0), *b, o).final_state();
    // Combined data: scaled manufactured forcing plus a scaled pulse initial state.
    auto sa = scale_data(a, al);
    auto u0 = al * a->initial(g, 0.0) + be * b->initial(g, 0.0);
    auto uc = solve_linear(*c, u0, *sa, o).final_state();
    CHECK(max_abs(uc - (al * ua + be * ub)) <= 1e-12);
    auto again = solve_linear(*c, u0, *sa, o).final_state();
    CHECK(bitwise_equal(uc, again));
}

TEST_CASE("implicit midpoint") {
    auto law = make_law("linear");
    auto man = make_data("manufactured", json::object(), law);
    std::vector<double> err;
    for (int n : {8, 16}) {
        Grid g = make_grid(n);
        auto c = law_coefficients(*law, g);
        SolverOptions o;
        o.t_final = 0.3;
        o.integrator = Integrator::implicit_midpoint;
        o.store_stride = 0;
        auto tr = solve_linear(*c, man->initial(g, 0.0), *man, o);
        err.push_back(l2_norm(tr.final_state() - *man->exact(g, 0.3)));
    }
    CHECK(order(err[0], err[1]) >= 1.8);
    CHECK(parse_integrator("implicit-midpoint") == Integrator::implicit_midpoint);
    CHECK_THROWS_AS(parse_integrator("euler"), Error);
}

TEST_CASE("solver errors") {
    auto law = make_law("linear");
    Grid g = make_grid(8);
    auto c = law_coefficients(*law, g);
    auto zero = make_data("zero", json::object(), law);
    SolverOptions o;
    o.t_final = 0.5;
    o.dt = 0.5;
    try {
        solve_linear(*c, Field(g), *zero, o);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::cfl_violation);
    }
    ConstantCoefficients bad(-Mat6::Identity(), Mat6::Zero(), Mat3::Identity(), 1.0);
    o.dt = 0.0;
    try {
        solve_linear(bad, Field(g), *zero, o);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::coefficient_invariant_failure);
    }
    Field nan(g);
    nan.v[3](2) = std::nan("");
    CHECK_THROWS_AS(solve_linear(*c, nan, *zero, o), Error);
    // Unstable growth from an anti-damping D is detected as non-finite state.
    ConstantCoefficients grow(Mat6::Identity(), -1.0e5 * Mat6::Identity(), Mat3::Identity(), 1.0);
    o.t_final = 2.0;
    Field one = sample_field(g, [](const Vec3&) { return Vec6::Constant(1.0); });
    try {
        solve_linear(grow, one, *zero, o);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::nan_detected);
    }
}

TEST_CASE("gamma-weighted estimate") {
    auto law = make_law("linear", {{"sigma", 0.2}});
    Grid g = make_grid(10);
    auto c = law_coefficients(*law, g);
    auto zero = make_data("zero", json::object(), law);
    SolverOptions o;
    o.t_final = 0.3;
    auto tz = solve_linear(*c, Field(g), *zero, o);
    auto rz = apriori_monitor(tz, *c, *zero);
    for (const auto& r : rz.rows) {
        CHECK(r.lhs == 0.0);
        CHECK(r.c_fit == 0.0);
    }
    auto bf = make_data("boundary-forcing", json::object(), law);
    auto tb = solve_linear(*c, Field(g), *bf, o);
    auto rb = apriori_monitor(tb, *c, *bf);
    CHECK(rb.gamma0 >= 1.0);
    REQUIRE(rb.rows.size() == 3);
    CHECK(rb.monotone);
    for (const auto& r : rb.rows) {
        CHECK(r.lhs > 0.0);
        CHECK(std::isfinite(r.c_fit));
    }
    // Fitted constant stable under refinement.
    Grid g2 = make_grid(20);
    auto c2 = law_coefficients(*law, g2);
    auto tb2 = solve_linear(*c2, Field(g2), *bf, o);
    auto rb2 = apriori_monitor(tb2, *c2, *bf, {rb.gamma0});
    auto rb1 = apriori_monitor(tb, *c, *bf, {rb.gamma0});
    MESSAGE("c_fit " << rb1.rows[0].c_fit << " " << rb2.rows[0].c_fit);
    CHECK(std::abs(rb2.rows[0].c_fit / rb1.rows[0].c_fit - 1.0) < 0.25);
}
