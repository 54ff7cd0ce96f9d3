#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmax/norms.hpp"
#include "qmax/quasilinear.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace qmax;
using nlohmann::json;

namespace {

Grid make_grid(int n) {
    Grid g;
    g.n1 = g.n2 = g.n3 = n;
    return g;
}

bool bitwise_equal(const Field& a, const Field& b) {
    return a.v.size() == b.v.size() && std::memcmp(a.v.data(), b.v.data(), a.v.size() * sizeof(Vec6)) == 0;
}

DataPtr centered_pulse(const LawPtr& law, double amp, double width = 0.25) {
    return make_data("pulse", {{"amplitude", amp}, {"center", {0.5, 0.5, 0.5}}, {"width", width},
                               {"e", {1.0, 0.5, 0.0}}, {"h", {0.0, 1.0, 0.3}}},
                     law);
}

LawPtr kerr() { return make_law("kerr", {{"alpha", 1.0}, {"zeta1", 0.5}}); }

Trajectory sampled(const Grid& g, double t0, double dt, int n, const std::function<Field(double)>& fn) {
    Trajectory tr;
    tr.grid = g;
    tr.t0 = t0;
    tr.dt = dt;
    tr.n_steps = n;
    for (int s = 0; s <= n; ++s) {
        tr.steps.push_back(s);
        tr.times.push_back(t0 + s * dt);
        tr.states.push_back(fn(t0 + s * dt));
    }
    return tr;
}

// A0 = I, b = I and sigma = -K |E|^2 on the E block: the frozen problem
// amplifies differences in the iterate.
class AntiDamped final : public MaterialLaw {
public:
    explicit AntiDamped(double k) : k_(k) {}
    std::string name() const override { return "anti-damped"; }
    double eta() const override { return 1.0; }
    const StateDomain& domain() const override { return dom_; }
    Vec6 theta(const Vec3&, const Vec6& u) const override { return u; }
    Mat6 chi(const Vec3&, const Vec6&) const override { return Mat6::Identity(); }
    Mat6 sigma(const Vec3&, const Vec6& u) const override {
        Mat6 m = Mat6::Zero();
        m.topLeftCorner<3, 3>() = -k_ * u.head<3>().squaredNorm() * Mat3::Identity();
        return m;
    }
    Mat3 zeta(const Vec3&, const Vec3&) const override { return Mat3::Identity(); }
    Mat6T chi(const Vec3&, const Vec6T&) const override {
        Mat6T m;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) m(i, j) = Taylor(i == j ? 1.0 : 0.0);
        return m;
    }
    Mat6T sigma(const Vec3&, const Vec6T& u) const override {
        Taylor s = u(0) * u(0) + u(1) * u(1) + u(2) * u(2);
        Mat6T m;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) m(i, j) = Taylor(0.0);
        for (int i = 0; i < 3; ++i) m(i, i) = -k_ * s;
        return m;
    }
    Mat3T zeta(const Vec3&, const Vec3T&) const override {
        Mat3T m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = Taylor(i == j ? 1.0 : 0.0);
        return m;
    }
    bool chi_depends_on_state() const override { return false; }
    bool sigma_depends_on_state() const override { return true; }
    bool zeta_depends_on_state() const override { return false; }
    json params() const override { return {{"k", k_}}; }

private:
    double k_;
    StateDomain dom_;
};

}  // namespace

TEST_CASE("smallness: state-independent zeta gives zero") {
    Grid g = make_grid(8);
    for (const auto& law : {make_law("linear"), make_law("kerr", {{"zeta1", 0.0}}), make_law("aniso-demo")}) {
        CHECK_FALSE(law->zeta_depends_on_state());
        SmallnessReport r = smallness(*law, g, 0.3);
        CHECK(r.z0 == 0.0);
        CHECK(r.z == 0.0);
        CHECK(r.pass);
        CHECK(r.advisory);
    }
    SmallnessReport r = smallness(*kerr(), g, 0.0);
    CHECK(r.z == 0.0);
    CHECK_THROWS_AS(smallness(*kerr(), g, -1.0), Error);
}

TEST_CASE("smallness: zeta = I + xi xi^T matches the analytic maximum") {
    // d_xi zeta [eta] = eta xi^T + xi eta^T has eigenvalues xi.eta +- |xi|, so the
    // maximum over |eta| = 1, |xi| <= kappa is 2 kappa (eta parallel to xi).
    auto law = make_law("kerr", {{"zeta0", 1.0}, {"zeta1", 1.0}});
    Grid g = make_grid(6);
    for (double kb : {0.05, 0.1}) {
        SmallnessReport r = smallness(*law, g, kb);
        CHECK(std::abs(r.z0 - 2.0 * kb) <= 0.01 * 2.0 * kb);
        CHECK(r.z == doctest::Approx(r.z0 * kb));
        CHECK(r.argmax_xi.norm() == doctest::Approx(kb).epsilon(1e-6));
        CHECK(r.threshold_regularity == doctest::Approx(0.125));
        CHECK(r.threshold_uniqueness == doctest::Approx(1.0 / std::sqrt(2.0)));
    }
    RunConstants c;
    c.c_m0 = 100.0;
    SmallnessReport strict = smallness(*law, g, 0.2, c);
    CHECK(strict.z == doctest::Approx(0.08).epsilon(0.01));
    CHECK_FALSE(strict.pass_regularity);
    CHECK(strict.pass_uniqueness);
    CHECK_FALSE(strict.pass);
}

TEST_CASE("frozen coefficients") {
    Grid g = make_grid(6);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    Field a(g), b(g), c(g), d(g);
    for (Field* f : {&a, &b, &c, &d})
        for (auto& v : f->v)
            for (int k = 0; k < 6; ++k) v(k) = u(rng);
    auto cubic = [&](double t) { return a + t * b + (t * t) * c + (t * t * t) * d; };
    auto tr = std::make_shared<const Trajectory>(sampled(g, 0.2, 0.1, 6, cubic));
    FrozenCoefficients fc(kerr(), tr);
    CHECK(fc.time_dependent());
    for (int s = 0; s <= 6; ++s) CHECK(bitwise_equal(fc.state(tr->times[std::size_t(s)]), tr->states[std::size_t(s)]));
    for (double t : {0.21, 0.37, 0.55, 0.79}) CHECK(max_abs(fc.state(t) - cubic(t)) <= 1e-13);

    CoefficientSample cs;
    fc.sample(g, 0.37, cs);
    const Field mid = fc.state(0.37);
    auto law = kerr();
    CHECK((cs.A0[17] - law->chi(g.point(5, 2, 0), mid.v[17])).norm() == 0.0);
    CHECK(cs.b.size() == g.face_size());

    Field big = a;
    big(2, 3, 4) << 0.6, 0.0, 0.0, 0.0, 0.0, 0.0;
    auto bad = std::make_shared<const Trajectory>(sampled(g, 0.0, 0.1, 2, [&](double) { return big; }));
    FrozenCoefficients fb(kerr(), bad);
    try {
        fb.sample(g, 0.1, cs);
        FAIL("expected domain_exit");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::domain_exit);
        CHECK(std::string(e.what()).find("t=0.1") != std::string::npos);
    }
}

TEST_CASE("picard_step: linear law and zero data") {
    Grid g = make_grid(8);
    auto law = make_law("linear", {{"eps", 1.5}, {"sigma", 0.2}});
    auto data = centered_pulse(law, 0.1);
    QuasilinearParams p;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_traj = [&] {
        return sampled(g, 0.0, 0.02, 5, [&](double) {
            Field f(g);
            for (auto& v : f.v)
                for (int k = 0; k < 6; ++k) v(k) = u(rng);
            return f;
        });
    };
    Trajectory o1 = picard_step(random_traj(), law, *data, p);
    Trajectory o2 = picard_step(random_traj(), law, *data, p);
    REQUIRE(o1.states.size() == o2.states.size());
    for (std::size_t s = 0; s < o1.states.size(); ++s) CHECK(bitwise_equal(o1.states[s], o2.states[s]));

    auto k = kerr();
    auto zero = make_data("zero", json::object(), k);
    Trajectory z = picard_step(sampled(g, 0.0, 0.02, 5, [&](double t) { return (0.1 * (1 + t)) * o1.states[1]; }), k,
                               *zero, p);
    for (const auto& s : z.states) CHECK(max_abs(s) == 0.0);
}

TEST_CASE("picard_step: the exact manufactured solution is a fixed point up to discretization error") {
    auto law = kerr();
    auto data = make_data("manufactured", {{"amplitude", 0.2}}, law);
    QuasilinearParams p;
    double err[2];
    for (int r = 0; r < 2; ++r) {
        Grid g = make_grid(r == 0 ? 8 : 16);
        const double dt = 0.04 / (1 << r);
        Trajectory ex = sampled(g, 0.0, dt, 5 << r, [&](double t) { return *data->exact(g, t); });
        Trajectory out = picard_step(ex, law, *data, p);
        err[r] = 0.0;
        for (std::size_t s = 0; s < ex.states.size(); ++s)
            err[r] = std::max(err[r], l2_norm(out.states[s] - ex.states[s]));
    }
    CHECK(std::log2(err[0] / err[1]) >= 1.8);
}

TEST_CASE("solve_quasilinear: linear law converges after one iteration") {
    Grid g = make_grid(12);
    auto law = make_law("linear");
    auto data = centered_pulse(law, 0.1);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.1;
    QuasilinearResult r = solve_quasilinear(law, *data, g, p);
    CHECK(r.history.converged);
    CHECK(r.history.iterations == 1);
    REQUIRE(r.history.rows.size() == 2);
    CHECK(r.history.rows[1].distance <= 1e-14);
    CHECK(r.compat);
    CHECK(r.compat->pass);
    CHECK(r.smallness.z == 0.0);
    CHECK(r.trajectory.t_final() == doctest::Approx(0.1));
}

TEST_CASE("solve_quasilinear: kerr small data contracts") {
    Grid g = make_grid(10);
    auto law = kerr();
    auto data = centered_pulse(law, 1e-2);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.2;
    QuasilinearResult r = solve_quasilinear(law, *data, g, p);
    const auto& h = r.history;
    CHECK(h.converged);
    CHECK(h.iterations <= 12);
    CHECK(h.median_ratio < 1.0);
    CHECK(h.final_ratio <= 0.75);
    CHECK(r.smallness.pass);
    for (const auto& row : h.rows) {
        CHECK(row.distance >= 0.0);
        CHECK(row.in_R);
        CHECK(row.in_kappa);
    }

    // Fixed-point certificate.
    Trajectory again = picard_step(r.trajectory, law, *data, p);
    CHECK(g_distance(again, r.trajectory, p.m - 1) <= 2.0 * p.tol);

    auto j = r.to_json();
    CHECK(j["history"]["rows"].size() == h.rows.size());
    CHECK(j["history"]["rows"][0]["ratio"].is_null());
}

TEST_CASE("solve_quasilinear: smaller data do not slow the contraction") {
    Grid g = make_grid(10);
    auto law = kerr();
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.2;
    double prev = INFINITY;
    for (double amp : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
        QuasilinearResult r = solve_quasilinear(law, *centered_pulse(law, amp), g, p);
        CHECK(r.history.converged);
        CHECK(r.history.median_ratio <= prev);
        prev = r.history.median_ratio;
    }
}

TEST_CASE("seed trajectory reproduces the data jets") {
    Grid g = make_grid(12);
    auto law = kerr();
    auto data = centered_pulse(law, 0.2, 0.3);
    TimeJet jets = data_jets(*law, *data, g, 0.0, 3);
    // While t <|xi|> <= 1/2 for every mode the cutoff is one and the seed is the
    // quadratic Taylor polynomial, which the order-2 stencils differentiate exactly.
    const double dt = 0.0025;
    Trajectory s = seed_trajectory(jets, dt, 4);
    CHECK(bitwise_equal(s.states[0], jets.entries[0]));
    Field d1 = (1.0 / (2.0 * dt)) * (-3.0 * s.states[0] + 4.0 * s.states[1] - s.states[2]);
    Field d2 = (1.0 / (dt * dt)) * (2.0 * s.states[0] - 5.0 * s.states[1] + 4.0 * s.states[2] - s.states[3]);
    CHECK(l2_norm(d1 - jets.entries[1]) <= 1e-10 * l2_norm(jets.entries[1]));
    CHECK(l2_norm(d2 - jets.entries[2]) <= 1e-8 * l2_norm(jets.entries[2]));
}

TEST_CASE("manufactured quasilinear solution: second order, residuals shrink") {
    auto law = kerr();
    auto data = make_data("manufactured", {{"amplitude", 0.2}}, law);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.2;
    double err[2], bc[2], pde[2];
    for (int r = 0; r < 2; ++r) {
        Grid g = make_grid(r == 0 ? 8 : 16);
        QuasilinearResult res = solve_quasilinear(law, *data, g, p);
        CHECK(res.history.converged);
        err[r] = l2_norm(res.trajectory.final_state() - *data->exact(g, res.trajectory.t_final()));
        bc[r] = res.bc_residual;
        pde[r] = res.pde_residual;
    }
    CHECK(std::log2(err[0] / err[1]) >= 1.9);
    CHECK(std::log2(bc[0] / bc[1]) >= 1.9);
    CHECK(std::log2(pde[0] / pde[1]) >= 1.9);
}

TEST_CASE("solve_quasilinear: errors") {
    Grid g = make_grid(10);
    auto law = kerr();
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.1;
    auto code_of = [&](const ScenarioData& d, const LawPtr& l, const QuasilinearParams& q) {
        try {
            solve_quasilinear(l, d, g, q);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::perturbed_run_failure;  // sentinel: no throw
    };
    // Support reaches the stencil of the face: order-1 compatibility fails.
    auto near_face = make_data("pulse", {{"amplitude", 0.1}, {"center", {0.5, 0.5, 0.2}}}, law);
    CHECK(code_of(*near_face, law, p) == ErrorCode::compat_failure);
    // Field beyond r_star.
    CHECK(code_of(*centered_pulse(law, 0.8), law, p) == ErrorCode::domain_exit);
    QuasilinearParams bad = p;
    bad.m = 0;
    CHECK(code_of(*centered_pulse(law, 0.1), law, bad) == ErrorCode::config_invalid);
    bad = p;
    bad.kappa = 10.0;
    CHECK(code_of(*centered_pulse(law, 0.1), law, bad) == ErrorCode::config_invalid);

    auto anti = std::make_shared<const AntiDamped>(300.0);
    QuasilinearParams q = p;
    q.tau = 1.0;
    q.check_compat = false;
    try {
        solve_quasilinear(anti, *centered_pulse(anti, 0.1, 0.3), make_grid(12), q);
        FAIL("expected no_contraction");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::no_contraction);
    }
}

TEST_CASE("enforced ball") {
    Grid g = make_grid(10);
    auto law = kerr();
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.1;
    p.enforce_ball = true;
    p.R = 1e-6;
    try {
        solve_quasilinear(law, *centered_pulse(law, 0.05), g, p);
        FAIL("expected ball_exit");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ball_exit);
    }
}

TEST_CASE("continuation: linear law reaches the target") {
    Grid g = make_grid(10);
    auto law = make_law("linear");
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.25;
    ContinuationResult r = continue_maximal(law, *centered_pulse(law, 0.1), g, 1.0, p);
    CHECK(r.report.criterion == "none");
    CHECK(r.report.status == "reached");
    CHECK(r.report.t_reached == doctest::Approx(1.0));
    CHECK(r.report.steps == 4);
    for (int it : r.report.iterations) CHECK(it == 1);
    double prev = 0.0;
    for (const auto& row : r.report.rows) {
        CHECK(row.dist_boundary_u >= 0.0);
        CHECK(row.omega >= prev);
        prev = row.omega;
    }
}

TEST_CASE("continuation: one run equals two chained runs") {
    Grid g = make_grid(10);
    auto law = kerr();
    auto data = centered_pulse(law, 0.05);
    QuasilinearParams p;
    p.m = 2;
    p.tau = 0.1;
    ContinuationResult whole = continue_maximal(law, *data, g, 0.2, p);
    ContinuationResult first = continue_maximal(law, *data, g, 0.1, p);
    ContinuationOptions o;
    o.restart_state = first.trajectory.final_state();
    o.restart_kappa = first.report.kappa;
    o.restart_kappa_tilde = first.report.kappa_tilde;
    o.restart_hm0 = first.report.hm0;
    QuasilinearParams q = p;
    q.t0 = first.report.t_reached;
    ContinuationResult second = continue_maximal(law, *data, g, 0.2, q, o);
    REQUIRE(whole.report.status == "reached");
    REQUIRE(second.report.status == "reached");
    const Field& a = whole.trajectory.final_state();
    const Field& b = second.trajectory.final_state();
    CHECK(max_abs(a - b) <= 10.0 * 2.2e-16 * max_abs(a));
    CHECK(whole.report.restart_compat.size() == 1);
}

TEST_CASE("continuation: large kerr data trigger a monitor, small data do not") {
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
    auto big = pulses(0.45);
    CHECK(max_abs(big->initial(g, 0.0)) == doctest::Approx(0.9 * 0.5));
    ContinuationResult r = continue_maximal(law, *big, g, 1.0, p);
    CHECK(r.report.status == "monitor");
    CHECK((r.report.criterion == "a" || r.report.criterion == "b"));
    CHECK(r.report.t_reached < 1.0);

    ContinuationResult s = continue_maximal(law, *pulses(1e-2), g, 1.0, p);
    CHECK(s.report.status == "reached");
    CHECK(s.report.criterion == "none");
    auto j = s.report.to_json();
    CHECK(j["rows"].size() == s.report.rows.size());
}
