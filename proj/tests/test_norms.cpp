#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmax/norms.hpp"

#include <cmath>
#include <random>

using namespace qmax;
using nlohmann::json;

namespace {

Grid cube(int n, bool periodic3 = false) {
    Grid g;
    g.n1 = g.n2 = g.n3 = n;
    g.periodic3 = periodic3;
    if (periodic3) g.H = 1.0 - 1.0 / n;
    return g;
}

Field random_field(const Grid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f(g);
    for (auto& v : f.v)
        for (int c = 0; c < 6; ++c) v(c) = u(rng);
    return f;
}

Trajectory series(const Grid& g, int n, double dt, const std::function<Field(double)>& fn) {
    Trajectory tr;
    tr.grid = g;
    tr.dt = dt;
    tr.n_steps = n;
    for (int s = 0; s <= n; ++s) {
        tr.steps.push_back(s);
        tr.times.push_back(s * dt);
        tr.states.push_back(fn(s * dt));
    }
    return tr;
}

}  // namespace

TEST_CASE("multi-indices") {
    for (int k = 0; k <= 4; ++k) {
        CHECK(multi_indices(k).size() == std::size_t((k + 1) * (k + 2) * (k + 3) / 6));
        CHECK(multi_indices(k, true).size() == std::size_t((k + 1) * (k + 2) / 2));
    }
    for (const auto& a : multi_indices(3, true)) CHECK(a[2] == 0);
}

TEST_CASE("order limits") {
    Grid g = cube(7);
    CHECK(max_norm_order(g) == 3);
    Field f(g);
    CHECK_NOTHROW(hk_norm(f, 3));
    try {
        hk_norm(f, 4);
        FAIL("expected k_too_large");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::k_too_large);
    }
}

TEST_CASE("H^k of a single mode matches the discrete and continuous symbols") {
    auto law = make_law("linear", {{"eps", 2.0}, {"mu", 0.5}});
    auto pw = make_data("plane-wave", {{"amplitude", 0.7}, {"mode", 1}}, law);
    const double imp2 = 2.0 / 0.5;
    double rel_prev = 0.0;
    for (int n : {16, 32}) {
        Grid g = cube(n, true);
        Field u0 = pw->initial(g, 0.0);
        const double vol = g.L1 * g.L2 * g.H;
        const double mode_sq = 0.5 * 0.7 * 0.7 * (1.0 + imp2) * vol;
        const double k1 = 2.0 * M_PI, kd = std::sin(k1 * g.h1()) / g.h1();
        for (int k = 0; k <= 3; ++k) {
            double cont = 0.0, disc = 0.0;
            for (int j = 0; j <= k; ++j) {
                cont += std::pow(k1, 2 * j) * mode_sq;
                disc += std::pow(kd, 2 * j) * mode_sq;
            }
            CHECK(hk_norm_sq(u0, k) == doctest::Approx(disc).epsilon(1e-12));
            DataQuantity q = data_quantity(*pw, g, 0.0, 1.0, k);
            CHECK(q.total == doctest::Approx(q.initial));
            CHECK(q.initial == doctest::Approx(disc).epsilon(1e-12));
            if (k == 3) {
                double rel = std::abs(disc - cont) / cont;
                if (n == 32) CHECK(std::log2(rel_prev / rel) == doctest::Approx(2.0).epsilon(0.05));
                rel_prev = rel;
            }
        }
    }
}

TEST_CASE("tangential norm ignores x3 derivatives") {
    Grid g = cube(9);
    Field f = sample_field(g, [](const Vec3& x) {
        Vec6 v = Vec6::Constant(1.0 + x(2) * x(2));
        return v;
    });
    CHECK(hk_norm_sq(f, 2, true) == doctest::Approx(hk_norm_sq(f, 0)).epsilon(1e-14));
    CHECK(hk_norm_sq(f, 2) > hk_norm_sq(f, 0));
}

TEST_CASE("data quantity: zero data, scaling and monotonicity") {
    Grid g = cube(10);
    auto law = make_law("kerr", {{"alpha", 1.0}});
    auto zero = make_data("zero", json::object(), law);
    CHECK(data_quantity(*zero, g, 0.0, 0.5, 2).total == 0.0);

    auto base = make_data("manufactured", {{"amplitude", 0.1}, {"t_ref", -0.3}}, law);
    auto bf = make_data("boundary-forcing", {{"amplitude", 0.2}}, law);
    for (const auto& d : {base, bf}) {
        DataQuantity q = data_quantity(*d, g, 0.0, 0.5, 2);
        CHECK(q.total > 0.0);
        for (double a : {0.5, 3.0, -2.0}) {
            DataQuantity s = data_quantity(*scale_data(d, a), g, 0.0, 0.5, 2);
            CHECK(std::abs(s.total - a * a * q.total) <= 1e-12 * a * a * q.total);
            CHECK(std::abs(s.initial - a * a * q.initial) <= 1e-12 * a * a * q.total);
            CHECK(std::abs(s.boundary - a * a * q.boundary) <= 1e-12 * a * a * q.total);
        }
        double prev = 0.0;
        for (int k = 0; k <= 3; ++k) {
            double v = data_quantity(*d, g, 0.0, 0.5, k).total;
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("time derivative is exact for quadratics") {
    Grid g = cube(5);
    Field a = random_field(g, 1), b = random_field(g, 2), c = random_field(g, 3);
    const double dt = 0.1;
    std::vector<Field> s;
    for (int i = 0; i < 6; ++i) {
        double t = i * dt;
        s.push_back(a + t * b + (t * t) * c);
    }
    auto d = time_derivative(s, dt);
    for (int i = 0; i < 6; ++i) {
        double t = i * dt;
        Field e = b + (2.0 * t) * c;
        CHECK(max_abs(d[std::size_t(i)] - e) <= 1e-12);
    }
    CHECK_THROWS_AS(time_derivative({a, b}, dt), Error);
}

TEST_CASE("G surrogate and distance") {
    Grid g = cube(8);
    Field a = random_field(g, 4), b = random_field(g, 5);
    auto tr1 = series(g, 4, 0.05, [&](double t) { return a + t * b; });
    auto tr2 = series(g, 4, 0.05, [&](double t) { return (1.0 + t) * a; });
    CHECK(g_distance(tr1, tr1, 2) == 0.0);
    CHECK(g_distance(tr1, tr2, 2) == doctest::Approx(g_distance(tr2, tr1, 2)).epsilon(1e-14));
    // Time-independent series: only the j = 0 term survives.
    auto flat = series(g, 4, 0.05, [&](double) { return a; });
    CHECK(g_surrogate(flat, 2, false) == doctest::Approx(hk_norm(a, 2)).epsilon(1e-14));
    CHECK(g_surrogate(flat, 2, true) >= g_surrogate(flat, 2, false));
    // Linear in time: d_t u = b exactly, and t -> |a + t b| is convex.
    double expect = std::max({hk_norm(b, 1), hk_norm(a + 0.2 * b, 2), hk_norm(a, 2)});
    CHECK(g_surrogate(tr1, 2, false) == doctest::Approx(expect).epsilon(1e-12));
    auto shifted = tr2;
    shifted.times[1] += 1e-3;
    CHECK_THROWS_AS(g_distance(tr1, shifted, 1), Error);
}

TEST_CASE("gamma-weighted norm of a constant trajectory") {
    Grid g = cube(6);
    Field a = random_field(g, 7);
    auto tr = series(g, 200, 0.005, [&](double) { return a; });
    const double gamma = 1.5, T = 1.0;
    double exact = std::sqrt(hk_norm_sq(a, 1) * (1.0 - std::exp(-2.0 * gamma * T)) / (2.0 * gamma));
    CHECK(gamma_norm(tr, 1, gamma) == doctest::Approx(exact).epsilon(1e-4));
    NormSuite s = norm_suite(tr, 1, gamma);
    CHECK(s.l2 == doctest::Approx(l2_norm(a)));
    CHECK(s.hk_ta <= s.hk);
    CHECK(s.weighted == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("lipschitz omega") {
    Grid g = cube(9);
    SUBCASE("constant field") {
        Vec6 c;
        c << 0.3, -1.2, 0.5, 0.0, 0.7, -0.1;
        auto tr = series(g, 3, 0.1, [&](double) { return sample_field(g, [&](const Vec3&) { return c; }); });
        for (double w : lipschitz_omega(tr)) CHECK(w == doctest::Approx(1.2).epsilon(1e-14));
    }
    SUBCASE("t times an affine profile in x3") {
        Vec6 c;
        c << 0.5, -2.0, 1.0, 0.25, 0.0, 1.5;
        const double s = 3.0;
        auto tr = series(g, 5, 0.2, [&](double t) {
            return sample_field(g, [&](const Vec3& x) { return Vec6(t * c * (1.0 + s * x(2))); });
        });
        auto w = lipschitz_omega(tr);
        const double T = tr.times.back();
        CHECK(w.back() == doctest::Approx(T * 2.0 * std::max(1.0 + s * g.H, s)).epsilon(1e-12));
        for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] >= w[i - 1]);
    }
}

TEST_CASE("face traces") {
    Grid g = cube(6);
    Field f = random_field(g, 11);
    TraceData t = face_trace(f);
    REQUIRE(t.size() == g.face_size());
    for (const auto& v : t) {
        CHECK(v(2) == 0.0);
        CHECK(v(5) == 0.0);
    }
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
            const Vec6& u = f(i, j, 0);
            const Vec6& v = t[g.face_index(i, j)];
            // v x nu with nu = -e3
            CHECK(v(0) == -u(1));
            CHECK(v(1) == u(0));
            CHECK(v(3) == -u(4));
            CHECK(v(4) == u(3));
        }
    CHECK(face_hk_norm_sq(g, t, 2) >= face_hk_norm_sq(g, t, 1));
}
