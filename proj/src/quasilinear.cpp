#include "qmax/quasilinear.hpp"

#include "qmax/norms.hpp"
#include "qmax/operators.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/SVD>
#include <sstream>

namespace qmax {

namespace {

std::string where(double t, const Vec3& x) {
    std::ostringstream os;
    os << "t=" << t << ", x=(" << x(0) << ", " << x(1) << ", " << x(2) << ")";
    return os.str();
}

double min_distance(const MaterialLaw& law, const Field& u) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& v : u.v) d = std::min(d, law.domain().distance(v));
    return d;
}

double trace_sup(const Field& u) {
    const Vec3 nu = face_normal(false);
    double s = 0.0;
    for (const auto& v : face_values(u, false)) s = std::max(s, trace_t(v.head<3>(), nu).norm());
    return s;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}


nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

class RestartView final : public ScenarioData {
public:
    RestartView(const ScenarioData& base, Field state, DataPtr owner = {})
        : base_(base), state_(std::move(state)), owner_(std::move(owner)) {}

    std::string name() const override { return base_.name(); }
    Field initial(const Grid& g, double) const override {
        if (g != state_.grid) throw Error(ErrorCode::shape_mismatch, "restart state lives on another grid");
        return state_;
    }
    bool has_source() const override { return base_.has_source(); }
    void source(const Grid& g, double t, Field& out) const override { base_.source(g, t, out); }
    bool has_boundary_data() const override { return base_.has_boundary_data(); }
    void boundary(const Grid& g, double t, bool top, FaceData& out) const override {
        base_.boundary(g, t, top, out);
    }
    std::vector<Field> source_jets(const Grid& g, double t0, int count) const override {
        return base_.source_jets(g, t0, count);
    }
    std::vector<FaceData> boundary_jets(const Grid& g, double t0, int count, bool top) const override {
        return base_.boundary_jets(g, t0, count, top);
    }
    std::optional<Field> exact(const Grid& g, double t) const override { return base_.exact(g, t); }
    // The state is a computed one, so its jets carry discretization error.
    bool analytic_compat() const override { return false; }
    nlohmann::json describe() const override {
        auto j = base_.describe();
        j["restart"] = true;
        return j;
    }

private:
    const ScenarioData& base_;
    Field state_;
    DataPtr owner_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Frozen coefficients

FrozenCoefficients::FrozenCoefficients(LawPtr law, std::shared_ptr<const Trajectory> frozen)
    : law_(std::move(law)), frozen_(std::move(frozen)) {
    if (!law_ || !frozen_ || frozen_->states.empty())
        throw Error(ErrorCode::shape_mismatch, "frozen coefficients need a law and a stored trajectory");
    if (frozen_->states.size() > 1) {
        spacing_ = frozen_->times[1] - frozen_->times[0];
        for (std::size_t i = 2; i < frozen_->times.size(); ++i)
            if (std::abs(frozen_->times[i] - frozen_->times[i - 1] - spacing_) > 1e-9 * std::max(1.0, spacing_))
                throw Error(ErrorCode::shape_mismatch, "frozen trajectory is not equally spaced");
    }
}

Field FrozenCoefficients::state(double t) const {
    const auto& S = frozen_->states;
    const int n = int(S.size());
    if (n == 1) return S[0];
    const double s = (t - frozen_->times[0]) / spacing_;
    const double r = std::round(s);
    if (std::abs(s - r) < 1e-12 && r >= 0 && r <= n - 1) return S[std::size_t(r)];
    const int count = std::min(4, n);
    int start = int(std::floor(s)) - 1;
    start = std::clamp(start, 0, n - count);
    double w[4];
    for (int a = 0; a < count; ++a) {
        w[a] = 1.0;
        for (int b = 0; b < count; ++b)
            if (b != a) w[a] *= (s - (start + b)) / double(a - b);
    }
    Field out(S[0].grid);
    for (std::size_t p = 0; p < out.v.size(); ++p) {
        Vec6 acc = w[0] * S[std::size_t(start)].v[p];
        for (int a = 1; a < count; ++a) acc += w[a] * S[std::size_t(start + a)].v[p];
        out.v[p] = acc;
    }
    return out;
}

void FrozenCoefficients::sample(const Grid& g, double t, CoefficientSample& out) const {
    if (g != frozen_->grid) throw Error(ErrorCode::shape_mismatch, "frozen trajectory lives on another grid");
    const Field u = state(t);
    const MaterialLaw& law = *law_;
    out.A0.resize(g.size());
    out.D.resize(g.size());
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                const std::size_t p = g.index(i, j, k);
                const Vec3 x = g.point(i, j, k);
                const Vec6& v = u.v[p];
                if (!(law.domain().distance(v) > 0.0))
                    throw Error(ErrorCode::domain_exit, "frozen state leaves U at " + where(t, x));
                out.A0[p] = law.chi(x, v);
                out.D[p] = law.sigma(x, v);
            }
    const Vec3 nu = face_normal(false);
    out.b.resize(g.face_size());
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
            const Vec3 x = g.face_point(i, j, false);
            const Vec3 xi = trace_t(u(i, j, 0).head<3>(), nu);
            if (!law.domain().trace_admissible(xi))
                throw Error(ErrorCode::domain_exit, "boundary trace leaves the domain of zeta at " + where(t, x));
            out.b[g.face_index(i, j)] = law.zeta(x, xi);
        }
}

nlohmann::json FrozenCoefficients::describe() const {
    return {{"kind", "frozen"}, {"law", law_->name()}, {"states", frozen_->states.size()},
            {"t0", frozen_->t0}, {"t1", frozen_->times.back()}};
}

// ---------------------------------------------------------------------------
// Smallness

nlohmann::json SmallnessReport::to_json() const {
    return {{"kappa_bar", kappa_bar},
            {"z0", z0},
            {"z", z},
            {"threshold_regularity", threshold_regularity},
            {"threshold_uniqueness", threshold_uniqueness},
            {"pass_regularity", pass_regularity},
            {"pass_uniqueness", pass_uniqueness},
            {"pass", pass},
            {"advisory", advisory},
            {"samples", samples},
            {"argmax_xi", {argmax_xi(0), argmax_xi(1), argmax_xi(2)}}};
}

namespace {

// Partial derivatives of zeta in the two tangential directions of the face x3 = 0.
std::array<Mat3, 2> zeta_partials(const MaterialLaw& law, const Vec3& x, const Vec3& xi) {
    std::array<Mat3, 2> out;
    for (int d = 0; d < 2; ++d) {
        Vec3T v;
        for (int c = 0; c < 3; ++c) v(c) = Taylor(xi(c));
        v(d) = Taylor::variable(xi(d));
        Mat3T z = law.zeta(x, v);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out[std::size_t(d)](r, c) = z(r, c).c[1];
    }
    return out;
}

double spectral(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m);
    return svd.singularValues()(0);
}

// max over unit tangential eta of |eta_1 Z_1 + eta_2 Z_2|.
double direction_max(const std::array<Mat3, 2>& z, int angular) {
    auto f = [&](double th) { return spectral(std::cos(th) * z[0] + std::sin(th) * z[1]); };
    const double pi = std::acos(-1.0);
    double best = 0.0, best_th = 0.0;
    for (int a = 0; a < angular; ++a) {
        double th = pi * a / angular, v = f(th);
        if (v > best) best = v, best_th = th;
    }
    double width = pi / angular;
    for (int it = 0; it < 30 && width > 1e-10; ++it) {
        for (double th : {best_th - width, best_th + width}) {
            double v = f(th);
            if (v > best) best = v, best_th = th;
        }
        width *= 0.5;
    }
    return best;
}

}  // namespace

SmallnessReport smallness(const MaterialLaw& law, const Grid& g, double kappa_bar, const RunConstants& c,
                          const SmallnessOptions& opt) {
    if (!(kappa_bar >= 0.0) || !std::isfinite(kappa_bar))
        throw Error(ErrorCode::config_invalid, "smallness: kappa_bar must be finite and nonnegative");
    SmallnessReport rep;
    rep.kappa_bar = kappa_bar;
    rep.threshold_regularity = 0.125 / std::sqrt(c.c_m0 * c.c_bar);
    rep.threshold_uniqueness = 1.0 / std::sqrt(2.0 * c.c0);
    const double pi = std::acos(-1.0);

    const int stride = std::max(1, int(std::ceil(std::sqrt(double(g.face_size()) / opt.max_face_points))));
    Vec3 best_x = g.face_point(0, 0, false);
    double best = -1.0, best_r = 0.0, best_phi = 0.0;
    auto eval = [&](const Vec3& x, double r, double phi) {
        Vec3 xi(r * std::cos(phi), r * std::sin(phi), 0.0);
        if (!law.domain().trace_admissible(xi)) return -1.0;
        ++rep.samples;
        return direction_max(zeta_partials(law, x, xi), opt.angular);
    };
    for (int j = 0; j < g.n2; j += stride)
        for (int i = 0; i < g.n1; i += stride) {
            const Vec3 x = g.face_point(i, j, false);
            for (int a = 0; a <= opt.radial; ++a) {
                const double r = kappa_bar * a / opt.radial;
                const int na = a == 0 ? 1 : opt.angular;
                for (int b = 0; b < na; ++b) {
                    const double phi = 2.0 * pi * b / opt.angular;
                    double v = eval(x, r, phi);
                    if (v > best) best = v, best_r = r, best_phi = phi, best_x = x;
                }
            }
        }
    double dr = kappa_bar / std::max(1, opt.radial), dphi = 2.0 * pi / opt.angular;
    for (int it = 0; it < opt.refinements; ++it) {
        const double r0 = best_r, p0 = best_phi;
        for (int a = -2; a <= 2; ++a)
            for (int b = -2; b <= 2; ++b) {
                double r = std::clamp(r0 + 0.5 * a * dr, 0.0, kappa_bar), phi = p0 + 0.5 * b * dphi;
                double v = eval(best_x, r, phi);
                if (v > best) best = v, best_r = r, best_phi = phi;
            }
        dr *= 0.5;
        dphi *= 0.5;
    }
    rep.z0 = std::max(best, 0.0);
    rep.z = rep.z0 * kappa_bar;
    rep.argmax_xi = Vec3(best_r * std::cos(best_phi), best_r * std::sin(best_phi), 0.0);
    rep.pass_regularity = rep.z <= rep.threshold_regularity;
    rep.pass_uniqueness = rep.z <= rep.threshold_uniqueness;
    rep.pass = rep.pass_regularity && rep.pass_uniqueness;
    return rep;
}

// ---------------------------------------------------------------------------
// Picard iteration

nlohmann::json IterationHistory::to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& x : rows)
        r.push_back({{"n", x.n},
                     {"distance", x.distance},
                     {"ratio", finite_or_null(x.ratio)},
                     {"norm", x.norm},
                     {"sup_dist_u0", x.sup_dist_u0},
                     {"jet_error", x.jet_error},
                     {"in_R", x.in_R},
                     {"in_kappa", x.in_kappa}});
    return {{"rows", r},
            {"converged", converged},
            {"iterations", iterations},
            {"median_ratio", finite_or_null(median_ratio)},
            {"final_ratio", finite_or_null(final_ratio)}};
}

nlohmann::json Calibration::to_json() const {
    return {{"c_fit", c_fit},           {"c_sobolev", c_sobolev},         {"r", r},
            {"R", R},                   {"gamma", gamma},                 {"tau_formula", tau_formula},
            {"kappa", finite_or_null(kappa)}, {"kappa_tilde", kappa_tilde}, {"trace_sup", trace_sup}};
}

nlohmann::json QuasilinearResult::to_json() const {
    nlohmann::json j = {{"history", history.to_json()},
                        {"calibration", calibration.to_json()},
                        {"smallness", smallness.to_json()},
                        {"bc_residual", bc_residual},
                        {"pde_residual", pde_residual},
                        {"t0", trajectory.t0},
                        {"t1", trajectory.t_final()},
                        {"dt", trajectory.dt},
                        {"n_steps", trajectory.n_steps}};
    j["compat"] = compat ? compat->to_json() : nlohmann::json(nullptr);
    return j;
}

Trajectory picard_step(const Trajectory& frozen, const LawPtr& law, const ScenarioData& data,
                       const QuasilinearParams& p) {
    if (frozen.states.size() != std::size_t(frozen.n_steps) + 1)
        throw Error(ErrorCode::shape_mismatch, "picard_step needs every step of the frozen trajectory");
    std::shared_ptr<const Trajectory> view(&frozen, [](const Trajectory*) {});
    FrozenCoefficients coeffs(law, view);
    SolverOptions o;
    o.t0 = frozen.t0;
    o.t_final = frozen.t_final();
    o.dt = frozen.dt;
    o.cfl = p.cfl;
    o.integrator = p.integrator;
    o.store_stride = 1;
    return solve_linear(coeffs, data.initial(frozen.grid, frozen.t0), data, o);
}

TimeJet data_jets(const MaterialLaw& law, const ScenarioData& data, const Grid& g, double t0, int m) {
    std::vector<Field> f;
    if (data.has_source() && m > 1) f = data.source_jets(g, t0, m - 1);
    return s_nl(m, t0, law, data.initial(g, t0), f);
}

Trajectory seed_trajectory(const TimeJet& jets, double dt, int n_steps) {
    JetExtension ext(jets.entries, jets.t0);
    Trajectory tr;
    tr.grid = ext.grid();
    tr.t0 = jets.t0;
    tr.dt = dt;
    tr.n_steps = n_steps;
    for (int s = 0; s <= n_steps; ++s) {
        const double t = jets.t0 + s * dt;
        tr.steps.push_back(s);
        tr.times.push_back(t);
        tr.states.push_back(s == 0 ? jets.entries[0] : ext.evaluate(t));
    }
    return tr;
}

double boundary_residual(const Trajectory& tr, const MaterialLaw& law, const ScenarioData& data) {
    const Grid& g = tr.grid;
    const Vec3 nu = face_normal(false);
    double worst = 0.0;
    FaceData gb(g.face_size(), Vec3::Zero()), r(g.face_size());
    for (std::size_t s = 0; s < tr.states.size(); ++s) {
        if (data.has_boundary_data()) data.boundary(g, tr.times[s], false, gb);
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                const std::size_t f = g.face_index(i, j);
                r[f] = apply_B(law, g.face_point(i, j, false), tr.states[s](i, j, 0), nu) - gb[f];
            }
        worst = std::max(worst, face_l2(g, r));
    }
    return worst;
}

double pde_residual(const Trajectory& tr, const MaterialLaw& law, const ScenarioData& data) {
    if (tr.states.size() < 3) return 0.0;
    const Grid& g = tr.grid;
    const auto ut = time_derivative(tr.states, stored_spacing(tr));
    double worst = 0.0;
    Field f(g);
    for (std::size_t s = 0; s < tr.states.size(); ++s) {
        const Field& u = tr.states[s];
        MatField A0(g.size()), D(g.size());
        for (int k = 0; k < g.n3; ++k)
            for (int j = 0; j < g.n2; ++j)
                for (int i = 0; i < g.n1; ++i) {
                    const std::size_t p = g.index(i, j, k);
                    A0[p] = law.chi(g.point(i, j, k), u.v[p]);
                    D[p] = law.sigma(g.point(i, j, k), u.v[p]);
                }
        Field r = apply_L(A0, D, u, ut[s]);
        if (data.has_source()) {
            data.source(g, tr.times[s], f);
            r = r - f;
        }
        // The end nodes of x3 carry the penalty term; measure interior nodes.
        if (g.has_boundary())
            for (int j = 0; j < g.n2; ++j)
                for (int i = 0; i < g.n1; ++i) {
                    r(i, j, 0).setZero();
                    r(i, j, g.n3 - 1).setZero();
                }
        worst = std::max(worst, l2_norm(r));
    }
    return worst;
}

namespace {

double auto_kappa_tilde(const MaterialLaw& law, double tsup) {
    const double tr = law.domain().trace_radius();
    double k = std::isfinite(tr) ? 0.5 * tr : 1.0;
    if (!(tsup < k)) k = 2.0 * tsup;
    return k;
}

// Relative error of one-sided FD time jets at t0 against the data jets, p <= 2.
double jet_error(const Trajectory& tr, const TimeJet& jets) {
    const auto& S = tr.states;
    const double dt = tr.dt;
    double worst = 0.0;
    auto rel = [](const Field& a, const Field& b) {
        double nb = l2_norm(b);
        return l2_norm(a - b) / std::max(nb, 1e-300);
    };
    if (jets.order() >= 2 && S.size() >= 3) {
        Field d = (1.0 / (2.0 * dt)) * (-3.0 * S[0] + 4.0 * S[1] - S[2]);
        if (l2_norm(jets.entries[1]) > 0.0) worst = std::max(worst, rel(d, jets.entries[1]));
    }
    if (jets.order() >= 3 && S.size() >= 4) {
        Field d = (1.0 / (dt * dt)) * (2.0 * S[0] - 5.0 * S[1] + 4.0 * S[2] - S[3]);
        if (l2_norm(jets.entries[2]) > 0.0) worst = std::max(worst, rel(d, jets.entries[2]));
    }
    return worst;
}

}  // namespace

QuasilinearResult solve_quasilinear(const LawPtr& law, const ScenarioData& data, const Grid& g,
                                    const QuasilinearParams& p) {
    g.validate();
    if (p.m < 1) throw Error(ErrorCode::config_invalid, "solver.m must be at least 1");
    if (!(p.tau > 0.0)) throw Error(ErrorCode::config_invalid, "solver.tau must be positive");
    if (p.n_max < 1) throw Error(ErrorCode::config_invalid, "solver.n_max must be at least 1");
    QuasilinearResult res;
    const MaterialLaw& L = *law;
    const Field u0 = data.initial(g, p.t0);

    const double dist0 = min_distance(L, u0);
    if (!(dist0 > 0.0)) throw Error(ErrorCode::domain_exit, "initial state is not inside U");
    double kappa = p.kappa > 0.0 ? p.kappa : 0.5 * dist0;
    if (std::isfinite(dist0) && !(dist0 > kappa))
        throw Error(ErrorCode::config_invalid, "solver.kappa must be smaller than the distance of ran(u0) to the boundary of U");
    const double tsup = g.has_boundary() ? trace_sup(u0) : 0.0;
    const double kappa_tilde = p.kappa_tilde > 0.0 ? p.kappa_tilde : auto_kappa_tilde(L, tsup);
    if (L.zeta_depends_on_state() && !(tsup < kappa_tilde))
        throw Error(ErrorCode::config_invalid, "boundary trace of u0 is not below solver.kappa_tilde");
    res.smallness = smallness(L, g, kappa_tilde, p.constants);

    if (p.check_compat && g.has_boundary()) {  // vacuous without a boundary face
        res.compat = check_cc("nonlinear", p.m, data, L, g, p.t0, p.compat);
        if (!res.compat->pass) {
            std::ostringstream os;
            os << "compatibility conditions of order " << p.m << " fail:";
            for (double r : res.compat->residuals) os << ' ' << r;
            os << " (tolerance " << res.compat->tolerance << ")";
            throw Error(ErrorCode::compat_failure, os.str());
        }
    }

    const TimeJet jets = data_jets(L, data, g, p.t0, p.m);
    int n_steps;
    double dt;
    if (p.dt > 0.0) {
        n_steps = std::max(2, int(std::ceil(p.tau / p.dt - 1e-9)));
    } else {
        Trajectory one;
        one.grid = g;
        one.t0 = p.t0;
        one.states = {u0};
        one.times = {p.t0};
        one.steps = {0};
        FrozenCoefficients c0(law, std::make_shared<const Trajectory>(std::move(one)));
        const double limit = cfl_limit(c0, g, p.t0, p.cfl) * p.dt_safety;
        n_steps = std::max(2, int(std::ceil(p.tau / limit - 1e-12)));
    }
    dt = p.tau / n_steps;

    Trajectory prev = seed_trajectory(jets, dt, n_steps);
    const Trajectory seed = prev;
    Calibration& cal = res.calibration;
    cal.kappa = kappa;
    cal.kappa_tilde = kappa_tilde;
    cal.trace_sup = tsup;
    IterationHistory& h = res.history;
    std::vector<double> ratios;
    int bad = 0;
    double prev_d = 0.0;
    for (int n = 0; n < p.n_max; ++n) {
        Trajectory next = picard_step(prev, law, data, p);
        IterationRow row;
        row.n = n;
        row.distance = g_distance(next, prev, std::max(0, p.m - 1), true);
        if (n > 0) {
            row.ratio = prev_d > 0.0 ? row.distance / prev_d : (row.distance > 0.0 ? INFINITY : 0.0);
            ratios.push_back(row.ratio);
        }
        if (n == 0) {
            std::shared_ptr<const Trajectory> sv(&seed, [](const Trajectory*) {});
            FrozenCoefficients cs(law, sv);
            AprioriReport ap = apriori_monitor(next, cs, data);
            double c = 1.0;
            for (const auto& r : ap.rows)
                if (std::isfinite(r.c_fit)) c = std::max(c, r.c_fit);
            cal.c_fit = c;
            cal.gamma = std::max(1.0, ap.gamma0);
            double cs_est = 0.0;
            for (const auto& f : seed.states) {
                double h2 = hk_norm(f, std::min(2, max_norm_order(g)));
                if (h2 > 0.0) cs_est = std::max(cs_est, max_norm(f) / h2);
            }
            cal.c_sobolev = cs_est > 0.0 ? cs_est : 1.0;
            cal.r = std::sqrt(data_quantity(data, g, p.t0, p.t0 + p.tau, std::min(p.m, max_norm_order(g))).total);
            cal.R = p.R > 0.0 ? p.R : std::max(std::sqrt(32.0 * c) * cal.r, cal.r + 1.0);
            const double C = c, Cb = p.constants.c_bar, S = cal.c_sobolev, T = p.tau;
            const double z0 = res.smallness.z0;
            double tau_f = T;
            if (std::isfinite(kappa)) tau_f = std::min(tau_f, kappa / (2.0 * S * cal.R));
            tau_f = std::min(tau_f, std::log(2.0) / (2.0 * cal.gamma + p.m));
            tau_f = std::min(tau_f, 1.0);
            tau_f = std::min(tau_f, 1.0 / (16.0 * C * Cb * (4.0 * kappa_tilde * kappa_tilde + S * S * T * (T + z0 * z0))));
            tau_f = std::min(tau_f, 1.0 / (16.0 * C * Cb));
            tau_f = std::min(tau_f, 1.0 / (32.0 * cal.R * cal.R * C));
            cal.tau_formula = tau_f;
        }
        row.norm = g_surrogate(next, std::min(p.m, max_norm_order(g)), true);
        for (const auto& f : next.states)
            for (std::size_t q = 0; q < f.v.size(); ++q)
                row.sup_dist_u0 = std::max(row.sup_dist_u0, (f.v[q] - u0.v[q]).norm());
        row.jet_error = jet_error(next, jets);
        row.in_R = row.norm <= cal.R;
        row.in_kappa = !std::isfinite(kappa) || row.sup_dist_u0 <= 0.5 * kappa;
        h.rows.push_back(row);
        if (p.enforce_ball && !(row.in_R && row.in_kappa)) {
            std::ostringstream os;
            os << "iterate " << n << " leaves E(R, tau): norm " << row.norm << " (R " << cal.R << "), sup distance "
               << row.sup_dist_u0 << " (kappa/2 " << 0.5 * kappa << ")";
            throw Error(ErrorCode::ball_exit, os.str());
        }
        res.trajectory = std::move(next);
        if (row.distance <= p.tol) {
            h.converged = true;
            h.iterations = n;
            break;
        }
        bad = (n > 0 && row.ratio >= 1.0) ? bad + 1 : 0;
        if (bad >= p.no_contraction_run) {
            std::ostringstream os;
            os << "Picard ratios >= 1 for " << bad << " consecutive iterations; last distances";
            for (std::size_t i = h.rows.size() >= 4 ? h.rows.size() - 4 : 0; i < h.rows.size(); ++i)
                os << ' ' << h.rows[i].distance;
            throw Error(ErrorCode::no_contraction, os.str());
        }
        prev_d = row.distance;
        if (n + 1 < p.n_max) prev = res.trajectory;
    }
    if (!h.converged) h.iterations = p.n_max;
    h.median_ratio = median(ratios);
    h.final_ratio = ratios.empty() ? std::numeric_limits<double>::quiet_NaN() : ratios.back();
    if (g.has_boundary()) res.bc_residual = boundary_residual(res.trajectory, L, data);
    res.pde_residual = pde_residual(res.trajectory, L, data);
    return res;
}

// ---------------------------------------------------------------------------
// Continuation

nlohmann::json BlowupReport::to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& x : rows)
        r.push_back({{"t", x.t},
                     {"l2", x.l2},
                     {"dist_boundary_u", finite_or_null(x.dist_boundary_u)},
                     {"hm", x.hm},
                     {"grad_inf", x.grad_inf},
                     {"trace_sup", x.trace_sup},
                     {"omega", x.omega},
                     {"criterion", x.criterion}});
    nlohmann::json rc = nlohmann::json::array();
    for (bool b : restart_compat) rc.push_back(b);
    return {{"criterion", criterion},   {"status", status},     {"detail", detail},
            {"failure", failure ? nlohmann::json(error_code_name(*failure)) : nlohmann::json()},
            {"t_reached", t_reached},   {"kappa", finite_or_null(kappa)}, {"kappa_tilde", kappa_tilde},
            {"hm0", hm0},               {"steps", steps},       {"halvings", halvings},
            {"iterations", iterations}, {"restart_compat", rc}, {"rows", r}};
}

nlohmann::json ContinuationResult::to_json() const {
    nlohmann::json h = nlohmann::json::array();
    for (const auto& x : histories) h.push_back(x.to_json());
    return {{"report", report.to_json()}, {"histories", h}};
}

DataPtr restart_data(DataPtr base, Field state) {
    const ScenarioData& ref = *base;
    return std::make_shared<RestartView>(ref, std::move(state), std::move(base));
}

ContinuationResult continue_maximal(const LawPtr& law, const ScenarioData& data, const Grid& g, double t_target,
                                    const QuasilinearParams& p, const ContinuationOptions& opt) {
    g.validate();
    if (!(t_target >= p.t0)) throw Error(ErrorCode::config_invalid, "continuation target precedes t0");
    const MaterialLaw& L = *law;
    const int m = std::min(p.m, max_norm_order(g));
    Field u = opt.restart_state ? *opt.restart_state : data.initial(g, p.t0);
    ContinuationResult out;
    BlowupReport& rep = out.report;
    const double dist0 = min_distance(L, u);
    if (!(dist0 > 0.0)) throw Error(ErrorCode::domain_exit, "initial state is not inside U");
    rep.kappa = opt.restart_kappa ? *opt.restart_kappa : (p.kappa > 0.0 ? p.kappa : 0.5 * dist0);
    const double tsup0 = g.has_boundary() ? trace_sup(u) : 0.0;
    rep.kappa_tilde = opt.restart_kappa_tilde ? *opt.restart_kappa_tilde
                                              : (p.kappa_tilde > 0.0 ? p.kappa_tilde : auto_kappa_tilde(L, tsup0));
    rep.hm0 = opt.restart_hm0 ? *opt.restart_hm0 : hk_norm(u, m);

    Trajectory& tr = out.trajectory;
    tr.grid = g;
    tr.t0 = p.t0;
    double omega = 0.0;
    int stored_count = 0;
    auto monitor = [&](double t, const Field& f, bool force_store) {
        MonitorRow row;
        row.t = t;
        row.l2 = l2_norm(f);
        row.dist_boundary_u = min_distance(L, f);
        row.hm = hk_norm(f, m);
        double gi = 0.0;
        for (int axis = 0; axis < 3; ++axis) gi = std::max(gi, max_abs(diff(f, axis)));
        row.grad_inf = gi;
        row.trace_sup = g.has_boundary() ? trace_sup(f) : 0.0;
        omega = std::max(omega, std::max(gi, max_abs(f)));
        row.omega = omega;
        if (row.dist_boundary_u < opt.monitor_a * rep.kappa)
            row.criterion = "a";
        else if (row.hm > opt.monitor_b * rep.hm0 && rep.hm0 > 0.0)
            row.criterion = "b";
        else if (row.trace_sup >= rep.kappa_tilde)
            row.criterion = "c";
        rep.rows.push_back(row);
        if (force_store || row.criterion != "none" || stored_count % std::max(1, opt.store_stride) == 0) {
            tr.times.push_back(t);
            tr.states.push_back(f);
            tr.steps.push_back(stored_count);
        }
        ++stored_count;
        return row.criterion;
    };

    double t = p.t0;
    std::string fired = monitor(t, u, true);
    bool first_dt = true;
    bool done = fired != "none";
    if (done) {
        rep.criterion = fired;
        rep.status = "monitor";
    }
    while (!done && t < t_target - 1e-12 * std::max(1.0, std::abs(t_target))) {
        double step = std::min(p.tau, t_target - t);
        std::optional<QuasilinearResult> win;
        RestartView view(data, u);
        const bool restart = t > p.t0 || opt.restart_state.has_value();
        if (restart && g.has_boundary()) {
            try {
                rep.restart_compat.push_back(check_cc("nonlinear", p.m, view, L, g, t, p.compat).pass);
            } catch (const Error&) {
                rep.restart_compat.push_back(false);
            }
        }
        for (int half = 0;; ++half) {
            QuasilinearParams q = p;
            q.t0 = t;
            q.tau = step;
            // Later windows start closer to the boundary of U; the run-wide kappa
            // only drives monitor (a).
            q.kappa = std::isfinite(rep.kappa) ? std::min(rep.kappa, 0.5 * min_distance(L, u)) : rep.kappa;
            q.kappa_tilde = rep.kappa_tilde;
            q.check_compat = p.check_compat && !restart;
            try {
                QuasilinearResult r = solve_quasilinear(law, view, g, q);
                if (!r.history.converged)
                    throw Error(ErrorCode::no_contraction, "Picard iteration did not reach the tolerance");
                win = std::move(r);
                break;
            } catch (const Error& e) {
                const ErrorCode c = e.code();
                const bool retry = c == ErrorCode::no_contraction || c == ErrorCode::domain_exit ||
                                   c == ErrorCode::ball_exit || c == ErrorCode::nan_detected ||
                                   c == ErrorCode::cfl_violation;
                if (retry && half < opt.max_halvings) {
                    step *= 0.5;
                    ++rep.halvings;
                    continue;
                }
                rep.detail = e.what();
                if (c == ErrorCode::domain_exit) {
                    // The solution cannot be continued inside U: criterion (a).
                    rep.criterion = "a";
                    rep.status = "monitor";
                } else {
                    rep.status = "failure";
                    rep.failure = c;
                }
                done = true;
                break;
            }
        }
        if (!win) break;
        const Trajectory& w = win->trajectory;
        if (first_dt) {
            tr.dt = w.dt;
            first_dt = false;
        }
        for (std::size_t s = 1; s < w.states.size(); ++s) {
            const bool last = s + 1 == w.states.size();
            std::string c = monitor(w.times[s], w.states[s], last);
            tr.n_steps += 1;
            if (c != "none") {
                rep.criterion = c;
                rep.status = "monitor";
                t = w.times[s];
                done = true;
                break;
            }
        }
        rep.iterations.push_back(win->history.iterations);
        out.histories.push_back(win->history);
        ++rep.steps;
        if (done) break;
        u = w.final_state();
        t = w.t_final();
    }
    rep.t_reached = rep.rows.empty() ? p.t0 : rep.rows.back().t;
    if (rep.status == "reached" && !(rep.t_reached >= t_target - 1e-9 * std::max(1.0, std::abs(t_target))))
        rep.status = "failure";
    return out;
}

}  // namespace qmax
