#include "qmax/compat.hpp"

#include "qmax/operators.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace qmax {

using nlohmann::json;

void TimeJet::validate() const {
    if (entries.empty()) throw Error(ErrorCode::shape_mismatch, "time jet has no entries");
    for (const auto& e : entries) {
        e.check_consistent();
        if (!(e.grid == entries[0].grid)) throw Error(ErrorCode::shape_mismatch, "time jet entries on different grids");
        if (!e.finite()) throw Error(ErrorCode::nan_detected, "time jet entry is not finite");
    }
}

namespace {

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

template <class M>
const M& pick(const std::vector<M>& v, std::size_t n) {
    return v.size() == 1 ? v[0] : v[n];
}

template <class M>
void check_shape(const std::vector<M>& v, std::size_t n, const char* what) {
    if (v.size() != 1 && v.size() != n)
        throw Error(ErrorCode::shape_mismatch, std::string(what) + ": expected 1 or one matrix per node");
}

// Taylor state at one node from normalized coefficients U[0..k].
Vec6T taylor_state(const std::vector<Field>& U, int k, std::size_t n) {
    Vec6T s;
    for (int c = 0; c < 6; ++c) {
        Taylor t;
        for (int i = 0; i <= k; ++i) t.c[std::size_t(i)] = U[std::size_t(i)].v[n](c);
        s(c) = t;
    }
    return s;
}

Vec6T taylor_from_derivatives(const TimeJet& s, std::size_t n) {
    Vec6T st;
    for (int c = 0; c < 6; ++c) {
        double d[Taylor::N];
        for (int i = 0; i < s.order(); ++i) d[i] = s.entries[std::size_t(i)].v[n](c);
        st(c) = Taylor::from_derivatives(d, s.order());
    }
    return st;
}

// Coefficients of the system at Taylor order k. `zero` marks exactly vanishing
// orders, which are skipped by the recursion.
struct OrderCoeffs {
    std::vector<Mat6> X, S;
    bool x_zero = false, s_zero = false;
};

// Shared recursion in Taylor-normalized form. With u = sum U_k (t-t0)^k,
//   (k+1) X_0 U_{k+1} = F_k - Aco D U_k - sum_{i<=k} S_i U_{k-i}
//                       - sum_{1<=i<=k} (k-i+1) X_i U_{k-i+1}.
template <class Provider>
TimeJet recursion(int m, double t0, const Field& u0, const std::vector<Field>& f_jets, Provider&& provider,
                  ErrorCode singular) {
    if (m < 1) throw Error(ErrorCode::config_invalid, "jet order m must be >= 1");
    if (m > Taylor::N) throw Error(ErrorCode::order_exceeds_derivative_data, "jet order exceeds Taylor capacity");
    u0.check_consistent();
    const Grid& g = u0.grid;
    const std::size_t N = g.size();
    if (!f_jets.empty() && int(f_jets.size()) < m - 1)
        throw Error(ErrorCode::order_exceeds_derivative_data, "source jets shorter than m-1");
    for (const auto& f : f_jets)
        if (!(f.grid == g)) throw Error(ErrorCode::shape_mismatch, "source jet grid differs from u0 grid");

    std::vector<Field> U(static_cast<std::size_t>(m), Field(g));
    U[0] = u0;
    std::vector<OrderCoeffs> co(static_cast<std::size_t>(m));
    std::vector<Eigen::LLT<Mat6>> x0;
    Field rhs(g), tmp(g);
    for (int k = 0; k + 1 < m; ++k) {
        co[std::size_t(k)] = provider(k, U);
        const OrderCoeffs& ck = co[std::size_t(k)];
        check_shape(ck.X, N, "coefficient jet");
        check_shape(ck.S, N, "coefficient jet");
        if (k == 0) {
            for (const auto& X : ck.X) {
                x0.emplace_back(X);
                if (x0.back().info() != Eigen::Success)
                    throw Error(singular, "leading coefficient not positive definite");
            }
        }
        aco_derivative(U[std::size_t(k)], tmp);
        const double fk = 1.0 / factorial(k);
        for (std::size_t n = 0; n < N; ++n) {
            Vec6 r = -tmp.v[n];
            if (!f_jets.empty()) r += f_jets[std::size_t(k)].v[n] * fk;
            for (int i = 0; i <= k; ++i) {
                const OrderCoeffs& ci = co[std::size_t(i)];
                if (ci.s_zero) continue;
                r -= pick(ci.S, n) * U[std::size_t(k - i)].v[n];
            }
            for (int i = 1; i <= k; ++i) {
                const OrderCoeffs& ci = co[std::size_t(i)];
                if (ci.x_zero) continue;
                r -= double(k - i + 1) * (pick(ci.X, n) * U[std::size_t(k - i + 1)].v[n]);
            }
            rhs.v[n] = r;
        }
        Field& next = U[std::size_t(k + 1)];
        for (std::size_t n = 0; n < N; ++n)
            next.v[n] = (x0.size() == 1 ? x0[0] : x0[n]).solve(rhs.v[n]) / double(k + 1);
    }
    TimeJet out;
    out.t0 = t0;
    out.entries = std::move(U);
    for (int p = 0; p < m; ++p)
        for (auto& v : out.entries[std::size_t(p)].v) v *= factorial(p);
    for (const auto& e : out.entries)
        if (!e.finite()) throw Error(ErrorCode::nan_detected, "time jet recursion produced non-finite values");
    return out;
}

void check_domain(const MaterialLaw& law, const Field& u) {
    for (std::size_t n = 0; n < u.v.size(); ++n)
        if (!law.domain().contains(u.v[n]))
            throw Error(ErrorCode::domain_violation, "state outside the admissible set U at node " + std::to_string(n));
}

Vec3T taylor_boundary(const MaterialLaw& law, const Vec3& x, const Vec6T& u, const Vec3& nu) {
    const Vec3T nut = nu.cast<Taylor>();
    Vec3T e = u.head<3>(), h = u.tail<3>();
    Vec3T xi = e.cross(nut);
    Mat3T z = law.zeta(x, xi);
    Vec3T bs = z * xi;
    return h.cross(nut) - nut.cross(bs);
}

CompatReport finish_report(std::string kind, int m, std::vector<double> res, double data_norm, const Grid& g,
                           const CompatOptions& opt, bool analytic) {
    CompatReport r;
    r.kind = std::move(kind);
    r.m = m;
    r.residuals = std::move(res);
    r.data_norm = data_norm;
    std::string mode = opt.mode;
    if (mode == "auto") mode = analytic ? "relative" : "dx2";
    if (mode == "relative") {
        r.tolerance = opt.rel_tol * (1.0 + data_norm);
    } else if (mode == "dx2") {
        r.tolerance = opt.dx2_factor * g.h_max() * g.h_max() * (1.0 + data_norm);
    } else {
        throw Error(ErrorCode::config_invalid, "unknown compatibility tolerance mode '" + opt.mode + "'");
    }
    r.mode = mode;
    for (double v : r.residuals) {
        r.order_pass.push_back(v <= r.tolerance);
        r.pass = r.pass && r.order_pass.back();
    }
    return r;
}

void check_cc_inputs(int m, const TimeJet& s, const std::vector<FaceData>& g_jets) {
    s.validate();
    if (m < 1 || s.order() < m)
        throw Error(ErrorCode::order_exceeds_derivative_data, "state jet shorter than compatibility order");
    if (int(g_jets.size()) < m)
        throw Error(ErrorCode::order_exceeds_derivative_data, "boundary data jets shorter than compatibility order");
    const Grid& g = s.entries[0].grid;
    if (!g.has_boundary()) throw Error(ErrorCode::config_invalid, "compatibility check needs a boundary face");
    for (int p = 0; p < m; ++p)
        if (g_jets[std::size_t(p)].size() != g.face_size())
            throw Error(ErrorCode::shape_mismatch, "boundary data jet has wrong face size");
}

double max_face_norm(const Grid& g, const std::vector<FaceData>& g_jets, int m) {
    double d = 0.0;
    for (int p = 0; p < m; ++p) d = std::max(d, face_l2(g, g_jets[std::size_t(p)]));
    return d;
}

}  // namespace

CoefficientJet jet_compose(const MaterialLaw& law, LawComponent component, const TimeJet& state) {
    state.validate();
    if (state.order() > law.max_jet_order())
        throw Error(ErrorCode::order_exceeds_derivative_data, "law derivatives not available to the requested order");
    check_domain(law, state.entries[0]);
    const Grid& g = state.entries[0].grid;
    CoefficientJet out;
    out.entries.assign(std::size_t(state.order()), std::vector<Mat6>(g.size()));
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                std::size_t n = g.index(i, j, k);
                Vec6T u = taylor_from_derivatives(state, n);
                Vec3 x = g.point(i, j, k);
                Mat6T c = component == LawComponent::chi ? law.chi(x, u) : law.sigma(x, u);
                for (int p = 0; p < state.order(); ++p)
                    out.entries[std::size_t(p)][n] = c.unaryExpr([p](const Taylor& t) { return t.derivative(p); });
            }
    return out;
}

BoundaryCoefficientJet jet_compose_boundary(const MaterialLaw& law, const TimeJet& state, bool top) {
    state.validate();
    if (state.order() > law.max_jet_order())
        throw Error(ErrorCode::order_exceeds_derivative_data, "law derivatives not available to the requested order");
    const Grid& g = state.entries[0].grid;
    if (!g.has_boundary()) throw Error(ErrorCode::config_invalid, "grid has no boundary face");
    const Vec3T nu = face_normal(top).cast<Taylor>();
    const int k = top ? g.n3 - 1 : 0;
    BoundaryCoefficientJet out;
    out.entries.assign(std::size_t(state.order()), std::vector<Mat3>(g.face_size()));
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
            std::size_t n = g.index(i, j, k);
            Vec6T u = taylor_from_derivatives(state, n);
            Vec3T xi = Vec3T(u.head<3>()).cross(nu);
            if (!law.domain().trace_admissible(xi.unaryExpr([](const Taylor& t) { return t.value(); })))
                throw Error(ErrorCode::domain_violation, "boundary trace outside the admissible trace set");
            Mat3T z = law.zeta(g.face_point(i, j, top), xi);
            for (int p = 0; p < state.order(); ++p)
                out.entries[std::size_t(p)][g.face_index(i, j)] =
                    z.unaryExpr([p](const Taylor& t) { return t.derivative(p); });
        }
    return out;
}

TimeJet s_lin(int m, double t0, const CoefficientJet& A0, const CoefficientJet& D, const Field& u0,
              const std::vector<Field>& f_jets) {
    if (A0.entries.empty() || D.entries.empty())
        throw Error(ErrorCode::shape_mismatch, "coefficient jets need at least the value at t0");
    auto provider = [&](int k, const std::vector<Field>&) {
        OrderCoeffs c;
        const std::size_t kk = std::size_t(k);
        if (kk < A0.entries.size()) c.X = A0.entries[kk]; else { c.X = {Mat6::Zero()}; c.x_zero = true; }
        if (kk < D.entries.size()) c.S = D.entries[kk]; else { c.S = {Mat6::Zero()}; c.s_zero = true; }
        if (k > 0) {
            const double inv = 1.0 / factorial(k);
            for (auto& x : c.X) x *= inv;
            for (auto& x : c.S) x *= inv;
        }
        return c;
    };
    return recursion(m, t0, u0, f_jets, provider, ErrorCode::singular_a0);
}

TimeJet s_nl(int m, double t0, const MaterialLaw& law, const Field& u0, const std::vector<Field>& f_jets) {
    u0.check_consistent();
    check_domain(law, u0);
    if (m > law.max_jet_order())
        throw Error(ErrorCode::order_exceeds_derivative_data, "law derivatives not available to the requested order");
    const Grid& g = u0.grid;
    const std::size_t N = g.size();
    std::vector<Vec3> pts(N);
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) pts[g.index(i, j, k)] = g.point(i, j, k);
    const bool xdep = law.chi_depends_on_state(), sdep = law.sigma_depends_on_state();
    auto provider = [&](int k, const std::vector<Field>& U) {
        OrderCoeffs c;
        const bool need_x = k == 0 || xdep, need_s = k == 0 || sdep;
        c.x_zero = !need_x;
        c.s_zero = !need_s;
        if (need_x) c.X.resize(N);
        else c.X = {Mat6::Zero()};
        if (need_s) c.S.resize(N);
        else c.S = {Mat6::Zero()};
        for (std::size_t n = 0; n < N; ++n) {
            if (k == 0) {
                // Same path as a frozen linear jet: values only.
                const Vec6& u = U[0].v[n];
                c.X[n] = law.chi(pts[n], u);
                c.S[n] = law.sigma(pts[n], u);
                continue;
            }
            Vec6T ut = taylor_state(U, k, n);
            if (need_x) c.X[n] = law.chi(pts[n], ut).unaryExpr([k](const Taylor& t) { return t.c[std::size_t(k)]; });
            if (need_s) c.S[n] = law.sigma(pts[n], ut).unaryExpr([k](const Taylor& t) { return t.c[std::size_t(k)]; });
        }
        return c;
    };
    return recursion(m, t0, u0, f_jets, provider, ErrorCode::singular_chi);
}

CoefficientJet frozen_jet(const MaterialLaw& law, LawComponent c, const Grid& g) {
    CoefficientJet out;
    out.entries.assign(1, std::vector<Mat6>(g.size()));
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                Vec3 x = g.point(i, j, k);
                out.entries[0][g.index(i, j, k)] =
                    c == LawComponent::chi ? law.chi(x, Vec6(Vec6::Zero())) : law.sigma(x, Vec6(Vec6::Zero()));
            }
    return out;
}

BoundaryCoefficientJet frozen_boundary_jet(const MaterialLaw& law, const Grid& g) {
    BoundaryCoefficientJet out;
    out.entries.assign(1, std::vector<Mat3>(g.face_size()));
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i)
            out.entries[0][g.face_index(i, j)] = law.zeta(g.face_point(i, j, false), Vec3(Vec3::Zero()));
    return out;
}

CompatReport check_cc_linear(int m, const TimeJet& s, const BoundaryCoefficientJet& b,
                             const std::vector<FaceData>& g_jets, const CompatOptions& opt, bool analytic) {
    check_cc_inputs(m, s, g_jets);
    const Grid& g = s.entries[0].grid;
    if (b.entries.empty()) throw Error(ErrorCode::shape_mismatch, "boundary coefficient jet is empty");
    for (const auto& e : b.entries) check_shape(e, g.face_size(), "boundary coefficient jet");
    const Vec3 nu = face_normal(false);
    std::vector<double> res;
    for (int p = 0; p < m; ++p) {
        FaceData r(g.face_size());
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                const std::size_t f = g.face_index(i, j), n = g.index(i, j, 0);
                Vec3 sum = Vec3::Zero();
                for (int k = 0; k <= p && k < b.order(); ++k)
                    sum += binomial(p, k) *
                           (pick(b.entries[std::size_t(k)], f) * trace_t(s.entries[std::size_t(p - k)].v[n].head<3>(), nu));
                r[f] = trace_t(s.entries[std::size_t(p)].v[n].tail<3>(), nu) - nu.cross(sum) - g_jets[std::size_t(p)][f];
            }
        res.push_back(face_l2(g, r));
    }
    return finish_report("linear", m, std::move(res), max_face_norm(g, g_jets, m), g, opt, analytic);
}

CompatReport check_cc_nonlinear(int m, const MaterialLaw& law, const TimeJet& s,
                                const std::vector<FaceData>& g_jets, const CompatOptions& opt, bool analytic) {
    check_cc_inputs(m, s, g_jets);
    const Grid& g = s.entries[0].grid;
    const Vec3 nu = face_normal(false);
    std::vector<FaceData> r(static_cast<std::size_t>(m), FaceData(g.face_size()));
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
            const std::size_t f = g.face_index(i, j), n = g.index(i, j, 0);
            Vec3T b = taylor_boundary(law, g.face_point(i, j, false), taylor_from_derivatives(s, n), nu);
            for (int p = 0; p < m; ++p)
                for (int c = 0; c < 3; ++c)
                    r[std::size_t(p)][f](c) = b(c).derivative(p) - g_jets[std::size_t(p)][f](c);
        }
    std::vector<double> res;
    for (int p = 0; p < m; ++p) res.push_back(face_l2(g, r[std::size_t(p)]));
    return finish_report("nonlinear", m, std::move(res), max_face_norm(g, g_jets, m), g, opt, analytic);
}

CompatReport check_cc(const std::string& kind, int m, const ScenarioData& data, const MaterialLaw& law,
                      const Grid& g, double t0, const CompatOptions& opt) {
    g.validate();
    Field u0 = data.initial(g, t0);
    std::vector<Field> f;
    if (data.has_source() && m > 1) f = data.source_jets(g, t0, m - 1);
    std::vector<FaceData> gj = data.boundary_jets(g, t0, m, false);
    if (kind == "linear") {
        TimeJet s = s_lin(m, t0, frozen_jet(law, LawComponent::chi, g), frozen_jet(law, LawComponent::sigma, g), u0, f);
        return check_cc_linear(m, s, frozen_boundary_jet(law, g), gj, opt, data.analytic_compat());
    }
    if (kind == "nonlinear") {
        TimeJet s = s_nl(m, t0, law, u0, f);
        return check_cc_nonlinear(m, law, s, gj, opt, data.analytic_compat());
    }
    throw Error(ErrorCode::config_invalid, "unknown compatibility kind '" + kind + "' (expected linear|nonlinear)");
}

json CompatReport::to_json() const {
    return {{"kind", kind}, {"m", m}, {"residuals", residuals}, {"data_norm", data_norm},
            {"tolerance", tolerance}, {"mode", mode}, {"order_pass", order_pass}, {"pass", pass}};
}

void write_jet_csv(std::ostream& os, const TimeJet& jet) {
    os << "order,node,u1,u2,u3,u4,u5,u6\n";
    os << std::setprecision(17);
    for (int p = 0; p < jet.order(); ++p) {
        const auto& e = jet.entries[std::size_t(p)];
        for (std::size_t n = 0; n < e.v.size(); ++n) {
            os << p << ',' << n;
            for (int c = 0; c < 6; ++c) os << ',' << e.v[n](c);
            os << '\n';
        }
    }
}

TimeJet read_jet_csv(std::istream& is, const Grid& g, double t0) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("order,node", 0) != 0)
        throw Error(ErrorCode::config_invalid, "jet file: missing header");
    TimeJet jet;
    jet.t0 = t0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long p = -1;
        long long n = -1;
        Vec6 v;
        ss >> p >> n;
        for (int c = 0; c < 6; ++c) ss >> v(c);
        if (!ss || p < 0 || n < 0 || std::size_t(n) >= g.size())
            throw Error(ErrorCode::config_invalid, "jet file: malformed row '" + line + "'");
        while (jet.entries.size() <= std::size_t(p)) jet.entries.emplace_back(g);
        jet.entries[std::size_t(p)].v[std::size_t(n)] = v;
    }
    jet.validate();
    return jet;
}

}  // namespace qmax
