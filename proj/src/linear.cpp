#include "qmax/linear.hpp"

#include "qmax/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qmax {

using nlohmann::json;

namespace {

template <class M>
const M& pick(const std::vector<M>& v, std::size_t n) {
    return v.size() == 1 ? v[0] : v[n];
}

double sym_norm(const Mat6& m) {
    Eigen::SelfAdjointEigenSolver<Mat6> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Mat6& m) { return Eigen::JacobiSVD<Mat6>(m).singularValues()(0); }
double spectral_norm(const Mat3& m) { return Eigen::JacobiSVD<Mat3>(m).singularValues()(0); }

MatField scaled(const MatField& a, double s) {
    MatField r = a;
    for (auto& m : r) m *= s;
    return r;
}

json mat_json(const Mat6& m) {
    json r = json::array();
    for (int i = 0; i < 6; ++i) {
        json row = json::array();
        for (int j = 0; j < 6; ++j) row.push_back(m(i, j));
        r.push_back(row);
    }
    return r;
}

void check_sample(const CoefficientSample& s, const Grid& g, double eta, double t) {
    auto fail = [&](const std::string& what, std::size_t n) {
        std::ostringstream os;
        os << "coefficient invariant failed at t=" << t << ", node " << n << ": " << what;
        throw Error(ErrorCode::coefficient_invariant_failure, os.str());
    };
    if (s.A0.size() != 1 && s.A0.size() != g.size()) throw Error(ErrorCode::shape_mismatch, "A0 sample has wrong size");
    if (s.D.size() != 1 && s.D.size() != g.size()) throw Error(ErrorCode::shape_mismatch, "D sample has wrong size");
    if (s.b.size() != 1 && s.b.size() != g.face_size()) throw Error(ErrorCode::shape_mismatch, "b sample has wrong size");
    const double shift = eta * (1.0 - 1e-9);
    for (std::size_t n = 0; n < s.A0.size(); ++n) {
        const Mat6& a = s.A0[n];
        if (!a.allFinite() || !s.D[std::min(n, s.D.size() - 1)].allFinite()) fail("non-finite coefficient", n);
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff())) fail("A0 not symmetric", n);
        Eigen::LLT<Mat6> llt(a - shift * Mat6::Identity());
        if (llt.info() != Eigen::Success) fail("A0 not bounded below by eta", n);
    }
    for (std::size_t n = 0; n < s.b.size(); ++n) {
        const Mat3& b = s.b[n];
        if (!b.allFinite()) fail("non-finite boundary coefficient", n);
        if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + b.cwiseAbs().maxCoeff())) fail("b not symmetric", n);
        Eigen::Matrix2d bt = b.topLeftCorner<2, 2>();
        Eigen::LLT<Eigen::Matrix2d> llt(bt - shift * Eigen::Matrix2d::Identity());
        if (llt.info() != Eigen::Success) fail("b not bounded below by eta on tangential vectors", n);
    }
}

}  // namespace

MatField LinearCoefficients::A0_dot(const Grid& g, double t) const {
    if (!time_dependent()) return {Mat6::Zero()};
    const double d = 1e-5 * std::max(1.0, std::abs(t));
    CoefficientSample p, m;
    sample(g, t + d, p);
    sample(g, t - d, m);
    MatField r(std::max(p.A0.size(), m.A0.size()));
    for (std::size_t n = 0; n < r.size(); ++n) r[n] = (pick(p.A0, n) - pick(m.A0, n)) / (2 * d);
    return r;
}

void LinearCoefficients::jets(const Grid& g, double t0, int count, CoefficientJet& A0, CoefficientJet& D,
                              BoundaryCoefficientJet& b) const {
    if (time_dependent() && count > 1)
        throw Error(ErrorCode::order_exceeds_derivative_data, "coefficient provider has no time derivatives");
    CoefficientSample s;
    sample(g, t0, s);
    A0.entries = {s.A0};
    D.entries = {s.D};
    b.entries = {s.b};
}

json ConstantCoefficients::describe() const {
    json d = {{"kind", "constant"}, {"eta", eta_}};
    if (s_.A0.size() == 1) d["A0"] = mat_json(s_.A0[0]);
    if (s_.D.size() == 1) d["D"] = mat_json(s_.D[0]);
    return d;
}

void RampedCoefficients::sample(const Grid& g, double t, CoefficientSample& out) const {
    base_->sample(g, t, out);
    const double f = 1.0 + rate_ * (t - t_ref_);
    for (auto& m : out.A0) m *= f;
}

json RampedCoefficients::describe() const {
    return {{"kind", "ramped"}, {"rate", rate_}, {"t_ref", t_ref_}, {"base", base_->describe()}};
}

MatField RampedCoefficients::A0_dot(const Grid& g, double t) const {
    CoefficientSample s;
    base_->sample(g, t, s);
    return scaled(s.A0, rate_);
}

void RampedCoefficients::jets(const Grid& g, double t0, int count, CoefficientJet& A0, CoefficientJet& D,
                              BoundaryCoefficientJet& b) const {
    CoefficientSample s;
    base_->sample(g, t0, s);
    A0.entries = {scaled(s.A0, 1.0 + rate_ * (t0 - t_ref_))};
    if (count > 1) A0.entries.push_back(scaled(s.A0, rate_));
    D.entries = {s.D};
    b.entries = {s.b};
}

CoeffPtr law_coefficients(const MaterialLaw& law, const Grid& g) {
    CoefficientSample s;
    s.A0.resize(g.size());
    s.D.resize(g.size());
    s.b.resize(g.face_size());
    const Vec6 z6 = Vec6::Zero();
    const Vec3 z3 = Vec3::Zero();
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                Vec3 x = g.point(i, j, k);
                s.A0[g.index(i, j, k)] = law.chi(x, z6);
                s.D[g.index(i, j, k)] = law.sigma(x, z6);
            }
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) s.b[g.face_index(i, j)] = law.zeta(g.face_point(i, j, false), z3);
    auto compress = [](auto& v) {
        if (std::all_of(v.begin(), v.end(), [&](const auto& m) { return m == v[0]; })) v.resize(1);
    };
    compress(s.A0);
    compress(s.D);
    compress(s.b);
    return std::make_shared<ConstantCoefficients>(std::move(s), law.eta());
}

Integrator parse_integrator(const std::string& s) {
    if (s == "rk4") return Integrator::rk4;
    if (s == "implicit-midpoint") return Integrator::implicit_midpoint;
    throw Error(ErrorCode::config_invalid, "unknown integrator '" + s + "' (key 'solver.integrator')");
}

std::string integrator_name(Integrator i) { return i == Integrator::rk4 ? "rk4" : "implicit-midpoint"; }

double cfl_limit(const LinearCoefficients& c, const Grid& g, double t, double cfl) {
    CoefficientSample s;
    c.sample(g, t, s);
    double a = 0.0, b = g.has_boundary() ? 1.0 : 0.0;
    for (const auto& m : s.A0) a = std::max(a, sym_norm(m));
    if (g.has_boundary())
        for (const auto& m : s.b) b = std::max(b, spectral_norm(m));
    return cfl * g.h_min() * c.eta() / std::max(a, b);
}

// ---------------------------------------------------------------------------

struct SemiDiscrete::Cached {
    double t = 0.0;
    CoefficientSample s;
    std::vector<Eigen::LLT<Mat6>> a0;
    Field f;
    FaceData g_bottom, g_top;
    bool has_f = false;
};

SemiDiscrete::SemiDiscrete(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g, bool check)
    : coeffs_(coeffs), forcing_(forcing), g_(g), check_(check), tmp_(g) {}

const SemiDiscrete::Cached& SemiDiscrete::at(double t) {
    for (const auto& c : cache_)
        if (c->t == t) return *c;
    auto c = std::make_shared<Cached>();
    c->t = t;
    // Time-independent coefficients are sampled and factored once.
    if (!coeffs_.time_dependent() && !cache_.empty()) {
        c->s = cache_.back()->s;
        c->a0 = cache_.back()->a0;
    } else {
        coeffs_.sample(g_, t, c->s);
        if (check_) check_sample(c->s, g_, coeffs_.eta(), t);
        c->a0.reserve(c->s.A0.size());
        for (const auto& m : c->s.A0) {
            c->a0.emplace_back(m);
            if (c->a0.back().info() != Eigen::Success)
                throw Error(ErrorCode::singular_a0, "A0 is not positive definite at t=" + std::to_string(t));
        }
    }
    if (forcing_.has_source()) {
        c->has_f = true;
        forcing_.source(g_, t, c->f);
    }
    if (g_.has_boundary()) {
        if (forcing_.has_boundary_data()) {
            forcing_.boundary(g_, t, false, c->g_bottom);
            forcing_.boundary(g_, t, true, c->g_top);
        } else {
            c->g_bottom.assign(g_.face_size(), Vec3::Zero());
            c->g_top = c->g_bottom;
        }
    }
    if (cache_.size() >= 4) cache_.erase(cache_.begin());
    cache_.push_back(c);
    return *c;
}

const CoefficientSample& SemiDiscrete::coefficients(double t) { return at(t).s; }

void SemiDiscrete::source(double t, Field& out) {
    const Cached& c = at(t);
    out = c.has_f ? c.f : Field(g_);
}

void SemiDiscrete::boundary(double t, bool top, FaceData& out) {
    const Cached& c = at(t);
    out = top ? c.g_top : c.g_bottom;
}

void SemiDiscrete::rhs(double t, const Field& u, Field& out) { apply(t, u, out, true); }
void SemiDiscrete::rhs_homogeneous(double t, const Field& u, Field& out) { apply(t, u, out, false); }

void SemiDiscrete::apply(double t, const Field& u, Field& out, bool forced) {
    const Cached& c = at(t);
    const std::size_t N = g_.size();
    if (out.v.size() != N || !(out.grid == g_)) out = Field(g_);
    aco_derivative(u, tmp_);
    const bool uniformD = c.s.D.size() == 1;
    for (std::size_t n = 0; n < N; ++n) {
        Vec6 r = -tmp_.v[n] - (uniformD ? c.s.D[0] : c.s.D[n]) * u.v[n];
        if (forced && c.has_f) r += c.f.v[n];
        out.v[n] = r;
    }
    if (g_.has_boundary()) {
        const double inv_w = 1.0 / g_.weight3(0);
        for (int face = 0; face < 2; ++face) {
            const bool top = face == 1;
            const Vec3 nu = face_normal(top);
            const int k = top ? g_.n3 - 1 : 0;
            const FaceData& gd = top ? c.g_top : c.g_bottom;
            for (int j = 0; j < g_.n2; ++j)
                for (int i = 0; i < g_.n1; ++i) {
                    const std::size_t n = g_.index(i, j, k), f = g_.face_index(i, j);
                    Vec3 E = u.v[n].head<3>(), H = u.v[n].tail<3>();
                    Vec3 s = trace_t(E, nu);
                    Vec3 bs = top ? s : Vec3(pick(c.s.b, f) * s);
                    Vec3 rho = trace_t(H, nu) - nu.cross(bs);
                    if (forced) rho -= gd[f];
                    out.v[n].head<3>() += rho * inv_w;
                }
        }
    }
    if (c.a0.size() == 1) {
        for (std::size_t n = 0; n < N; ++n) out.v[n] = c.a0[0].solve(out.v[n]);
    } else {
        for (std::size_t n = 0; n < N; ++n) out.v[n] = c.a0[n].solve(out.v[n]);
    }
}

}  // namespace qmax

// Matrix-free operator v -> v - (dt/2) F_hom(t, v) for the implicit midpoint rule.
namespace qmax::detail {
class MidpointOperator;
}

namespace Eigen::internal {
template <>
struct traits<qmax::detail::MidpointOperator> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace qmax::detail {

class MidpointOperator : public Eigen::EigenBase<MidpointOperator> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    MidpointOperator(SemiDiscrete& sd, const Grid& g, double t, double half_dt)
        : sd_(&sd), in_(g), out_(g), t_(t), h_(half_dt) {}

    Eigen::Index rows() const { return Eigen::Index(in_.v.size() * 6); }
    Eigen::Index cols() const { return rows(); }

    template <class Rhs>
    Eigen::Product<MidpointOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<MidpointOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

    template <class V>
    void apply(const V& x, Eigen::VectorXd& y) const {
        Eigen::Map<Eigen::VectorXd>(in_.v[0].data(), rows()) = x;
        sd_->rhs_homogeneous(t_, in_, out_);
        y = x - h_ * Eigen::Map<const Eigen::VectorXd>(out_.v[0].data(), rows());
    }

private:
    SemiDiscrete* sd_;
    mutable Field in_, out_;
    double t_, h_;
};

}  // namespace qmax::detail

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<qmax::detail::MidpointOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<qmax::detail::MidpointOperator, Rhs,
                                generic_product_impl<qmax::detail::MidpointOperator, Rhs>> {
    using Scalar = typename Product<qmax::detail::MidpointOperator, Rhs>::Scalar;
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const qmax::detail::MidpointOperator& lhs, const Rhs& rhs, const Scalar& alpha) {
        Eigen::VectorXd y;
        lhs.apply(rhs, y);
        dst.noalias() += alpha * y;
    }
};
}  // namespace Eigen::internal

namespace qmax {

Trajectory solve_linear(const LinearCoefficients& coeffs, const Field& u0, const ScenarioData& forcing,
                        const SolverOptions& opt, const StepObserver& observer) {
    const Grid& g = u0.grid;
    g.validate();
    u0.check_consistent();
    if (!u0.finite()) throw Error(ErrorCode::nan_detected, "initial state is not finite");
    const double span = opt.t_final - opt.t0;
    if (!(span >= 0.0)) throw Error(ErrorCode::config_invalid, "final time precedes the initial time");
    if (!(opt.cfl > 0.0)) throw Error(ErrorCode::config_invalid, "cfl number must be positive");

    int n_steps = 0;
    double dt = 0.0;
    if (span > 0.0) {
        double limit = cfl_limit(coeffs, g, opt.t0, opt.cfl);
        if (coeffs.time_dependent()) limit = std::min(limit, cfl_limit(coeffs, g, opt.t_final, opt.cfl));
        if (opt.dt > 0.0) {
            n_steps = int(std::ceil(span / opt.dt - 1e-9));
            dt = span / n_steps;
            if (opt.integrator == Integrator::rk4 && dt > limit * (1 + 1e-12)) {
                std::ostringstream os;
                os << "time step " << dt << " exceeds the stability limit " << limit;
                throw Error(ErrorCode::cfl_violation, os.str());
            }
        } else {
            n_steps = std::max(1, int(std::ceil(span / limit - 1e-12)));
            dt = span / n_steps;
        }
    }

    SemiDiscrete sd(coeffs, forcing, g, opt.check_coefficients);
    Trajectory tr;
    tr.grid = g;
    tr.t0 = opt.t0;
    tr.dt = dt;
    tr.n_steps = n_steps;
    Field u = u0;
    auto store = [&](int step, double t) {
        tr.steps.push_back(step);
        tr.times.push_back(t);
        tr.states.push_back(u);
    };
    store(0, opt.t0);
    if (n_steps > 0) sd.coefficients(opt.t0);
    if (observer) observer(0, opt.t0, u);

    Field k1(g), k2(g), k3(g), k4(g), tmp(g), zero(g), c(g);
    const std::size_t N = g.size();
    for (int step = 1; step <= n_steps; ++step) {
        const double t = opt.t0 + (step - 1) * dt;
        if (opt.integrator == Integrator::rk4) {
            sd.rhs(t, u, k1);
            for (std::size_t n = 0; n < N; ++n) tmp.v[n] = u.v[n] + 0.5 * dt * k1.v[n];
            sd.rhs(t + 0.5 * dt, tmp, k2);
            for (std::size_t n = 0; n < N; ++n) tmp.v[n] = u.v[n] + 0.5 * dt * k2.v[n];
            sd.rhs(t + 0.5 * dt, tmp, k3);
            for (std::size_t n = 0; n < N; ++n) tmp.v[n] = u.v[n] + dt * k3.v[n];
            sd.rhs(t + dt, tmp, k4);
            for (std::size_t n = 0; n < N; ++n)
                u.v[n] += (dt / 6.0) * (k1.v[n] + 2.0 * k2.v[n] + 2.0 * k3.v[n] + k4.v[n]);
        } else {
            const double tm = t + 0.5 * dt;
            sd.rhs(tm, zero, c);
            const Eigen::Index len = Eigen::Index(6 * N);
            Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(u.v[0].data(), len) +
                                0.5 * dt * Eigen::Map<const Eigen::VectorXd>(c.v[0].data(), len);
            detail::MidpointOperator op(sd, g, tm, 0.5 * dt);
            Eigen::BiCGSTAB<detail::MidpointOperator, Eigen::IdentityPreconditioner> solver;
            solver.setTolerance(opt.implicit_tol);
            solver.setMaxIterations(opt.implicit_max_iter);
            solver.compute(op);
            Eigen::VectorXd guess = Eigen::Map<const Eigen::VectorXd>(u.v[0].data(), len);
            Eigen::VectorXd v = solver.solveWithGuess(b, guess);
            if (solver.info() != Eigen::Success)
                throw Error(ErrorCode::nan_detected,
                            "implicit midpoint solve did not converge at step " + std::to_string(step));
            Eigen::Map<Eigen::VectorXd> um(u.v[0].data(), len);
            um = 2.0 * v - um;
        }
        if (!u.finite()) throw Error(ErrorCode::nan_detected, "non-finite state at step " + std::to_string(step));
        const double tn = opt.t0 + step * dt;
        const bool keep = step == n_steps || (opt.store_stride > 0 && step % opt.store_stride == 0);
        if (keep) store(step, tn);
        if (observer) observer(step, tn, u);
    }
    return tr;
}

// ---------------------------------------------------------------------------

json EnergyAudit::to_json() const {
    return {{"lhs", lhs}, {"rhs", rhs}, {"residual", residual}, {"energy_initial", energy_initial},
            {"energy_final", energy_final}, {"dissipation", dissipation}, {"work", work},
            {"n_steps", n_steps}, {"dt", dt}};
}

EnergyAccumulator::EnergyAccumulator(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g)
    : coeffs_(coeffs), forcing_(forcing), g_(g) {}

void EnergyAccumulator::observe(int step, double t, const Field& u) {
    CoefficientSample s;
    coeffs_.sample(g_, t, s);
    MatField adot = coeffs_.A0_dot(g_, t);
    Field f;
    const bool has_f = forcing_.has_source();
    if (has_f) forcing_.source(g_, t, f);
    double energy = 0.0, p = 0.0, q = 0.0;
    for (int k = 0; k < g_.n3; ++k) {
        const double w = g_.cell_weight(k);
        for (int j = 0; j < g_.n2; ++j)
            for (int i = 0; i < g_.n1; ++i) {
                const std::size_t n = g_.index(i, j, k);
                const Vec6& v = u.v[n];
                energy += 0.5 * w * v.dot(pick(s.A0, n) * v);
                p += w * v.dot((0.5 * pick(adot, n) - pick(s.D, n)) * v);
                if (has_f) p += w * f.v[n].dot(v);
            }
    }
    if (g_.has_boundary()) {
        const double fw = g_.h1() * g_.h2();
        FaceData gd;
        for (int face = 0; face < 2; ++face) {
            const bool top = face == 1;
            const Vec3 nu = face_normal(top);
            const int k = top ? g_.n3 - 1 : 0;
            if (forcing_.has_boundary_data()) forcing_.boundary(g_, t, top, gd);
            for (int j = 0; j < g_.n2; ++j)
                for (int i = 0; i < g_.n1; ++i) {
                    const std::size_t n = g_.index(i, j, k), fi = g_.face_index(i, j);
                    Vec3 E = u.v[n].head<3>();
                    Vec3 sv = trace_t(E, nu);
                    Vec3 bs = top ? sv : Vec3(pick(s.b, fi) * sv);
                    q += fw * bs.dot(sv);
                    if (forcing_.has_boundary_data()) p -= fw * gd[fi].dot(trace_tau(E, nu));
                }
        }
    }
    if (!started_) {
        audit_.energy_initial = energy;
        started_ = true;
    } else {
        const double h = t - prev_t_;
        audit_.dissipation += 0.5 * h * (q + prev_q_);
        audit_.work += 0.5 * h * (p + prev_p_);
        audit_.dt = h;
    }
    audit_.n_steps = step;
    audit_.energy_final = energy;
    audit_.lhs = energy + audit_.dissipation;
    audit_.rhs = audit_.energy_initial + audit_.work;
    audit_.residual = std::abs(audit_.lhs - audit_.rhs);
    audit_.times.push_back(t);
    audit_.lhs_series.push_back(audit_.lhs);
    audit_.rhs_series.push_back(audit_.rhs);
    prev_t_ = t;
    prev_q_ = q;
    prev_p_ = p;
}

EnergyAudit energy_audit(const Trajectory& traj, const LinearCoefficients& coeffs, const ScenarioData& forcing) {
    if (traj.states.size() != std::size_t(traj.n_steps) + 1)
        throw Error(ErrorCode::shape_mismatch, "energy audit needs every time step stored (store_stride = 1)");
    EnergyAccumulator acc(coeffs, forcing, traj.grid);
    for (std::size_t i = 0; i < traj.states.size(); ++i) acc.observe(traj.steps[i], traj.times[i], traj.states[i]);
    return acc.result();
}

EnergyAudit run_energy_audit(const LinearCoefficients& coeffs, const Field& u0, const ScenarioData& forcing,
                             SolverOptions opt) {
    opt.store_stride = 0;
    EnergyAccumulator acc(coeffs, forcing, u0.grid);
    solve_linear(coeffs, u0, forcing, opt, [&](int s, double t, const Field& u) { acc.observe(s, t, u); });
    return acc.result();
}

// ---------------------------------------------------------------------------

json AprioriReport::to_json() const {
    json rowsj = json::array();
    for (const auto& r : rows)
        rowsj.push_back({{"gamma", r.gamma}, {"lhs", r.lhs}, {"bracket", r.bracket}, {"c_fit", r.c_fit}});
    return {{"r", r}, {"gamma0", gamma0}, {"rows", rowsj}, {"monotone", monotone}};
}

namespace {

double r_bound(const LinearCoefficients& coeffs, const Grid& g, double t) {
    CoefficientSample s;
    coeffs.sample(g, t, s);
    MatField adot = coeffs.A0_dot(g, t);
    const std::size_t n = std::max(s.D.size(), adot.size());
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::max(r, spectral_norm(Mat6(pick(s.D, i) - 0.5 * pick(adot, i))));
    return r;
}

}  // namespace

double apriori_gamma0(const LinearCoefficients& coeffs, const Grid& g, double t0, double t1) {
    double r = 0.0;
    for (double t : {t0, 0.5 * (t0 + t1), t1}) r = std::max(r, r_bound(coeffs, g, t));
    return std::max(1.0, 4.0 * r / coeffs.eta());
}

AprioriAccumulator::AprioriAccumulator(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g,
                                       std::vector<double> gammas)
    : coeffs_(coeffs), forcing_(forcing), g_(g), gammas_(std::move(gammas)) {
    const std::size_t m = gammas_.size();
    int_u_.assign(m, 0.0);
    int_tr_.assign(m, 0.0);
    int_f_.assign(m, 0.0);
    int_g_.assign(m, 0.0);
}

void AprioriAccumulator::observe(int, double t, const Field& u) {
    double usq = 0.0, trsq = 0.0, fsq = 0.0, gsq = 0.0;
    usq = inner(u, u);
    if (forcing_.has_source()) {
        Field f;
        forcing_.source(g_, t, f);
        fsq = inner(f, f);
    }
    if (g_.has_boundary()) {
        const double fw = g_.h1() * g_.h2();
        FaceData gd;
        for (int face = 0; face < 2; ++face) {
            const bool top = face == 1;
            const Vec3 nu = face_normal(top);
            const int k = top ? g_.n3 - 1 : 0;
            if (forcing_.has_boundary_data()) {
                forcing_.boundary(g_, t, top, gd);
                for (const auto& v : gd) gsq += fw * v.squaredNorm();
            }
            for (int j = 0; j < g_.n2; ++j)
                for (int i = 0; i < g_.n1; ++i) {
                    const Vec6& v = u.v[g_.index(i, j, k)];
                    trsq += fw * (trace_tau(Vec3(v.head<3>()), nu).squaredNorm() +
                                  trace_tau(Vec3(v.tail<3>()), nu).squaredNorm());
                }
        }
    }
    if (!started_) {
        started_ = true;
        t0_ = t;
        u0_sq_ = usq;
        CoefficientSample s;
        coeffs_.sample(g_, t, s);
        for (const auto& m : s.A0) a0_norm0_ = std::max(a0_norm0_, sym_norm(m));
        r_ = std::max(r_, r_bound(coeffs_, g_, t));
    } else {
        const double h = t - prev_t_;
        for (std::size_t i = 0; i < gammas_.size(); ++i) {
            const double w0 = std::exp(-2 * gammas_[i] * (prev_t_ - t0_)), w1 = std::exp(-2 * gammas_[i] * (t - t0_));
            int_u_[i] += 0.5 * h * (w0 * prev_u_[0] + w1 * usq);
            int_tr_[i] += 0.5 * h * (w0 * prev_u_[1] + w1 * trsq);
            int_f_[i] += 0.5 * h * (w0 * prev_u_[2] + w1 * fsq);
            int_g_[i] += 0.5 * h * (w0 * prev_u_[3] + w1 * gsq);
        }
    }
    prev_u_ = {usq, trsq, fsq, gsq};
    prev_t_ = t;
    last_u_sq_ = usq;
    last_t_ = t;
}

AprioriReport AprioriAccumulator::result() const {
    AprioriReport rep;
    rep.r = std::max(r_, started_ ? r_bound(coeffs_, g_, last_t_) : 0.0);
    rep.gamma0 = std::max(1.0, 4.0 * rep.r / coeffs_.eta());
    for (std::size_t i = 0; i < gammas_.size(); ++i) {
        AprioriRow row;
        row.gamma = gammas_[i];
        row.lhs = std::exp(-2 * row.gamma * (last_t_ - t0_)) * last_u_sq_ + row.gamma * int_u_[i] + int_tr_[i];
        row.bracket = a0_norm0_ * u0_sq_ + (row.gamma > 0 ? int_f_[i] / row.gamma : 0.0) + int_g_[i];
        row.c_fit = row.bracket > 0 ? row.lhs / row.bracket : 0.0;
        rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].gamma >= rep.gamma0 && rep.rows[i - 1].gamma >= rep.gamma0 &&
            rep.rows[i].lhs > rep.rows[i - 1].lhs * (1 + 1e-12))
            rep.monotone = false;
    return rep;
}

AprioriReport apriori_monitor(const Trajectory& traj, const LinearCoefficients& coeffs, const ScenarioData& forcing,
                              std::vector<double> gammas) {
    if (gammas.empty()) {
        double g0 = apriori_gamma0(coeffs, traj.grid, traj.t0, traj.t_final());
        gammas = {g0, 2 * g0, 4 * g0};
    }
    std::sort(gammas.begin(), gammas.end());
    AprioriAccumulator acc(coeffs, forcing, traj.grid, gammas);
    for (std::size_t i = 0; i < traj.states.size(); ++i) acc.observe(traj.steps[i], traj.times[i], traj.states[i]);
    return acc.result();
}

}  // namespace qmax
