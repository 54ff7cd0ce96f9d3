#include "qmax/material.hpp"

#include "qmax/operators.hpp"
#include "params.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace qmax {

using nlohmann::json;
using detail::ParamReader;

std::string StateDomain::name() const {
    switch (kind) {
        case Kind::whole: return "whole";
        case Kind::ball: return "ball";
        case Kind::e_ball: return "e_ball";
        case Kind::e_slab: return "e_slab";
    }
    return "whole";
}

double StateDomain::distance(const Vec6& u) const {
    double d = std::numeric_limits<double>::infinity();
    switch (kind) {
        case Kind::whole: return d;
        case Kind::ball: d = radius - u.norm(); break;
        case Kind::e_ball: d = radius - u.head<3>().norm(); break;
        case Kind::e_slab: d = radius - std::abs(u(axis)); break;
    }
    return std::max(d, 0.0);
}

bool StateDomain::trace_admissible(const Vec3& xi) const {
    switch (kind) {
        case Kind::whole: return true;
        case Kind::ball:
        case Kind::e_ball: return xi.norm() < radius;
        case Kind::e_slab:
            // xi = E x (-e3) = (-E2, E1, 0)
            if (axis == 0) return std::abs(xi(1)) < radius;
            if (axis == 1) return std::abs(xi(0)) < radius;
            return true;
    }
    return true;
}

double StateDomain::trace_radius() const {
    switch (kind) {
        case Kind::ball:
        case Kind::e_ball: return radius;
        default: return std::numeric_limits<double>::infinity();
    }
}

Vec6 StateDomain::sample(std::mt19937_64& rng, double fill) const {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto in_ball = [&](int dim, double r) {
        Eigen::VectorXd v(dim);
        do {
            for (int i = 0; i < dim; ++i) v(i) = uni(rng);
        } while (v.norm() > 1.0);
        return Eigen::VectorXd(v * r);
    };
    Vec6 u;
    switch (kind) {
        case Kind::whole:
            for (int i = 0; i < 6; ++i) u(i) = uni(rng);
            break;
        case Kind::ball: u = in_ball(6, fill * radius); break;
        case Kind::e_ball:
            u.head<3>() = in_ball(3, fill * radius);
            for (int i = 3; i < 6; ++i) u(i) = uni(rng);
            break;
        case Kind::e_slab:
            for (int i = 0; i < 6; ++i) u(i) = uni(rng);
            u(axis) = fill * radius * uni(rng);
            break;
    }
    return u;
}

namespace {

template <class S>
Eigen::Matrix<S, 3, 3> identity3() {
    Eigen::Matrix<S, 3, 3> m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = S(i == j ? 1.0 : 0.0);
    return m;
}

template <class S>
Eigen::Matrix<S, 6, 6> zero6() {
    Eigen::Matrix<S, 6, 6> m;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) m(i, j) = S(0.0);
    return m;
}

template <class S>
Eigen::Matrix<S, 6, 6> block_diag(const Eigen::Matrix<S, 3, 3>& a, const Eigen::Matrix<S, 3, 3>& b) {
    auto m = zero6<S>();
    m.template block<3, 3>(0, 0) = a;
    m.template block<3, 3>(3, 3) = b;
    return m;
}

template <class S>
Eigen::Matrix<S, 3, 3> outer(const Eigen::Matrix<S, 3, 1>& a, const Eigen::Matrix<S, 3, 1>& b) {
    Eigen::Matrix<S, 3, 3> m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = a(i) * b(j);
    return m;
}

template <class S>
S dot3(const Eigen::Matrix<S, 3, 1>& a, const Eigen::Matrix<S, 3, 1>& b) {
    return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

StateDomain read_domain(ParamReader& r, const std::string& def_shape, double def_radius) {
    std::string shape = r.get_str("shape", def_shape);
    double radius = r.get("radius", def_radius);
    int axis = int(r.get("axis", 0));
    if (shape == "whole") return StateDomain::whole_space();
    if (!(radius > 0))
        throw Error(ErrorCode::config_invalid, "law parameter 'radius' must be positive");
    if (shape == "ball") return StateDomain::ball(radius);
    if (shape == "e_ball") return StateDomain::e_ball(radius);
    if (shape == "e_slab") {
        if (axis < 0 || axis > 2)
            throw Error(ErrorCode::config_invalid, "law parameter 'axis' must be 0, 1 or 2");
        return StateDomain::e_slab(radius, axis);
    }
    throw Error(ErrorCode::config_invalid, "unknown value '" + shape + "' for law parameter 'shape'");
}

// Adapter turning a model with templated closures into a MaterialLaw.
template <class Model>
class LawAdapter final : public MaterialLaw {
public:
    explicit LawAdapter(Model m) : m_(std::move(m)) {}

    std::string name() const override { return m_.name(); }
    double eta() const override { return m_.eta(); }
    const StateDomain& domain() const override { return m_.domain; }

    Vec6 theta(const Vec3& x, const Vec6& u) const override { return m_.template theta<double>(x, u); }
    Mat6 chi(const Vec3& x, const Vec6& u) const override { return m_.template chi<double>(x, u); }
    Mat6 sigma(const Vec3& x, const Vec6& u) const override { return m_.template sigma<double>(x, u); }
    Mat3 zeta(const Vec3& x, const Vec3& xi) const override { return m_.template zeta<double>(x, xi); }
    Mat6T chi(const Vec3& x, const Vec6T& u) const override { return m_.template chi<Taylor>(x, u); }
    Mat6T sigma(const Vec3& x, const Vec6T& u) const override { return m_.template sigma<Taylor>(x, u); }
    Mat3T zeta(const Vec3& x, const Vec3T& xi) const override { return m_.template zeta<Taylor>(x, xi); }

    bool chi_depends_on_state() const override { return m_.chi_state(); }
    bool sigma_depends_on_state() const override { return m_.sigma_state(); }
    bool zeta_depends_on_state() const override { return m_.zeta_state(); }
    json params() const override { return m_.params(); }

private:
    Model m_;
};

struct LinearModel {
    double eps = 1.0, mu = 1.0, s0 = 0.0, z0 = 1.0;
    StateDomain domain;

    std::string name() const { return "linear"; }
    double eta() const { return std::min({eps, mu, z0}); }
    bool chi_state() const { return false; }
    bool sigma_state() const { return false; }
    bool zeta_state() const { return false; }
    json params() const {
        return {{"eps", eps}, {"mu", mu}, {"sigma", s0}, {"zeta", z0}, {"shape", domain.name()}};
    }

    template <class S>
    Eigen::Matrix<S, 6, 1> theta(const Vec3&, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 6, 1> r;
        for (int i = 0; i < 3; ++i) {
            r(i) = eps * u(i);
            r(i + 3) = mu * u(i + 3);
        }
        return r;
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> chi(const Vec3&, const Eigen::Matrix<S, 6, 1>&) const {
        return block_diag<S>(identity3<S>() * S(eps), identity3<S>() * S(mu));
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> sigma(const Vec3&, const Eigen::Matrix<S, 6, 1>&) const {
        auto m = zero6<S>();
        for (int i = 0; i < 3; ++i) m(i, i) = S(s0);
        return m;
    }
    template <class S>
    Eigen::Matrix<S, 3, 3> zeta(const Vec3&, const Eigen::Matrix<S, 3, 1>&) const {
        return identity3<S>() * S(z0);
    }
};

// theta_e = eps E + alpha |E|^2 E, zeta(xi) = z0 I + z1 xi xi^T.
struct KerrModel {
    double eps = 1.0, mu = 1.0, alpha = 1.0, s0 = 0.0, z0 = 1.0, z1 = 0.0;
    StateDomain domain = StateDomain::e_ball(0.5);

    std::string name() const { return "kerr"; }
    double eta() const { return std::min({eps, mu, z0}); }
    bool chi_state() const { return alpha != 0.0; }
    bool sigma_state() const { return false; }
    bool zeta_state() const { return z1 != 0.0; }
    json params() const {
        return {{"eps", eps},     {"mu", mu}, {"alpha", alpha}, {"sigma", s0},
                {"zeta0", z0},    {"zeta1", z1}, {"shape", domain.name()},
                {"radius", domain.radius}};
    }

    template <class S>
    Eigen::Matrix<S, 6, 1> theta(const Vec3&, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 3, 1> e = u.template head<3>();
        S e2 = dot3<S>(e, e);
        Eigen::Matrix<S, 6, 1> r;
        for (int i = 0; i < 3; ++i) {
            r(i) = eps * e(i) + alpha * e2 * e(i);
            r(i + 3) = mu * u(i + 3);
        }
        return r;
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> chi(const Vec3&, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 3, 1> e = u.template head<3>();
        S e2 = dot3<S>(e, e);
        Eigen::Matrix<S, 3, 3> ce = identity3<S>() * (S(eps) + alpha * e2) + outer<S>(e, e) * S(2.0 * alpha);
        return block_diag<S>(ce, identity3<S>() * S(mu));
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> sigma(const Vec3&, const Eigen::Matrix<S, 6, 1>&) const {
        auto m = zero6<S>();
        for (int i = 0; i < 3; ++i) m(i, i) = S(s0);
        return m;
    }
    template <class S>
    Eigen::Matrix<S, 3, 3> zeta(const Vec3&, const Eigen::Matrix<S, 3, 1>& xi) const {
        return identity3<S>() * S(z0) + outer<S>(xi, xi) * S(z1);
    }
};

// Anisotropic medium with an x3-graded permittivity, a quartic correction along
// a fixed direction, field-dependent conductivity and an anisotropic boundary.
struct AnisoModel {
    Vec3 k = Vec3(1.0, 1.5, 2.0);
    double grade = 0.25, beta = 0.5, mu = 1.0, s0 = 0.1, s1 = 0.5;
    double z0 = 1.0, z1 = 0.0, z2 = 0.5;
    Vec3 a = Vec3(1.0, 1.0, 1.0).normalized();
    StateDomain domain = StateDomain::ball(1.0);

    std::string name() const { return "aniso-demo"; }
    double eta() const { return std::min({k.minCoeff(), mu, z0}); }
    bool chi_state() const { return beta != 0.0; }
    bool sigma_state() const { return s1 != 0.0; }
    bool zeta_state() const { return z1 != 0.0; }
    json params() const {
        return {{"k1", k(0)},     {"k2", k(1)},   {"k3", k(2)},      {"grade", grade},
                {"beta", beta},   {"mu", mu},     {"sigma0", s0},    {"sigma1", s1},
                {"zeta0", z0},    {"zeta1", z1},  {"zeta2", z2},     {"shape", domain.name()},
                {"radius", domain.radius}};
    }

    double g(const Vec3& x) const { return 1.0 + grade * x(2) / (1.0 + std::abs(x(2))); }

    template <class S>
    Eigen::Matrix<S, 6, 1> theta(const Vec3& x, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 3, 1> e = u.template head<3>();
        S ae = a(0) * e(0) + a(1) * e(1) + a(2) * e(2);
        Eigen::Matrix<S, 6, 1> r;
        for (int i = 0; i < 3; ++i) {
            r(i) = k(i) * g(x) * e(i) + beta * ae * ae * ae * a(i);
            r(i + 3) = mu * u(i + 3);
        }
        return r;
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> chi(const Vec3& x, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 3, 1> e = u.template head<3>();
        S ae = a(0) * e(0) + a(1) * e(1) + a(2) * e(2);
        Eigen::Matrix<S, 3, 3> ce;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                ce(i, j) = S(i == j ? k(i) * g(x) : 0.0) + 3.0 * beta * ae * ae * (a(i) * a(j));
        return block_diag<S>(ce, identity3<S>() * S(mu));
    }
    template <class S>
    Eigen::Matrix<S, 6, 6> sigma(const Vec3&, const Eigen::Matrix<S, 6, 1>& u) const {
        Eigen::Matrix<S, 3, 1> e = u.template head<3>();
        S c = S(s0) + s1 * dot3<S>(e, e);
        auto m = zero6<S>();
        for (int i = 0; i < 3; ++i) m(i, i) = c;
        return m;
    }
    template <class S>
    Eigen::Matrix<S, 3, 3> zeta(const Vec3&, const Eigen::Matrix<S, 3, 1>& xi) const {
        Eigen::Matrix<S, 3, 3> m = identity3<S>() * S(z0) + outer<S>(xi, xi) * S(z1);
        m(0, 0) += z2;
        m(1, 1) += 0.5 * z2;
        return m;
    }
};

void require_positive(double v, const std::string& key) {
    if (!(v > 0))
        throw Error(ErrorCode::config_invalid, "law parameter '" + key + "' must be positive");
}
void require_nonneg(double v, const std::string& key) {
    if (!(v >= 0))
        throw Error(ErrorCode::config_invalid, "law parameter '" + key + "' must be nonnegative");
}

}  // namespace

std::vector<std::string> law_names() { return {"linear", "kerr", "aniso-demo"}; }

LawPtr make_law(const std::string& name, const json& params) {
    const json p = params.is_null() ? json::object() : params;
    if (!p.is_object()) throw Error(ErrorCode::config_invalid, "law params must be an object");
    ParamReader r(p, "law '" + name + "'");
    if (name == "linear") {
        LinearModel m;
        m.eps = r.get("eps", 1.0);
        m.mu = r.get("mu", 1.0);
        m.s0 = r.get("sigma", 0.0);
        m.z0 = r.get("zeta", 1.0);
        m.domain = read_domain(r, "whole", std::numeric_limits<double>::infinity());
        r.finish();
        require_positive(m.eps, "eps");
        require_positive(m.mu, "mu");
        require_positive(m.z0, "zeta");
        return std::make_shared<LawAdapter<LinearModel>>(m);
    }
    if (name == "kerr") {
        KerrModel m;
        m.eps = r.get("eps", 1.0);
        m.mu = r.get("mu", 1.0);
        m.alpha = r.get("alpha", 1.0);
        m.s0 = r.get("sigma", 0.0);
        m.z0 = r.get("zeta0", 1.0);
        m.z1 = r.get("zeta1", 0.0);
        double rs = r.get("r_star", 0.5);
        m.domain = read_domain(r, "e_ball", rs);
        r.finish();
        require_positive(m.eps, "eps");
        require_positive(m.mu, "mu");
        require_positive(m.z0, "zeta0");
        require_nonneg(m.alpha, "alpha");
        require_nonneg(m.z1, "zeta1");
        return std::make_shared<LawAdapter<KerrModel>>(m);
    }
    if (name == "aniso-demo") {
        AnisoModel m;
        m.k = Vec3(r.get("k1", 1.0), r.get("k2", 1.5), r.get("k3", 2.0));
        m.grade = r.get("grade", 0.25);
        m.beta = r.get("beta", 0.5);
        m.mu = r.get("mu", 1.0);
        m.s0 = r.get("sigma0", 0.1);
        m.s1 = r.get("sigma1", 0.5);
        m.z0 = r.get("zeta0", 1.0);
        m.z1 = r.get("zeta1", 0.0);
        m.z2 = r.get("zeta2", 0.5);
        m.domain = read_domain(r, "ball", 1.0);
        r.finish();
        require_positive(m.k.minCoeff(), "k1/k2/k3");
        require_positive(m.mu, "mu");
        require_positive(m.z0, "zeta0");
        require_nonneg(m.grade, "grade");
        require_nonneg(m.beta, "beta");
        require_nonneg(m.z1, "zeta1");
        require_nonneg(m.z2, "zeta2");
        return std::make_shared<LawAdapter<AnisoModel>>(m);
    }
    throw Error(ErrorCode::config_invalid, "unknown law name '" + name + "' (key 'law.name')");
}

Vec3 apply_B(const MaterialLaw& law, const Vec3& x, const Vec6& u, const Vec3& nu) {
    Vec3 s = trace_t(Vec3(u.head<3>()), nu);
    if (!law.domain().trace_admissible(s)) {
        std::ostringstream os;
        os << "tangential trace (" << s.transpose() << ") outside the trace set of U";
        throw Error(ErrorCode::zeta_domain_violation, os.str());
    }
    return trace_t(Vec3(u.tail<3>()), nu) - nu.cross(law.zeta(x, s) * s);
}

json LawValidation::to_json() const {
    return {{"samples", samples},
            {"symmetry_defect", symmetry_defect},
            {"min_eig_chi", min_eig_chi},
            {"min_eig_zeta", min_eig_zeta},
            {"jacobian_defect", jacobian_defect},
            {"jacobian_slope", jacobian_slope},
            {"tangentiality_defect", tangentiality_defect},
            {"sigma_block_defect", sigma_block_defect},
            {"ok", ok},
            {"offending", offending}};
}

namespace {

Mat6 fd_jacobian(const MaterialLaw& law, const Vec3& x, const Vec6& u, double h) {
    Mat6 J;
    for (int c = 0; c < 6; ++c) {
        Vec6 up = u, um = u;
        up(c) += h;
        um(c) -= h;
        J.col(c) = (law.theta(x, up) - law.theta(x, um)) / (2.0 * h);
    }
    return J;
}

std::string describe(const Vec3& x, const Vec6& u) {
    std::ostringstream os;
    os.precision(6);
    os << "x=(" << x.transpose() << ") u=(" << u.transpose() << ")";
    return os.str();
}

}  // namespace

LawValidation validate_material_law(const MaterialLaw& law, int sample_count, std::uint64_t seed,
                                    bool throw_on_failure) {
    if (sample_count < 1) throw Error(ErrorCode::law_invalid, "sample_count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    LawValidation v;
    v.samples = sample_count;
    v.min_eig_chi = std::numeric_limits<double>::infinity();
    v.min_eig_zeta = std::numeric_limits<double>::infinity();
    const double eta = law.eta();
    const Vec3 nu(0, 0, -1);
    double err_coarse = 0.0, err_fine = 0.0;

    auto fail = [&](const std::string& what, const std::string& where) {
        if (v.ok) v.offending = what + " at " + where;
        v.ok = false;
    };

    for (int s = 0; s < sample_count; ++s) {
        Vec3 x(uni(rng), uni(rng), uni(rng));
        Vec6 u = law.domain().sample(rng);
        Mat6 c = law.chi(x, u);
        double sym = (c - c.transpose()).cwiseAbs().maxCoeff();
        v.symmetry_defect = std::max(v.symmetry_defect, sym);
        double scale = 1.0 + c.cwiseAbs().maxCoeff();
        if (sym > 1e-12 * scale) fail("chi not symmetric", describe(x, u));
        double ev = Eigen::SelfAdjointEigenSolver<Mat6>(0.5 * (c + c.transpose())).eigenvalues().minCoeff();
        v.min_eig_chi = std::min(v.min_eig_chi, ev);
        if (ev < eta * (1.0 - 1e-12)) fail("chi below eta", describe(x, u));

        Mat6 j1 = fd_jacobian(law, x, u, 1e-2);
        Mat6 j2 = fd_jacobian(law, x, u, 1e-3);
        Mat6 j3 = fd_jacobian(law, x, u, 1e-5);
        err_coarse = std::max(err_coarse, (j1 - c).cwiseAbs().maxCoeff());
        err_fine = std::max(err_fine, (j2 - c).cwiseAbs().maxCoeff());
        double jd = (j3 - c).cwiseAbs().maxCoeff();
        v.jacobian_defect = std::max(v.jacobian_defect, jd);
        if (jd > 1e-6 * scale) fail("chi differs from the Jacobian of theta", describe(x, u));

        Mat6 sg = law.sigma(x, u);
        double blk = sg.block<3, 3>(3, 3).cwiseAbs().maxCoeff();
        blk = std::max(blk, sg.block<3, 3>(0, 3).cwiseAbs().maxCoeff());
        blk = std::max(blk, sg.block<3, 3>(3, 0).cwiseAbs().maxCoeff());
        v.sigma_block_defect = std::max(v.sigma_block_defect, blk);
        if (blk != 0.0) fail("sigma acts outside the E block", describe(x, u));

        Vec3 xb(x(0), x(1), 0.0);
        Vec3 xi = trace_t(Vec3(u.head<3>()), nu);
        if (!law.domain().trace_admissible(xi)) continue;
        Mat3 z = law.zeta(xb, xi);
        double zsym = (z - z.transpose()).cwiseAbs().maxCoeff();
        v.symmetry_defect = std::max(v.symmetry_defect, zsym);
        if (zsym > 1e-12 * (1.0 + z.cwiseAbs().maxCoeff())) fail("zeta not symmetric", describe(xb, u));
        double zev = Eigen::SelfAdjointEigenSolver<Mat3>(0.5 * (z + z.transpose())).eigenvalues().minCoeff();
        v.min_eig_zeta = std::min(v.min_eig_zeta, zev);
        if (zev < eta * (1.0 - 1e-12)) fail("zeta below eta", describe(xb, u));
        Mat3 P = Mat3::Identity() - nu * nu.transpose();
        double tang = (nu.transpose() * z * P).cwiseAbs().maxCoeff();
        v.tangentiality_defect = std::max(v.tangentiality_defect, tang);
        if (tang > 1e-12 * (1.0 + z.cwiseAbs().maxCoeff())) fail("zeta not tangential", describe(xb, u));
    }
    if (err_coarse > 0 && err_fine > 0) v.jacobian_slope = std::log10(err_coarse / err_fine);
    if (!v.ok && throw_on_failure)
        throw Error(ErrorCode::law_invalid, "law '" + law.name() + "' invalid: " + v.offending);
    return v;
}

}  // namespace qmax
