#include "qmax/localization.hpp"

#include "qmax/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace qmax {

namespace {

// 1 for s <= 0, 0 for s >= 1, C-infinity in between.
template <class S>
S smooth_step(const S& s) {
    using std::exp;
    if (value_of(s) <= 0.0) return S(1.0);
    if (value_of(s) >= 1.0) return S(0.0);
    S a = exp(-1.0 / s);
    S b = exp(-1.0 / (1.0 - s));
    return b / (a + b);
}

template <class V>
typename V::Scalar cutoff_value(const Cutoff& c, const V& p) {
    using S = typename V::Scalar;
    S r2(0.0);
    for (int k = 0; k < 3; ++k) {
        S d = p(k) - c.center(k);
        r2 = r2 + d * d;
    }
    const double a = c.r_in * c.r_in, b = c.r_out * c.r_out;
    return smooth_step<S>((r2 - a) / (b - a));
}

Mat6 block_diag(const Mat3& m) {
    Mat6 r = Mat6::Zero();
    r.block<3, 3>(0, 0) = m;
    r.block<3, 3>(3, 3) = m;
    return r;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double min_eig(const Mat3& m) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}
double min_eig(const Mat6& m) {
    Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}
double max_eig(const Mat3& m) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(2);
}

// beta and the unscaled third row (p, q, -beta) of R-hat, for double or Taylor y.
template <class S>
struct Frame {
    S omega, beta, p, q;
};

template <class V, class M>
Frame<typename V::Scalar> frame_of(const Chart& c, const V& y, const M& jac, double s0, bool printed) {
    using S = typename V::Scalar;
    Frame<S> f;
    f.omega = cutoff_value(c.omega, y);
    f.beta = f.omega * jac(2, 2) + (1.0 - f.omega) * s0;
    const double sg = printed ? 1.0 : -1.0;
    f.p = sg * f.omega * jac(2, 0);
    f.q = sg * f.omega * jac(2, 1);
    return f;
}

template <class S>
Eigen::Matrix<S, 3, 3> rhat_of(const Frame<S>& f) {
    using std::sqrt;
    S s = 1.0 / sqrt(f.beta);
    Eigen::Matrix<S, 3, 3> r;
    r << s, S(0.0), S(0.0), S(0.0), s, S(0.0), f.p * s, f.q * s, -f.beta * s;
    return r;
}

// (R-hat^T)^{-1}
template <class S>
Eigen::Matrix<S, 3, 3> rhat_inv_t_of(const Frame<S>& f) {
    using std::sqrt;
    S s = sqrt(f.beta);
    Eigen::Matrix<S, 3, 3> r;
    // R-hat^{-1} = sqrt(beta) [[1,0,0],[0,1,0],[p/beta, q/beta, -1/beta]]
    r << s, S(0.0), f.p / f.beta * s, S(0.0), s, f.q / f.beta * s, S(0.0), S(0.0), -s / f.beta;
    return r;
}

// d/dy_j of (R-hat^T)^{-1} by forward-mode jets through phi^{-1}.
Mat3 d_rhat_inv_t(const Chart& c, const Vec3& y, int j, double s0, bool printed) {
    Vec3T yt;
    for (int k = 0; k < 3; ++k) yt(k) = Taylor(y(k));
    yt(j) = Taylor::variable(y(j));
    Vec3T xt = c.phi_inv(yt);
    Mat3T jt = c.jacobian(xt);
    Mat3T m = rhat_inv_t_of(frame_of(c, yt, jt, s0, printed));
    Mat3 d;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) d(a, b) = m(a, b).c[1];
    return d;
}

Mat36 boundary_b1(const Mat3& b0) {
    Mat36 m = Mat36::Zero();
    m.block<3, 3>(0, 0) = b0;
    return m;
}
Mat36 boundary_b2(const Mat3& b0) {
    Mat36 m = Mat36::Zero();
    m.block<3, 3>(0, 3) = b0;
    return m;
}

double num(const nlohmann::json& p, const char* key, double def) {
    if (!p.contains(key)) return def;
    if (!p.at(key).is_number()) throw Error(ErrorCode::config_invalid, std::string("chart parameter '") + key + "' must be a number");
    return p.at(key).get<double>();
}

void check_keys(const nlohmann::json& p, const std::string& chart, std::set<std::string> allowed) {
    if (!p.is_object()) throw Error(ErrorCode::config_invalid, "chart parameters must be an object");
    allowed.insert("tau");
    for (auto it = p.begin(); it != p.end(); ++it)
        if (!allowed.count(it.key()))
            throw Error(ErrorCode::config_invalid, "unknown parameter '" + it.key() + "' for chart '" + chart + "'");
}

class IdentityChart final : public Chart {
public:
    std::string name() const override { return "identity"; }
    Vec3 phi(const Vec3& x) const override { return x; }
    Vec3 phi_inv(const Vec3& y) const override { return y; }
    Vec3T phi_inv(const Vec3T& y) const override { return y; }
    Mat3 jacobian(const Vec3&) const override { return Mat3::Identity(); }
    Mat3T jacobian(const Vec3T&) const override { return Mat3::Identity().cast<Taylor>(); }
    nlohmann::json params() const override { return {{"tau", tau}}; }
};

class ScaledChart final : public Chart {
public:
    explicit ScaledChart(double s) : s_(s) {}
    std::string name() const override { return "scaled"; }
    Vec3 phi(const Vec3& x) const override { return {x(0), x(1), s_ * x(2)}; }
    Vec3 phi_inv(const Vec3& y) const override { return {y(0), y(1), y(2) / s_}; }
    Vec3T phi_inv(const Vec3T& y) const override { return Vec3T(y(0), y(1), y(2) / s_); }
    Mat3 jacobian(const Vec3&) const override { return Vec3(1.0, 1.0, s_).asDiagonal(); }
    Mat3T jacobian(const Vec3T& x) const override { return jacobian(Vec3(value_of(x(0)), 0, 0)).cast<Taylor>(); }
    nlohmann::json params() const override { return {{"scale", s_}, {"tau", tau}}; }

private:
    double s_;
};

// Flat boundary with unit normal n; phi(x) = Q x, third row of Q equal to n.
class TiltedChart final : public Chart {
public:
    TiltedChart(double tilt, double azimuth) : tilt_(tilt), az_(azimuth) {
        Vec3 n(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
        Vec3 e = std::abs(n(0)) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        Vec3 q1 = (e - e.dot(n) * n).normalized();
        Vec3 q2 = n.cross(q1);
        q_.row(0) = q1.transpose();
        q_.row(1) = q2.transpose();
        q_.row(2) = n.transpose();
    }
    std::string name() const override { return "tilted"; }
    Vec3 phi(const Vec3& x) const override { return q_ * x; }
    Vec3 phi_inv(const Vec3& y) const override { return q_.transpose() * y; }
    Vec3T phi_inv(const Vec3T& y) const override {
        Vec3T x;
        for (int a = 0; a < 3; ++a) x(a) = q_(0, a) * y(0) + q_(1, a) * y(1) + q_(2, a) * y(2);
        return x;
    }
    Mat3 jacobian(const Vec3&) const override { return q_; }
    Mat3T jacobian(const Vec3T&) const override { return q_.cast<Taylor>(); }
    nlohmann::json params() const override { return {{"tilt", tilt_}, {"azimuth", az_}, {"tau", tau}}; }

private:
    double tilt_, az_;
    Mat3 q_;
};

// Sigma is the upper hemisphere |x| = r, x3 > 0; G is the region above it.
class HemisphereChart final : public Chart {
public:
    explicit HemisphereChart(double r) : r_(r) {}
    std::string name() const override { return "hemisphere"; }
    Vec3 phi(const Vec3& x) const override { return {x(0), x(1), x(2) - std::sqrt(r_ * r_ - x(0) * x(0) - x(1) * x(1))}; }
    Vec3 phi_inv(const Vec3& y) const override { return {y(0), y(1), y(2) + std::sqrt(r_ * r_ - y(0) * y(0) - y(1) * y(1))}; }
    Vec3T phi_inv(const Vec3T& y) const override {
        return Vec3T(y(0), y(1), y(2) + sqrt(r_ * r_ - y(0) * y(0) - y(1) * y(1)));
    }
    Mat3 jacobian(const Vec3& x) const override { return jac<Vec3>(x); }
    Mat3T jacobian(const Vec3T& x) const override { return jac<Vec3T>(x); }
    nlohmann::json params() const override { return {{"sphere_radius", r_}, {"tau", tau}}; }

private:
    template <class V>
    Eigen::Matrix<typename V::Scalar, 3, 3> jac(const V& x) const {
        using S = typename V::Scalar;
        using std::sqrt;
        S w = sqrt(r_ * r_ - x(0) * x(0) - x(1) * x(1));
        Eigen::Matrix<S, 3, 3> m;
        m << S(1.0), S(0.0), S(0.0), S(0.0), S(1.0), S(0.0), x(0) / w, x(1) / w, S(1.0);
        return m;
    }
    double r_;
};

void validate_chart(const Chart& c) {
    const double s0 = c.anchor_sign();
    if (!(s0 > 0.0))
        throw Error(ErrorCode::degenerate_chart, "chart '" + c.name() + "': d3 phi_3 <= 0 at the anchor");
    auto pts = c.boundary_samples(0, 0);
    auto inner = c.interior_samples(0, 0);
    pts.insert(pts.end(), inner.begin(), inner.end());
    for (const Vec3& y : pts) {
        Vec3 x = c.phi_inv(y);
        Mat3 j = c.jacobian(x);
        Frame<double> f = frame_of(c, y, j, s0, false);
        const double kappa = j.row(2).norm();
        std::ostringstream where;
        where << "chart '" << c.name() << "' at y=(" << y(0) << "," << y(1) << "," << y(2) << "): ";
        if (!x.allFinite() || !j.allFinite())
            throw Error(ErrorCode::degenerate_chart, where.str() + "phi^{-1} undefined");
        if (!(kappa > 0.0)) throw Error(ErrorCode::degenerate_chart, where.str() + "kappa = 0");
        if (!(f.beta >= c.tau))
            throw Error(ErrorCode::degenerate_chart, where.str() + "beta=" + std::to_string(f.beta) + " < tau");
        if (!(std::abs(j.determinant()) > 0.0))
            throw Error(ErrorCode::degenerate_chart, where.str() + "singular Jacobian");
    }
}

}  // namespace

double Cutoff::value(const Vec3& p) const { return cutoff_value(*this, p); }
Taylor Cutoff::value(const Vec3T& p) const { return cutoff_value(*this, p); }
Vec3 Cutoff::gradient(const Vec3& p) const {
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
        Vec3T pt = p.cast<Taylor>();
        pt(k) = Taylor::variable(p(k));
        g(k) = cutoff_value(*this, pt).c[1];
    }
    return g;
}

double Chart::anchor_sign() const {
    Mat3 j = jacobian(phi_inv(anchor));
    return j(2, 2) >= 0.0 ? 1.0 : -1.0;
}

std::vector<Vec3> Chart::boundary_samples(int random_count, std::uint64_t seed) const {
    std::vector<Vec3> out;
    const double rmax = 0.93 * radius;
    out.push_back(anchor);
    for (int ir = 1; ir <= 13; ++ir) {
        const double r = rmax * ir / 13.0;
        for (int ia = 0; ia < 12; ++ia) {
            const double a = 2.0 * M_PI * (ia + 0.5 * (ir % 2)) / 12.0;
            out.push_back(anchor + Vec3(r * std::cos(a), r * std::sin(a), 0.0));
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (random_count > 0) {
        Vec3 d(u(rng) * rmax, u(rng) * rmax, 0.0);
        if (d.norm() > rmax) continue;
        out.push_back(anchor + d);
        --random_count;
    }
    return out;
}

std::vector<Vec3> Chart::interior_samples(int random_count, std::uint64_t seed) const {
    std::vector<Vec3> out;
    const double rmax = 0.93 * radius;
    for (double h : {0.02, 0.15, 0.35, 0.55}) {
        out.push_back(anchor + Vec3(0.0, 0.0, h * radius));
        for (int ir = 1; ir <= 4; ++ir) {
            const double r = std::sqrt(std::max(0.0, rmax * rmax - h * h * radius * radius)) * ir / 4.0;
            for (int ia = 0; ia < 8; ++ia) {
                const double a = 2.0 * M_PI * ia / 8.0;
                out.push_back(anchor + Vec3(r * std::cos(a), r * std::sin(a), h * radius));
            }
        }
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (random_count > 0) {
        Vec3 d(u(rng) * rmax, u(rng) * rmax, std::abs(u(rng)) * rmax);
        if (d.norm() > rmax || d(2) <= 0.0) continue;
        out.push_back(anchor + d);
        --random_count;
    }
    return out;
}

ChartPtr build_chart(const std::string& name, const nlohmann::json& params) {
    std::shared_ptr<Chart> c;
    if (name == "identity") {
        check_keys(params, name, {});
        c = std::make_shared<IdentityChart>();
    } else if (name == "scaled") {
        check_keys(params, name, {"scale"});
        c = std::make_shared<ScaledChart>(num(params, "scale", 2.0));
    } else if (name == "tilted") {
        check_keys(params, name, {"tilt", "azimuth"});
        c = std::make_shared<TiltedChart>(num(params, "tilt", 0.5), num(params, "azimuth", 0.3));
    } else if (name == "hemisphere") {
        check_keys(params, name, {"sphere_radius"});
        c = std::make_shared<HemisphereChart>(num(params, "sphere_radius", 1.0));
    } else {
        throw Error(ErrorCode::config_invalid, "unknown chart '" + name + "'");
    }
    c->tau = num(params, "tau", 0.1);
    if (!(c->tau > 0.0)) throw Error(ErrorCode::config_invalid, "chart parameter 'tau' must be positive");
    validate_chart(*c);
    return c;
}

std::vector<std::string> chart_names() { return {"identity", "scaled", "tilted", "hemisphere"}; }

ChartPoint chart_point(const Chart& c, const Vec3& y, const LocalizationOptions& o) {
    ChartPoint p;
    p.y = y;
    p.x = c.phi_inv(y);
    p.jac = c.jacobian(p.x);
    Frame<double> f = frame_of(c, y, p.jac, c.anchor_sign(), o.printed_sign);
    p.omega = f.omega;
    p.omega_tilde = c.omega_tilde.value(y);
    p.beta = f.beta;
    p.Rhat = rhat_of(f);
    p.R = block_diag(p.Rhat);
    return p;
}

InteriorCoefficients transform_coeffs(const Chart& c, const Vec3& y, const MatField6& A0, const MatField6& D,
                                      const LocalizationOptions& o) {
    static const ConstantMatrices cm = constant_matrices();
    const ChartPoint p = chart_point(c, y, o);
    const double s0 = c.anchor_sign(), w = p.omega;
    InteriorCoefficients out;

    out.A0 = p.R * (w * A0(p.x) + (1.0 - w) * o.eta * Mat6::Identity()) * p.R.transpose();

    auto mapped = [&](int j) {
        Mat6 m = (1.0 - w) * s0 * cm.Aco[2];
        for (int k = 0; k < 3; ++k) m += w * p.jac(j, k) * cm.Aco[k];
        return Mat6(p.R * m * p.R.transpose());
    };
    out.A1 = mapped(0);
    out.A2 = mapped(1);
    out.A3 = cm.Aco[2];
    out.a3_defect = max_abs(mapped(2) - cm.Aco[2]);

    Eigen::Matrix<double, 36, 3> basis;
    for (int k = 0; k < 3; ++k) basis.col(k) = Eigen::Map<const Eigen::Matrix<double, 36, 1>>(cm.Aco[k].data());
    auto qr = basis.colPivHouseholderQr();
    auto decompose = [&](const Mat6& a, Vec3& mu) {
        Eigen::Matrix<double, 36, 1> v = Eigen::Map<const Eigen::Matrix<double, 36, 1>>(a.data());
        mu = qr.solve(v);
        return (basis * mu - v).cwiseAbs().maxCoeff();
    };
    out.mu_residual = std::max(decompose(out.A1, out.mu1), decompose(out.A2, out.mu2));

    const std::array<const Mat6*, 3> aj{&out.A1, &out.A2, &out.A3};
    out.D = w * p.R * D(p.x) * p.R.transpose();
    for (int j = 0; j < 3; ++j) {
        Mat6 dr = block_diag(d_rhat_inv_t(c, y, j, s0, o.printed_sign));
        out.D -= *aj[std::size_t(j)] * dr * p.R.transpose();
    }

    out.symmetry_defect = std::max({max_abs(out.A0 - out.A0.transpose()), max_abs(out.A1 - out.A1.transpose()),
                                     max_abs(out.A2 - out.A2.transpose())});
    out.min_eig_a0 = min_eig(out.A0);
    out.congruence_bound = o.eta * min_eig(Mat6(p.R * p.R.transpose()));
    return out;
}

BoundaryCoefficients transform_boundary(const Chart& c, const Vec3& y, const MatField3& b,
                                        const LocalizationOptions& o, double tolerance) {
    static const ConstantMatrices cm = constant_matrices();
    if (std::abs(y(2)) > 1e-14) throw Error(ErrorCode::domain_violation, "boundary sample needs y3 = 0");
    const ChartPoint p = chart_point(c, y, o);
    const double s0 = c.anchor_sign(), w = p.omega, wt = p.omega_tilde;
    BoundaryCoefficients out;

    const Vec3 grad3 = p.jac.row(2).transpose();
    out.kappa = grad3.norm();
    out.nu = -grad3 / out.kappa;
    const Mat3 b0 = -cross_matrix(out.nu);  // v x nu
    const Mat36 b1 = boundary_b1(b0), b2 = boundary_b2(b0);
    const Mat3 bx = b(p.x);
    const Mat36 B = b2 + b0 * bx * b1;

    out.b_tilde = wt / out.kappa * bx + (1.0 - wt) * o.eta * Mat3::Identity();
    const Mat36 C = cm.B0co * out.b_tilde * (out.kappa * b1) + out.kappa * b0 * out.b_tilde * cm.B1co;
    Mat6 omega_m = Mat6::Identity();
    omega_m.block<3, 3>(0, 0) *= w;

    const Mat36 inner = w * out.kappa * B * omega_m + (1.0 - w) * s0 * cm.B2co + w * (1.0 - w) * s0 * C +
                        (1.0 - w) * (1.0 - w) * cm.B0co * out.b_tilde * cm.B1co;
    out.B_long = p.Rhat * inner * p.R.transpose();

    const Mat3 rinv = p.Rhat.inverse();
    out.b_i = rinv.transpose() * out.b_tilde * rinv;
    out.B_identity = cm.B2co + cm.B0co * out.b_i * cm.B1co;
    out.residual = max_abs(out.B_long - out.B_identity);

    out.reconstruction_residual = w >= 1.0 ? max_abs(out.B_identity - p.Rhat * (out.kappa * B) * p.R.transpose())
                                           : std::numeric_limits<double>::quiet_NaN();
    out.b0co_residual =
        max_abs(p.Rhat * (w * out.kappa * b0 + (1.0 - w) * s0 * cm.B0co) * p.Rhat.transpose() - cm.B0co);
    out.min_eig_b_i = min_eig(out.b_i);
    out.eta_bound = min_eig(out.b_tilde) / max_eig(Mat3(p.Rhat * p.Rhat.transpose()));

    if (tolerance > 0.0 && !(out.residual <= tolerance)) {
        std::ostringstream m;
        m << "boundary identity residual " << out.residual << " at y=(" << y(0) << "," << y(1) << ") on chart '"
          << c.name() << "'";
        throw Error(ErrorCode::identity_violation, m.str());
    }
    return out;
}

Partition chart_partition(const ChartPtr& c) {
    return {[c](const Vec3& x) { return c->theta_x(x); }, [c](const Vec3& x) { return c->theta_x_gradient(x); }};
}

Vec6 transform_initial(const Chart& c, const Vec3& y, const VecField6& v0, const Partition& p,
                       const LocalizationOptions& o) {
    const ChartPoint cp = chart_point(c, y, o);
    const Mat3 rit = cp.Rhat.inverse().transpose();
    return block_diag(rit) * (p.value(cp.x) * v0(cp.x));
}

Vec3 transform_boundary_data(const Chart& c, const Vec3& y, const VecField3& g, const Partition& p,
                             const LocalizationOptions& o) {
    const ChartPoint cp = chart_point(c, y, o);
    const double kappa = cp.jac.row(2).norm();
    return cp.Rhat * (p.value(cp.x) * kappa * g(cp.x));
}

Vec6 transform_source(const Chart& c, const Vec3& y, const VecField6& h, const VecField6& v, const Partition& p,
                      const LocalizationOptions& o) {
    static const ConstantMatrices cm = constant_matrices();
    const ChartPoint cp = chart_point(c, y, o);
    const Vec3 dtheta = p.gradient(cp.x);
    Vec6 s = p.value(cp.x) * h(cp.x);
    const Vec6 vx = v(cp.x);
    for (int k = 0; k < 3; ++k) s += dtheta(k) * (cm.Aco[k] * vx);
    return cp.R * s;
}

nlohmann::json ChartVerification::to_json() const {
    return {{"chart", chart},
            {"params", params},
            {"boundary_samples", boundary_samples},
            {"interior_samples", interior_samples},
            {"identity_residual", identity_residual},
            {"reconstruction_residual", reconstruction_residual},
            {"b0co_residual", b0co_residual},
            {"a3_defect", a3_defect},
            {"mu_residual", mu_residual},
            {"symmetry_defect", symmetry_defect},
            {"congruence_margin", congruence_margin},
            {"eta_prime_a0", eta_prime_a0},
            {"eta_prime_b", eta_prime_b},
            {"b_margin", b_margin},
            {"beta_min", beta_min},
            {"kappa_min", kappa_min},
            {"d_max", d_max},
            {"pass", pass}};
}

ChartVerification verify_chart(const Chart& c, const VerifyOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    auto rand6 = [&] {
        Mat6 m;
        for (int i = 0; i < 36; ++i) m.data()[i] = nd(rng);
        return m;
    };
    auto rand3 = [&] {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.data()[i] = nd(rng);
        return m;
    };
    const Mat6 n0 = rand6(), n1 = rand6(), n2 = rand6(), d0 = rand6(), d1 = rand6();
    const Mat3 m0 = rand3(), m1 = rand3(), m2 = rand3();
    const double eta = o.loc.eta;

    MatField6 A0 = [&](const Vec3& x) {
        Mat6 n = n0 + x(0) * n1 + std::sin(x(1) + x(2)) * n2;
        return Mat6(eta * Mat6::Identity() + n * n.transpose());
    };
    MatField6 D = [&](const Vec3& x) { return Mat6(d0 + std::cos(x(0) - x(2)) * d1); };
    // Symmetric, >= eta I, acting on tangential vectors only beyond the eta part.
    MatField3 b = [&](const Vec3& x) {
        Vec3 nu = c.jacobian(x).row(2).transpose().normalized();
        Mat3 proj = Mat3::Identity() - nu * nu.transpose();
        Mat3 m = m0 + x(1) * m1 + std::sin(x(0)) * m2;
        return Mat3(eta * Mat3::Identity() + proj * m * m.transpose() * proj);
    };

    ChartVerification v;
    v.chart = c.name();
    v.params = c.params();
    const double inf = std::numeric_limits<double>::infinity();
    v.beta_min = v.kappa_min = v.congruence_margin = v.eta_prime_a0 = v.eta_prime_b = v.b_margin = inf;

    auto bnd = c.boundary_samples(o.random_boundary, o.seed);
    auto inner = c.interior_samples(o.random_interior, o.seed);
    v.boundary_samples = int(bnd.size());
    v.interior_samples = int(inner.size());

    std::vector<Vec3> all = bnd;
    all.insert(all.end(), inner.begin(), inner.end());
    bool finite = true;
    for (const Vec3& y : all) {
        InteriorCoefficients ic = transform_coeffs(c, y, A0, D, o.loc);
        v.a3_defect = std::max(v.a3_defect, ic.a3_defect);
        v.mu_residual = std::max(v.mu_residual, ic.mu_residual);
        v.symmetry_defect = std::max(v.symmetry_defect, ic.symmetry_defect);
        v.congruence_margin = std::min(v.congruence_margin, ic.min_eig_a0 - ic.congruence_bound);
        v.eta_prime_a0 = std::min(v.eta_prime_a0, ic.min_eig_a0);
        finite = finite && ic.D.allFinite();
        if (finite) v.d_max = std::max(v.d_max, max_abs(ic.D));
        ChartPoint p = chart_point(c, y, o.loc);
        v.beta_min = std::min(v.beta_min, p.beta);
        v.kappa_min = std::min(v.kappa_min, p.jac.row(2).norm());
    }
    for (const Vec3& y : bnd) {
        BoundaryCoefficients bc = transform_boundary(c, y, b, o.loc, 0.0);
        v.identity_residual = std::max(v.identity_residual, bc.residual);
        if (!std::isnan(bc.reconstruction_residual))
            v.reconstruction_residual = std::max(v.reconstruction_residual, bc.reconstruction_residual);
        v.b0co_residual = std::max(v.b0co_residual, bc.b0co_residual);
        v.eta_prime_b = std::min(v.eta_prime_b, bc.min_eig_b_i);
        v.b_margin = std::min(v.b_margin, bc.min_eig_b_i - bc.eta_bound);
    }
    if (!finite) v.d_max = std::numeric_limits<double>::quiet_NaN();

    const double tol = o.tolerance;
    v.pass = v.identity_residual <= tol && v.reconstruction_residual <= tol && v.b0co_residual <= tol &&
             v.a3_defect <= tol && v.mu_residual <= 1e-12 && v.symmetry_defect <= 1e-13 &&
             v.congruence_margin >= -1e-12 && v.b_margin >= -1e-12 && v.beta_min >= c.tau && v.kappa_min > 0.0 &&
             finite;
    return v;
}

}  // namespace qmax
