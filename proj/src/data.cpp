#include "qmax/data.hpp"

#include "params.hpp"
#include "qmax/operators.hpp"

#include <cmath>

namespace qmax {

using nlohmann::json;
using detail::ParamReader;

void ScenarioData::source(const Grid& g, double, Field& out) const { out = Field(g); }

void ScenarioData::boundary(const Grid& g, double, bool, FaceData& out) const {
    out.assign(g.face_size(), Vec3::Zero());
}

std::vector<Field> ScenarioData::source_jets(const Grid& g, double, int count) const {
    return std::vector<Field>(static_cast<std::size_t>(std::max(count, 0)), Field(g));
}

std::vector<FaceData> ScenarioData::boundary_jets(const Grid& g, double, int count, bool) const {
    return std::vector<FaceData>(static_cast<std::size_t>(std::max(count, 0)), FaceData(g.face_size(), Vec3::Zero()));
}

double bump(double r2) {
    if (r2 >= 1.0) return 0.0;
    double s = 1.0 - r2;
    return s * s * s * s * s;
}

namespace {

template <class S>
using V3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using V6 = Eigen::Matrix<S, 6, 1>;

// Space-time profile of a manufactured solution: value, time derivative and
// the three spatial derivatives at one point.
template <class S>
struct ProfileSample {
    V6<S> u, ut;
    V6<S> d[3];
};

template <class S>
V6<S> zero6() {
    V6<S> v;
    for (int i = 0; i < 6; ++i) v(i) = S(0.0);
    return v;
}

template <class S, class M, class V>
V6<S> mat_vec(const M& m, const V& v) {
    V6<S> r = zero6<S>();
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) r(i) += m(i, j) * v(j);
    return r;
}

template <class S, class A, class B>
V3<S> cross(const A& a, const B& b) {
    V3<S> r;
    r(0) = a(1) * b(2) - a(2) * b(1);
    r(1) = a(2) * b(0) - a(0) * b(2);
    r(2) = a(0) * b(1) - a(1) * b(0);
    return r;
}

Mat6 law_chi(const MaterialLaw& l, const Vec3& x, const Vec6& u) { return l.chi(x, u); }
Mat6T law_chi(const MaterialLaw& l, const Vec3& x, const Vec6T& u) { return l.chi(x, u); }
Mat6 law_sigma(const MaterialLaw& l, const Vec3& x, const Vec6& u) { return l.sigma(x, u); }
Mat6T law_sigma(const MaterialLaw& l, const Vec3& x, const Vec6T& u) { return l.sigma(x, u); }
Mat3 law_zeta(const MaterialLaw& l, const Vec3& x, const Vec3& xi) { return l.zeta(x, xi); }
Mat3T law_zeta(const MaterialLaw& l, const Vec3& x, const Vec3T& xi) { return l.zeta(x, xi); }

// f = chi(u) u_t + sum Aco_j d_j u + sigma(u) u
template <class S>
V6<S> pde_source(const MaterialLaw& law, const Vec3& x, const ProfileSample<S>& p) {
    static const ConstantMatrices cm = constant_matrices();
    V6<S> f = mat_vec<S>(law_chi(law, x, p.u), p.ut);
    for (int j = 0; j < 3; ++j) f += mat_vec<S>(cm.Aco[j], p.d[j]);
    f += mat_vec<S>(law_sigma(law, x, p.u), p.u);
    return f;
}

// g = tr_t H - nu x (zeta(tr_t E) tr_t E); the far face uses zeta = I.
template <class S>
V3<S> boundary_source(const MaterialLaw& law, const Vec3& x, const V6<S>& u, bool top) {
    const Vec3 nu = face_normal(top);
    V3<S> e = u.template head<3>(), h = u.template tail<3>();
    V3<S> s = cross<S>(e, nu);
    V3<S> bs;
    if (top) {
        bs = s;
    } else {
        auto z = law_zeta(law, x, s);
        for (int i = 0; i < 3; ++i) bs(i) = z(i, 0) * s(0) + z(i, 1) * s(1) + z(i, 2) * s(2);
    }
    return cross<S>(h, nu) - cross<S>(nu, bs);
}

template <class S>
std::vector<Vec6> derivs(const V6<S>& v, int count) {
    std::vector<Vec6> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        for (int i = 0; i < 6; ++i) out[std::size_t(k)](i) = v(i).derivative(k);
    return out;
}

// Common machinery for data given by an explicit solution u*(t, x).
template <class Derived>
class ManufacturedData : public ScenarioData {
public:
    explicit ManufacturedData(LawPtr law) : law_(std::move(law)) {}

    Field initial(const Grid& g, double t0) const override { return eval_u(g, t0); }
    bool has_source() const override { return true; }
    bool has_boundary_data() const override { return true; }

    void source(const Grid& g, double t, Field& out) const override {
        if (out.v.size() != g.size() || out.grid != g) out = Field(g);
        for (int k = 0; k < g.n3; ++k)
            for (int j = 0; j < g.n2; ++j)
                for (int i = 0; i < g.n1; ++i) {
                    Vec3 x = g.point(i, j, k);
                    auto p = self().template profile<double>(g, x, t);
                    out(i, j, k) = pde_source<double>(*law_, x, p);
                }
    }
    void boundary(const Grid& g, double t, bool top, FaceData& out) const override {
        out.assign(g.face_size(), Vec3::Zero());
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                Vec3 x = g.face_point(i, j, top);
                auto p = self().template profile<double>(g, x, t);
                out[g.face_index(i, j)] = boundary_source<double>(*law_, x, p.u, top);
            }
    }
    std::vector<Field> source_jets(const Grid& g, double t0, int count) const override {
        check_count(count);
        std::vector<Field> out(static_cast<std::size_t>(count), Field(g));
        for (int k = 0; k < g.n3; ++k)
            for (int j = 0; j < g.n2; ++j)
                for (int i = 0; i < g.n1; ++i) {
                    Vec3 x = g.point(i, j, k);
                    auto p = self().template profile<Taylor>(g, x, Taylor::variable(t0));
                    auto d = derivs<Taylor>(pde_source<Taylor>(*law_, x, p), count);
                    for (int c = 0; c < count; ++c) out[std::size_t(c)](i, j, k) = d[std::size_t(c)];
                }
        return out;
    }
    std::vector<FaceData> boundary_jets(const Grid& g, double t0, int count, bool top) const override {
        check_count(count);
        std::vector<FaceData> out(static_cast<std::size_t>(count), FaceData(g.face_size(), Vec3::Zero()));
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                Vec3 x = g.face_point(i, j, top);
                auto p = self().template profile<Taylor>(g, x, Taylor::variable(t0));
                V3<Taylor> b = boundary_source<Taylor>(*law_, x, p.u, top);
                for (int c = 0; c < count; ++c)
                    for (int q = 0; q < 3; ++q) out[std::size_t(c)][g.face_index(i, j)](q) = b(q).derivative(c);
            }
        return out;
    }
    std::optional<Field> exact(const Grid& g, double t) const override { return eval_u(g, t); }

protected:
    LawPtr law_;

private:
    const Derived& self() const { return static_cast<const Derived&>(*this); }
    static void check_count(int count) {
        if (count > Taylor::N)
            throw Error(ErrorCode::order_exceeds_derivative_data, "requested more data jets than available");
    }
    Field eval_u(const Grid& g, double t) const {
        Field out(g);
        for (int k = 0; k < g.n3; ++k)
            for (int j = 0; j < g.n2; ++j)
                for (int i = 0; i < g.n1; ++i)
                    out(i, j, k) = self().template profile<double>(g, g.point(i, j, k), t).u;
        return out;
    }
};

// u* = phi(t) P(x), phi(t) = sin(s) + a (1 - cos s), s = t - t_ref, with P
// trigonometric tangentially and affine (plus optional quadratic) in x3.
class Manufactured final : public ManufacturedData<Manufactured> {
public:
    Manufactured(LawPtr law, const json& params) : ManufacturedData(std::move(law)) {
        ParamReader r(params, "data 'manufactured'");
        amp_ = r.get("amplitude", 0.2);
        accel_ = r.get("accel", 0.5);
        slope_ = r.get("slope", 0.5);
        quad_ = r.get("quadratic", 0.0);
        t_ref_ = r.get("t_ref", 0.0);
        r.finish();
    }
    std::string name() const override { return "manufactured"; }
    bool analytic_compat() const override { return false; }
    json describe() const override {
        return {{"name", name()}, {"amplitude", amp_}, {"accel", accel_}, {"slope", slope_},
                {"quadratic", quad_}, {"t_ref", t_ref_}};
    }

    template <class S>
    ProfileSample<S> profile(const Grid& g, const Vec3& x, const S& t) const {
        static const double w[6] = {1.0, 0.8, 0.6, 0.9, 0.7, 0.5};
        const double k1 = 2 * M_PI / g.L1, k2 = 2 * M_PI / g.L2;
        using std::cos;
        using std::sin;
        S s = t - t_ref_;
        S phi = sin(s) + accel_ * (1.0 - cos(s));
        S dphi = cos(s) + accel_ * sin(s);
        const double z = 1.0 + slope_ * x(2) + quad_ * x(2) * x(2);
        const double dz = slope_ + 2.0 * quad_ * x(2);
        ProfileSample<S> p;
        for (int c = 0; c < 6; ++c) {
            double th = 0.7 * c, th2 = 0.3 + 1.1 * c;
            double tang = std::cos(k1 * x(0) + th) + 0.5 * std::sin(k2 * x(1) + th2);
            double t1 = -k1 * std::sin(k1 * x(0) + th);
            double t2 = 0.5 * k2 * std::cos(k2 * x(1) + th2);
            double P = amp_ * w[c] * tang * z;
            p.u(c) = phi * P;
            p.ut(c) = dphi * P;
            p.d[0](c) = phi * (amp_ * w[c] * t1 * z);
            p.d[1](c) = phi * (amp_ * w[c] * t2 * z);
            p.d[2](c) = phi * (amp_ * w[c] * tang * dz);
        }
        return p;
    }

private:
    double amp_, accel_, slope_, quad_, t_ref_;
};

// u* = V(t) (1 + slope x3) with V polynomial in t of the given degree.
class AffineExact final : public ManufacturedData<AffineExact> {
public:
    AffineExact(LawPtr law, const json& params) : ManufacturedData(std::move(law)) {
        ParamReader r(params, "data 'affine-exact'");
        amp_ = r.get("amplitude", 0.1);
        degree_ = r.get_int("degree", 1);
        slope_ = r.get("slope", 0.5);
        r.finish();
        if (degree_ < 0 || degree_ > 6)
            throw Error(ErrorCode::config_invalid, "data 'affine-exact': degree must be in [0,6]");
    }
    std::string name() const override { return "affine-exact"; }
    json describe() const override {
        return {{"name", name()}, {"amplitude", amp_}, {"degree", degree_}, {"slope", slope_}};
    }

    template <class S>
    ProfileSample<S> profile(const Grid&, const Vec3& x, const S& t) const {
        const double z = 1.0 + slope_ * x(2);
        ProfileSample<S> p;
        for (int c = 0; c < 6; ++c) {
            S v(0.0), dv(0.0), tp(1.0);
            for (int d = 0; d <= degree_; ++d) {
                double coef = amp_ * std::cos(1.3 * c + 0.9 * d);
                if (d > 0) dv += coef * d * tp;
                if (d > 0) tp = tp * t;
                v += coef * tp;
            }
            p.u(c) = v * z;
            p.ut(c) = dv * z;
            p.d[0](c) = S(0.0);
            p.d[1](c) = S(0.0);
            p.d[2](c) = v * slope_;
        }
        return p;
    }

private:
    double amp_;
    int degree_;
    double slope_;
};

class ZeroData final : public ScenarioData {
public:
    std::string name() const override { return "zero"; }
    Field initial(const Grid& g, double) const override { return Field(g); }
    json describe() const override { return {{"name", name()}}; }
};

// Plane wave along x1 for a linear law with sigma = 0 on a fully periodic grid.
class PlaneWave final : public ScenarioData {
public:
    PlaneWave(LawPtr law, const json& params) {
        ParamReader r(params, "data 'plane-wave'");
        amp_ = r.get("amplitude", 0.1);
        mode_ = r.get_int("mode", 1);
        r.finish();
        if (!law->is_linear())
            throw Error(ErrorCode::config_invalid, "data 'plane-wave' requires a state-independent law");
        Mat6 c = law->chi(Vec3(Vec3::Zero()), Vec6(Vec6::Zero()));
        Mat6 s = law->sigma(Vec3(Vec3::Zero()), Vec6(Vec6::Zero()));
        if (s.cwiseAbs().maxCoeff() != 0.0)
            throw Error(ErrorCode::config_invalid, "data 'plane-wave' requires sigma = 0");
        eps_ = c(1, 1);
        mu_ = c(5, 5);
    }
    std::string name() const override { return "plane-wave"; }
    Field initial(const Grid& g, double t0) const override { return *exact(g, t0); }
    std::optional<Field> exact(const Grid& g, double t) const override {
        if (!g.periodic3)
            throw Error(ErrorCode::config_invalid, "data 'plane-wave' requires grid.periodic_normal = true");
        const double k = 2 * M_PI * mode_ / g.L1, c = 1.0 / std::sqrt(eps_ * mu_);
        const double imp = std::sqrt(eps_ / mu_);
        return sample_field(g, [&](const Vec3& x) {
            double f = amp_ * std::sin(k * (x(0) - c * t));
            Vec6 u = Vec6::Zero();
            u(1) = f;
            u(5) = imp * f;
            return u;
        });
    }
    json describe() const override { return {{"name", name()}, {"amplitude", amp_}, {"mode", mode_}}; }

private:
    double amp_;
    int mode_;
    double eps_ = 1, mu_ = 1;
};

double periodic_offset(double x, double c, double L) {
    double d = x - c;
    d -= L * std::round(d / L);
    return d;
}

// Single pulse u0 = A phi(|x - c| / w) (e, h), where the distance only uses
// the coordinates flagged in `axes`.
class Pulse final : public ScenarioData {
public:
    explicit Pulse(const json& params) {
        ParamReader r(params, "data 'pulse'");
        amp_ = r.get("amplitude", 0.1);
        auto c = r.get_vec("center", {0.5, 0.5, 0.3}, 3);
        center_ = Vec3(c[0], c[1], c[2]);
        width_ = r.get("width", 0.25);
        auto e = r.get_vec("e", {0.0, 1.0, 0.0}, 3);
        auto h = r.get_vec("h", {0.0, 0.0, 1.0}, 3);
        e_ = Vec3(e[0], e[1], e[2]);
        h_ = Vec3(h[0], h[1], h[2]);
        auto ax = r.get_vec("axes", {1.0, 1.0, 1.0}, 3);
        for (int a = 0; a < 3; ++a) axes_[a] = ax[std::size_t(a)] != 0.0;
        div_free_ = r.get_bool("div_free", false);
        r.finish();
        if (!(width_ > 0)) throw Error(ErrorCode::config_invalid, "data 'pulse': width must be positive");
    }
    std::string name() const override { return "pulse"; }
    Field initial(const Grid& g, double) const override {
        return sample_field(g, [&](const Vec3& x) {
            double d1 = axes_[0] ? periodic_offset(x(0), center_(0), g.L1) : 0.0;
            double d2 = axes_[1] ? periodic_offset(x(1), center_(1), g.L2) : 0.0;
            double d3 = axes_[2] ? x(2) - center_(2) : 0.0;
            double r2 = (d1 * d1 + d2 * d2 + d3 * d3) / (width_ * width_);
            if (div_free_) {
                // (E, H) = w curl(phi e, phi h) = w grad(phi) x (e, h)
                if (r2 >= 1.0) return Vec6(Vec6::Zero());
                double s = 1.0 - r2;
                Vec3 grad = -10.0 * s * s * s * s / width_ * Vec3(d1, d2, d3);
                return stack(amp_ * grad.cross(e_), amp_ * grad.cross(h_));
            }
            double phi = amp_ * bump(r2);
            return stack(phi * e_, phi * h_);
        });
    }
    json describe() const override {
        return {{"name", name()}, {"amplitude", amp_}, {"center", {center_(0), center_(1), center_(2)}},
                {"width", width_}, {"axes", {int(axes_[0]), int(axes_[1]), int(axes_[2])}}, {"div_free", div_free_}};
    }

private:
    double amp_, width_;
    Vec3 center_, e_, h_;
    bool axes_[3] = {true, true, true};
    bool div_free_;
};

// Two x2-independent pulses travelling towards each other along x1, localized
// in x3 away from both faces.
class CollidingPulses final : public ScenarioData {
public:
    explicit CollidingPulses(const json& params) {
        ParamReader r(params, "data 'colliding-pulses'");
        amp_ = r.get("amplitude", 0.01);
        width_ = r.get("width", 0.15);
        auto c = r.get_vec("centers", {0.25, 0.75}, 2);
        c1_ = c[0];
        c2_ = c[1];
        z0_ = r.get("x3_center", 0.5);
        zw_ = r.get("x3_width", 0.3);
        r.finish();
        if (!(width_ > 0 && zw_ > 0))
            throw Error(ErrorCode::config_invalid, "data 'colliding-pulses': widths must be positive");
    }
    std::string name() const override { return "colliding-pulses"; }
    Field initial(const Grid& g, double) const override {
        return sample_field(g, [&](const Vec3& x) {
            double dz = (x(2) - z0_) / zw_;
            double psi = bump(dz * dz);
            double a = periodic_offset(x(0), c1_, g.L1) / width_;
            double b = periodic_offset(x(0), c2_, g.L1) / width_;
            double pa = amp_ * bump(a * a) * psi, pb = amp_ * bump(b * b) * psi;
            Vec6 u = Vec6::Zero();
            u(1) = pa + pb;   // E along e2
            u(5) = pa - pb;   // H = +e3 for the right-moving, -e3 for the left-moving pulse
            return u;
        });
    }
    json describe() const override {
        return {{"name", name()}, {"amplitude", amp_}, {"width", width_}, {"centers", {c1_, c2_}},
                {"x3_center", z0_}, {"x3_width", zw_}};
    }

private:
    double amp_, width_, c1_, c2_, z0_, zw_;
};

// u0 = 0, f = 0, g = A sin^3(omega (t - t_ref)) (cos k1 x1, sin k2 x2, 0) on x3 = 0.
class BoundaryForcing final : public ScenarioData {
public:
    explicit BoundaryForcing(const json& params) {
        ParamReader r(params, "data 'boundary-forcing'");
        amp_ = r.get("amplitude", 0.1);
        omega_ = r.get("omega", 4.0);
        t_ref_ = r.get("t_ref", 0.0);
        r.finish();
    }
    std::string name() const override { return "boundary-forcing"; }
    Field initial(const Grid& g, double) const override { return Field(g); }
    bool has_boundary_data() const override { return true; }
    void boundary(const Grid& g, double t, bool top, FaceData& out) const override {
        out.assign(g.face_size(), Vec3::Zero());
        if (top) return;
        double s = std::sin(omega_ * (t - t_ref_));
        fill(g, amp_ * s * s * s, out);
    }
    std::vector<FaceData> boundary_jets(const Grid& g, double t0, int count, bool top) const override {
        std::vector<FaceData> out(static_cast<std::size_t>(count), FaceData(g.face_size(), Vec3::Zero()));
        if (top) return out;
        Taylor s = sin(omega_ * (Taylor::variable(t0) - t_ref_));
        Taylor w = amp_ * s * s * s;
        for (int c = 0; c < count; ++c) fill(g, w.derivative(c), out[std::size_t(c)]);
        return out;
    }
    json describe() const override {
        return {{"name", name()}, {"amplitude", amp_}, {"omega", omega_}, {"t_ref", t_ref_}};
    }

private:
    void fill(const Grid& g, double w, FaceData& out) const {
        const double k1 = 2 * M_PI / g.L1, k2 = 2 * M_PI / g.L2;
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                Vec3 x = g.face_point(i, j, false);
                out[g.face_index(i, j)] = w * Vec3(std::cos(k1 * x(0)), std::sin(k2 * x(1)), 0.0);
            }
    }
    double amp_, omega_, t_ref_;
};

class ScaledData final : public ScenarioData {
public:
    ScaledData(DataPtr base, double s) : base_(std::move(base)), s_(s) {}
    std::string name() const override { return base_->name(); }
    Field initial(const Grid& g, double t0) const override { return s_ * base_->initial(g, t0); }
    bool has_source() const override { return base_->has_source(); }
    void source(const Grid& g, double t, Field& out) const override {
        base_->source(g, t, out);
        for (auto& x : out.v) x *= s_;
    }
    bool has_boundary_data() const override { return base_->has_boundary_data(); }
    void boundary(const Grid& g, double t, bool top, FaceData& out) const override {
        base_->boundary(g, t, top, out);
        for (auto& x : out) x *= s_;
    }
    std::vector<Field> source_jets(const Grid& g, double t0, int count) const override {
        auto j = base_->source_jets(g, t0, count);
        for (auto& f : j)
            for (auto& x : f.v) x *= s_;
        return j;
    }
    std::vector<FaceData> boundary_jets(const Grid& g, double t0, int count, bool top) const override {
        auto j = base_->boundary_jets(g, t0, count, top);
        for (auto& f : j)
            for (auto& x : f) x *= s_;
        return j;
    }
    bool analytic_compat() const override { return base_->analytic_compat(); }
    json describe() const override {
        json d = base_->describe();
        d["scale"] = s_;
        return d;
    }

private:
    DataPtr base_;
    double s_;
};

}  // namespace

std::vector<std::string> data_names() {
    return {"zero", "plane-wave", "pulse", "colliding-pulses", "manufactured", "affine-exact", "boundary-forcing"};
}

DataPtr make_data(const std::string& name, const json& params, LawPtr law) {
    const json p = params.is_null() ? json::object() : params;
    if (name == "zero") {
        ParamReader(p, "data 'zero'").finish();
        return std::make_shared<ZeroData>();
    }
    if (name == "plane-wave") return std::make_shared<PlaneWave>(law, p);
    if (name == "pulse") return std::make_shared<Pulse>(p);
    if (name == "colliding-pulses") return std::make_shared<CollidingPulses>(p);
    if (name == "manufactured") return std::make_shared<Manufactured>(law, p);
    if (name == "affine-exact") return std::make_shared<AffineExact>(law, p);
    if (name == "boundary-forcing") return std::make_shared<BoundaryForcing>(p);
    throw Error(ErrorCode::config_invalid, "unknown data generator '" + name + "' (key 'data.name')");
}

DataPtr scale_data(DataPtr base, double s) { return std::make_shared<ScaledData>(std::move(base), s); }

}  // namespace qmax
