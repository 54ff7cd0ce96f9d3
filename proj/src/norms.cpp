#include "qmax/norms.hpp"

#include "qmax/operators.hpp"

#include <algorithm>
#include <cmath>

namespace qmax {

std::vector<std::array<int, 3>> multi_indices(int k, bool tangential_only) {
    std::vector<std::array<int, 3>> out;
    for (int order = 0; order <= k; ++order)
        for (int a = order; a >= 0; --a)
            for (int b = order - a; b >= 0; --b) {
                int c = order - a - b;
                if (tangential_only && c != 0) continue;
                out.push_back({a, b, c});
            }
    return out;
}

int max_norm_order(const Grid& g) {
    int n = std::min({g.n1, g.n2, g.n3});
    return std::max(0, (n - 1) / 2);
}

namespace {

void check_order(const Grid& g, int k) {
    if (k < 0 || k > max_norm_order(g))
        throw Error(ErrorCode::k_too_large, "norm order " + std::to_string(k) + " exceeds " +
                                                std::to_string(max_norm_order(g)) + " for this grid");
}

// Visits D^alpha u for |alpha| <= k, each obtained from its parent by one
// difference along an axis >= the parent's last axis.
template <class V, class Visit>
void visit_derivatives(const GridField<V>& u, int k, int first_axis, int last_axis, Visit&& visit) {
    visit(u);
    if (k == 0) return;
    for (int axis = first_axis; axis <= last_axis; ++axis) {
        GridField<V> d = diff(u, axis);
        visit_derivatives(d, k - 1, axis, last_axis, visit);
    }
}

// Face data as a one-layer periodic field so diff() can be reused.
template <class V>
GridField<V> as_layer(const Grid& g, const std::vector<V>& d) {
    Grid f = g;
    f.n3 = 1;
    f.periodic3 = true;
    f.H = 1.0;
    GridField<V> out(f);
    out.v = d;
    return out;
}

template <class V>
double face_norm_sq(const Grid& g, const std::vector<V>& d, int k) {
    if (d.size() != g.face_size()) throw Error(ErrorCode::shape_mismatch, "face data extent");
    check_order(g, k);
    const double w = g.face_weight();
    double s = 0.0;
    visit_derivatives(as_layer(g, d), k, 0, 1, [&](const GridField<V>& f) {
        for (const auto& x : f.v) s += w * x.squaredNorm();
    });
    return s;
}

}  // namespace

double hk_norm_sq(const Field& u, int k, bool tangential_only) {
    u.check_consistent();
    check_order(u.grid, k);
    double s = 0.0;
    visit_derivatives(u, k, 0, tangential_only ? 1 : 2, [&](const Field& f) { s += inner(f, f); });
    return s;
}

TraceData face_trace(const Field& u) {
    const Vec3 nu = face_normal(false);
    auto vals = face_values(u, false);
    TraceData out(vals.size());
    for (std::size_t p = 0; p < vals.size(); ++p)
        out[p] = stack(trace_t(vals[p].head<3>(), nu), trace_t(vals[p].tail<3>(), nu));
    return out;
}

double face_hk_norm_sq(const Grid& g, const TraceData& d, int k) { return face_norm_sq(g, d, k); }
double face_hk_norm_sq(const Grid& g, const FaceData& d, int k) { return face_norm_sq(g, d, k); }

std::vector<Field> time_derivative(const std::vector<Field>& s, double dt) {
    const std::size_t n = s.size();
    if (n < 3) throw Error(ErrorCode::k_too_large, "time derivative needs three or more states");
    std::vector<Field> out(n, Field(s[0].grid));
    const double c = 1.0 / (2.0 * dt);
    for (std::size_t p = 0; p < s[0].v.size(); ++p) {
        out[0].v[p] = (-3.0 * s[0].v[p] + 4.0 * s[1].v[p] - s[2].v[p]) * c;
        out[n - 1].v[p] = (3.0 * s[n - 1].v[p] - 4.0 * s[n - 2].v[p] + s[n - 3].v[p]) * c;
        for (std::size_t i = 1; i + 1 < n; ++i) out[i].v[p] = (s[i + 1].v[p] - s[i - 1].v[p]) * c;
    }
    return out;
}

double stored_spacing(const Trajectory& tr) {
    if (tr.times.size() < 2) return tr.dt;
    const double h = tr.times[1] - tr.times[0];
    for (std::size_t i = 2; i < tr.times.size(); ++i)
        if (std::abs(tr.times[i] - tr.times[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw Error(ErrorCode::shape_mismatch, "stored states are not equally spaced");
    return h;
}

double gamma_norm(const Trajectory& tr, int k, double gamma) {
    if (tr.states.empty()) return 0.0;
    double s = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        double v = std::exp(-2.0 * gamma * (tr.times[i] - tr.t0)) * hk_norm_sq(tr.states[i], k);
        if (i > 0) s += 0.5 * (tr.times[i] - tr.times[i - 1]) * (prev + v);
        prev = v;
    }
    return std::sqrt(s);
}

double g_surrogate(const std::vector<Field>& states, double dt, int k, bool with_trace) {
    if (states.empty()) return 0.0;
    check_order(states[0].grid, k);
    const Grid& g = states[0].grid;
    double best = 0.0;
    std::vector<Field> d = states;
    for (int j = 0; j <= k; ++j) {
        if (j > 0) d = time_derivative(d, dt);
        for (const auto& f : d) {
            best = std::max(best, std::sqrt(hk_norm_sq(f, k - j)));
            if (with_trace && g.has_boundary())
                best = std::max(best, std::sqrt(face_hk_norm_sq(g, face_trace(f), k - j)));
        }
    }
    return best;
}

double g_surrogate(const Trajectory& tr, int k, bool with_trace) {
    return g_surrogate(tr.states, tr.states.size() > 1 ? stored_spacing(tr) : 1.0, k, with_trace);
}

double g_distance(const Trajectory& a, const Trajectory& b, int k, bool with_trace) {
    if (a.states.size() != b.states.size() || a.grid != b.grid)
        throw Error(ErrorCode::shape_mismatch, "trajectories do not conform");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
            throw Error(ErrorCode::shape_mismatch, "trajectories are stored at different times");
    std::vector<Field> diff(a.states.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.states[i] - b.states[i];
    return g_surrogate(diff, diff.size() > 1 ? stored_spacing(a) : 1.0, k, with_trace);
}

nlohmann::json NormSuite::to_json() const {
    return {{"k", k}, {"gamma", gamma}, {"l2", l2}, {"hk", hk}, {"hk_ta", hk_ta},
            {"weighted", weighted}, {"g_surrogate", g}, {"trace_hk", trace_hk}};
}

NormSuite norm_suite(const Trajectory& tr, int k, double gamma) {
    NormSuite s;
    s.k = k;
    s.gamma = gamma;
    for (const auto& f : tr.states) {
        s.l2 = std::max(s.l2, l2_norm(f));
        s.hk = std::max(s.hk, std::sqrt(hk_norm_sq(f, k)));
        s.hk_ta = std::max(s.hk_ta, std::sqrt(hk_norm_sq(f, k, true)));
        if (f.grid.has_boundary())
            s.trace_hk = std::max(s.trace_hk, std::sqrt(face_hk_norm_sq(f.grid, face_trace(f), k)));
    }
    s.weighted = gamma_norm(tr, k, gamma);
    s.g = tr.states.size() >= 3 || k == 0 ? g_surrogate(tr, k) : s.hk;
    return s;
}

double w1inf(const Field& u) {
    double m = max_abs(u);
    for (int axis = 0; axis < 3; ++axis) m = std::max(m, max_abs(diff(u, axis)));
    return m;
}

std::vector<double> lipschitz_omega(const Trajectory& tr) {
    std::vector<double> out;
    out.reserve(tr.states.size());
    double run = 0.0;
    for (const auto& f : tr.states) {
        run = std::max(run, w1inf(f));
        out.push_back(run);
    }
    return out;
}

nlohmann::json DataQuantity::to_json() const {
    return {{"k", k},         {"t0", t0},         {"t1", t1},           {"initial", initial},
            {"source_jets", source_jets}, {"source", source}, {"boundary", boundary}, {"total", total}};
}

DataQuantity data_quantity(const ScenarioData& data, const Grid& g, double t0, double t1, int k, int n_time) {
    check_order(g, k);
    if (!(t1 > t0)) throw Error(ErrorCode::config_invalid, "data_quantity: empty time interval");
    if (n_time < 2) throw Error(ErrorCode::config_invalid, "data_quantity: n_time must be at least 2");
    DataQuantity q;
    q.k = k;
    q.t0 = t0;
    q.t1 = t1;
    q.initial = hk_norm_sq(data.initial(g, t0), k);
    const double dt = (t1 - t0) / n_time;
    auto integrate = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 1; i < v.size(); ++i) s += 0.5 * dt * (v[i - 1] + v[i]);
        return s;
    };
    if (data.has_source()) {
        if (k >= 1) {
            auto jets = data.source_jets(g, t0, k);
            for (int j = 0; j < k; ++j) q.source_jets += hk_norm_sq(jets[std::size_t(j)], k - 1 - j);
        }
        std::vector<Field> f(std::size_t(n_time + 1), Field(g));
        for (int i = 0; i <= n_time; ++i) data.source(g, t0 + i * dt, f[std::size_t(i)]);
        std::vector<Field> d = f;
        for (int j = 0; j <= k; ++j) {
            if (j > 0) d = time_derivative(d, dt);
            std::vector<double> v;
            for (const auto& x : d) v.push_back(hk_norm_sq(x, k - j));
            q.source += integrate(v);
        }
    }
    if (data.has_boundary_data() && g.has_boundary()) {
        std::vector<Field> layers;
        Grid fg = g;
        fg.n3 = 1;
        fg.periodic3 = true;
        fg.H = 1.0;
        for (int i = 0; i <= n_time; ++i) {
            FaceData b;
            data.boundary(g, t0 + i * dt, false, b);
            Field layer(fg);
            for (std::size_t p = 0; p < b.size(); ++p) layer.v[p] << b[p], Vec3::Zero();
            layers.push_back(std::move(layer));
        }
        std::vector<Field> d = layers;
        for (int j = 0; j <= k; ++j) {
            if (j > 0) d = time_derivative(d, dt);
            std::vector<double> v;
            for (const auto& x : d) {
                TraceData t(x.v.begin(), x.v.end());
                v.push_back(face_hk_norm_sq(g, t, k - j));
            }
            q.boundary += integrate(v);
        }
    }
    q.total = q.initial + q.source_jets + q.source + q.boundary;
    return q;
}

}  // namespace qmax
