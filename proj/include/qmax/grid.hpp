#pragma once

#include "qmax/types.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace qmax {

// Uniform grid over [0,L1) x [0,L2) x [0,H]. Tangential directions are
// periodic; x3 carries nodes on both faces unless periodic3 is set.
struct Grid {
    int n1 = 0, n2 = 0, n3 = 0;
    double L1 = 1.0, L2 = 1.0, H = 1.0;
    bool periodic3 = false;

    double h1() const { return L1 / n1; }
    double h2() const { return L2 / n2; }
    double h3() const { return periodic3 ? H / n3 : H / (n3 - 1); }
    double h_min() const { return std::min(h1(), std::min(h2(), h3())); }
    double h_max() const { return std::max(h1(), std::max(h2(), h3())); }

    std::size_t size() const { return std::size_t(n1) * n2 * n3; }
    std::size_t face_size() const { return std::size_t(n1) * n2; }
    std::size_t index(int i, int j, int k) const {
        return (std::size_t(k) * n2 + j) * n1 + i;
    }
    std::size_t face_index(int i, int j) const { return std::size_t(j) * n1 + i; }

    Vec3 point(int i, int j, int k) const { return Vec3(i * h1(), j * h2(), k * h3()); }
    Vec3 face_point(int i, int j, bool top) const {
        return Vec3(i * h1(), j * h2(), top ? H : 0.0);
    }

    // Trapezoid quadrature weights along x3.
    double weight3(int k) const {
        if (!periodic3 && (k == 0 || k == n3 - 1)) return 0.5 * h3();
        return h3();
    }
    double cell_weight(int k) const { return h1() * h2() * weight3(k); }
    double face_weight() const { return h1() * h2(); }
    bool has_boundary() const { return !periodic3; }

    void validate() const;

    bool operator==(const Grid& o) const {
        return n1 == o.n1 && n2 == o.n2 && n3 == o.n3 && L1 == o.L1 && L2 == o.L2 &&
               H == o.H && periodic3 == o.periodic3;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

template <class V>
struct GridField {
    Grid grid;
    std::vector<V> v;

    GridField() = default;
    explicit GridField(const Grid& g) : grid(g), v(g.size(), V::Zero()) {}

    V& operator()(int i, int j, int k) { return v[grid.index(i, j, k)]; }
    const V& operator()(int i, int j, int k) const { return v[grid.index(i, j, k)]; }
    std::size_t size() const { return v.size(); }

    void check_consistent() const {
        if (v.size() != grid.size())
            throw Error(ErrorCode::shape_mismatch, "field extent does not match grid");
    }
    bool finite() const {
        for (const auto& x : v)
            if (!x.allFinite()) return false;
        return true;
    }
};

using Field = GridField<Vec6>;
using VecField = GridField<Vec3>;
using MatField = std::vector<Mat6>;
using FaceData = std::vector<Vec3>;

template <class F>
Field sample_field(const Grid& g, F&& fn) {
    Field out(g);
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) out(i, j, k) = fn(g.point(i, j, k));
    return out;
}

template <class V>
GridField<V> operator+(GridField<V> a, const GridField<V>& b) {
    for (std::size_t n = 0; n < a.v.size(); ++n) a.v[n] += b.v[n];
    return a;
}
template <class V>
GridField<V> operator-(GridField<V> a, const GridField<V>& b) {
    for (std::size_t n = 0; n < a.v.size(); ++n) a.v[n] -= b.v[n];
    return a;
}
template <class V>
GridField<V> operator*(double s, GridField<V> a) {
    for (auto& x : a.v) x *= s;
    return a;
}

// Discrete L2 inner product and norm with the trapezoid weights.
template <class V>
double inner(const GridField<V>& a, const GridField<V>& b) {
    const Grid& g = a.grid;
    double s = 0.0;
    for (int k = 0; k < g.n3; ++k) {
        double w = g.cell_weight(k);
        double sk = 0.0;
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) sk += a(i, j, k).dot(b(i, j, k));
        s += w * sk;
    }
    return s;
}
template <class V>
double l2_norm(const GridField<V>& a) {
    return std::sqrt(inner(a, a));
}
template <class V>
double max_abs(const GridField<V>& a) {
    double m = 0.0;
    for (const auto& x : a.v) m = std::max(m, x.cwiseAbs().maxCoeff());
    return m;
}
template <class V>
double max_norm(const GridField<V>& a) {
    double m = 0.0;
    for (const auto& x : a.v) m = std::max(m, x.norm());
    return m;
}

double face_l2(const Grid& g, const FaceData& d);

}  // namespace qmax
