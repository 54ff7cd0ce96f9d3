#pragma once

#include "qmax/grid.hpp"

#include <array>

namespace qmax {

struct ConstantMatrices {
    std::array<Mat3, 3> J;
    std::array<Mat6, 3> Aco;
    Mat3 B0co;
    Mat36 B1co;
    Mat36 B2co;
};

ConstantMatrices constant_matrices();

// J(a) v = a x v.
inline Mat3 cross_matrix(const Vec3& a) {
    Mat3 m;
    m << 0, -a(2), a(1), a(2), 0, -a(0), -a(1), a(0), 0;
    return m;
}

// First-order difference operator along an axis (0,1,2): centered in the
// interior and periodic tangentially; along x3 the two end nodes use the
// one-sided second-order stencil (-3, 4, -1)/(2h).
template <class V>
GridField<V> diff(const GridField<V>& f, int axis) {
    const Grid& g = f.grid;
    GridField<V> out(g);
    const int n[3] = {g.n1, g.n2, g.n3};
    const double h[3] = {g.h1(), g.h2(), g.h3()};
    const bool periodic = axis < 2 || g.periodic3;
    const int na = n[axis];
    const double inv2h = 1.0 / (2.0 * h[axis]);
    for (int k = 0; k < g.n3; ++k)
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                int idx[3] = {i, j, k};
                int a = idx[axis];
                auto at = [&](int s) {
                    int t[3] = {i, j, k};
                    t[axis] = s;
                    return f(t[0], t[1], t[2]);
                };
                if (periodic) {
                    out(i, j, k) = (at((a + 1) % na) - at((a - 1 + na) % na)) * inv2h;
                } else if (a == 0) {
                    out(i, j, k) = (at(0) * -3.0 + at(1) * 4.0 - at(2)) * inv2h;
                } else if (a == na - 1) {
                    out(i, j, k) = (at(na - 1) * 3.0 - at(na - 2) * 4.0 + at(na - 3)) * inv2h;
                } else {
                    out(i, j, k) = (at(a + 1) - at(a - 1)) * inv2h;
                }
            }
    return out;
}

// Composite derivative D1^a1 D2^a2 D3^a3 built from the same stencils.
template <class V>
GridField<V> diff_multi(const GridField<V>& f, const std::array<int, 3>& alpha) {
    GridField<V> r = f;
    for (int axis = 0; axis < 3; ++axis)
        for (int c = 0; c < alpha[axis]; ++c) r = diff(r, axis);
    return r;
}

VecField curl(const VecField& v);

// Sum_j Aco[j] D_j u = (-curl H, curl E), evaluated with fused stencils.
void aco_derivative(const Field& u, Field& out);
Field aco_derivative(const Field& u);

struct Traces {
    Vec3 tr_t;
    Vec3 tr_tau;
    double tr_n;
};

inline Vec3 trace_t(const Vec3& v, const Vec3& nu) { return v.cross(nu); }
inline Vec3 trace_tau(const Vec3& v, const Vec3& nu) { return nu.cross(v.cross(nu)); }

Traces traces(const Vec3& v, const Vec3& nu);

// Outward unit normal of the flat faces.
inline Vec3 face_normal(bool top) { return top ? Vec3(0, 0, 1) : Vec3(0, 0, -1); }

struct BoundaryFrame {
    Vec3 nu;
    Mat3 tangential_projector() const { return Mat3::Identity() - nu * nu.transpose(); }
    static BoundaryFrame flat(bool top = false) { return {face_normal(top)}; }
};

// Pointwise A0 u_t + sum Aco_j D_j u + D u. Coefficient arrays hold either
// one matrix (uniform) or one per node.
Field apply_L(const MatField& A0, const MatField& D, const Field& u, const Field& ut);

// Linear boundary operator B v = tr_t H - nu x (b tr_t E).
inline Vec3 apply_B_linear(const Mat3& b, const Vec6& u, const Vec3& nu) {
    Vec3 s = trace_t(u.head<3>(), nu);
    return trace_t(u.tail<3>(), nu) - nu.cross(b * s);
}

// Boundary operator on a face of the grid; b holds one matrix or one per face node.
FaceData apply_B_face(const Field& u, const std::vector<Mat3>& b, bool top);

// Extract face values.
std::vector<Vec6> face_values(const Field& u, bool top);

}  // namespace qmax
