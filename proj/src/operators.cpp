#include "qmax/operators.hpp"

namespace qmax {

ConstantMatrices constant_matrices() {
    ConstantMatrices m;
    m.J[0] << 0, 0, 0, 0, 0, -1, 0, 1, 0;
    m.J[1] << 0, 0, 1, 0, 0, 0, -1, 0, 0;
    m.J[2] << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    for (int j = 0; j < 3; ++j) {
        m.Aco[j].setZero();
        m.Aco[j].block<3, 3>(0, 3) = -m.J[j];
        m.Aco[j].block<3, 3>(3, 0) = m.J[j];
    }
    m.B0co = m.J[2];
    m.B1co.setZero();
    m.B1co.block<3, 3>(0, 0) = m.B0co;
    m.B2co.setZero();
    m.B2co.block<3, 3>(0, 3) = m.B0co;
    return m;
}

VecField curl(const VecField& v) {
    v.grid.validate();
    v.check_consistent();
    const ConstantMatrices cm = constant_matrices();
    VecField out(v.grid);
    for (int axis = 0; axis < 3; ++axis) {
        VecField d = diff(v, axis);
        for (std::size_t n = 0; n < out.v.size(); ++n) out.v[n] += cm.J[axis] * d.v[n];
    }
    return out;
}

void aco_derivative(const Field& u, Field& out) {
    const Grid& g = u.grid;
    if (out.v.size() != u.v.size()) out = Field(g);
    const double c1 = 1.0 / (2.0 * g.h1()), c2 = 1.0 / (2.0 * g.h2());
    const double h3 = g.h3();
    const int n1 = g.n1, n2 = g.n2, n3 = g.n3;
    const std::size_t s2 = n1, s3 = std::size_t(n1) * n2;
    const Vec6* U = u.v.data();
    const double c3 = 1.0 / (2.0 * h3);
    for (int k = 0; k < n3; ++k) {
        // x3 stencil: nodes kk[] with weights w3[]
        std::size_t kk[3];
        double w3[3];
        if (g.periodic3) {
            kk[0] = std::size_t((k + 1) % n3), kk[1] = std::size_t((k - 1 + n3) % n3), kk[2] = 0;
            w3[0] = 1.0, w3[1] = -1.0, w3[2] = 0.0;
        } else if (k == 0) {
            kk[0] = 0, kk[1] = 1, kk[2] = 2;
            w3[0] = -3.0, w3[1] = 4.0, w3[2] = -1.0;
        } else if (k == n3 - 1) {
            kk[0] = std::size_t(n3 - 1), kk[1] = std::size_t(n3 - 2), kk[2] = std::size_t(n3 - 3);
            w3[0] = 3.0, w3[1] = -4.0, w3[2] = 1.0;
        } else {
            kk[0] = std::size_t(k + 1), kk[1] = std::size_t(k - 1), kk[2] = 0;
            w3[0] = 1.0, w3[1] = -1.0, w3[2] = 0.0;
        }
        for (int j = 0; j < n2; ++j) {
            const std::size_t jp = std::size_t((j + 1) % n2), jm = std::size_t((j - 1 + n2) % n2);
            for (int i = 0; i < n1; ++i) {
                const std::size_t ip = std::size_t((i + 1) % n1), im = std::size_t((i - 1 + n1) % n1);
                const std::size_t base = std::size_t(k) * s3;
                const Vec6 d1 = (U[base + j * s2 + ip] - U[base + j * s2 + im]) * c1;
                const Vec6 d2 = (U[base + jp * s2 + i] - U[base + jm * s2 + i]) * c2;
                const std::size_t off = j * s2 + i;
                Vec6 d3 = w3[0] * U[kk[0] * s3 + off] + w3[1] * U[kk[1] * s3 + off];
                if (w3[2] != 0.0) d3 += w3[2] * U[kk[2] * s3 + off];
                d3 *= c3;
                // curl v = (d2 v3 - d3 v2, d3 v1 - d1 v3, d1 v2 - d2 v1)
                Vec6& o = out.v[base + j * s2 + i];
                o(0) = -(d2(5) - d3(4));
                o(1) = -(d3(3) - d1(5));
                o(2) = -(d1(4) - d2(3));
                o(3) = d2(2) - d3(1);
                o(4) = d3(0) - d1(2);
                o(5) = d1(1) - d2(0);
            }
        }
    }
}

Field aco_derivative(const Field& u) {
    Field out(u.grid);
    aco_derivative(u, out);
    return out;
}

Traces traces(const Vec3& v, const Vec3& nu) {
    Traces t;
    t.tr_t = trace_t(v, nu);
    t.tr_tau = nu.cross(t.tr_t);
    t.tr_n = v.dot(nu);
    return t;
}

Field apply_L(const MatField& A0, const MatField& D, const Field& u, const Field& ut) {
    const std::size_t n = u.v.size();
    auto ok = [n](const MatField& m) { return m.size() == 1 || m.size() == n; };
    if (ut.grid != u.grid || ut.v.size() != n || !ok(A0) || !ok(D))
        throw Error(ErrorCode::shape_mismatch, "apply_L: coefficient grids do not conform");
    Field out = aco_derivative(u);
    for (std::size_t p = 0; p < n; ++p) {
        const Mat6& a = A0.size() == 1 ? A0[0] : A0[p];
        const Mat6& d = D.size() == 1 ? D[0] : D[p];
        out.v[p] += a * ut.v[p] + d * u.v[p];
    }
    return out;
}

std::vector<Vec6> face_values(const Field& u, bool top) {
    const Grid& g = u.grid;
    const int k = top ? g.n3 - 1 : 0;
    std::vector<Vec6> out(g.face_size());
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) out[g.face_index(i, j)] = u(i, j, k);
    return out;
}

FaceData apply_B_face(const Field& u, const std::vector<Mat3>& b, bool top) {
    const Grid& g = u.grid;
    if (!(b.size() == 1 || b.size() == g.face_size()))
        throw Error(ErrorCode::shape_mismatch, "apply_B: boundary coefficient extent");
    const Vec3 nu = face_normal(top);
    const auto vals = face_values(u, top);
    FaceData out(vals.size());
    for (std::size_t p = 0; p < vals.size(); ++p)
        out[p] = apply_B_linear(b.size() == 1 ? b[0] : b[p], vals[p], nu);
    return out;
}

}  // namespace qmax
