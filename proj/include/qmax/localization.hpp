#pragma once

#include "qmax/material.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qmax {

// Smooth radial cutoff: 1 for |p - c| <= r_in, 0 for |p - c| >= r_out.
struct Cutoff {
    Vec3 center = Vec3::Zero();
    double r_in = 0.3, r_out = 0.5;
    double value(const Vec3& p) const;
    Taylor value(const Vec3T& p) const;
    Vec3 gradient(const Vec3& p) const;
};

// Boundary-flattening chart phi: U -> V. phi(Sigma cap U) lies in {y3 = 0},
// phi(G cap U) in {y3 > 0}. Only the branch d3 phi_3 >= tau is supported.
class Chart {
public:
    virtual ~Chart() = default;

    virtual std::string name() const = 0;
    virtual Vec3 phi(const Vec3& x) const = 0;
    virtual Vec3 phi_inv(const Vec3& y) const = 0;
    virtual Vec3T phi_inv(const Vec3T& y) const = 0;
    // (d phi_a / d x_k)
    virtual Mat3 jacobian(const Vec3& x) const = 0;
    virtual Mat3T jacobian(const Vec3T& x) const = 0;
    virtual nlohmann::json params() const = 0;

    Vec3 anchor = Vec3::Zero();  // y_i
    double tau = 0.1;
    double radius = 0.7;         // V is the half ball of this radius about the anchor
    Cutoff omega{Vec3::Zero(), 0.3, 0.5};        // on V
    Cutoff omega_tilde{Vec3::Zero(), 0.55, 0.68};  // on V, 1 on supp omega
    Cutoff theta{Vec3::Zero(), 0.1, 0.25};       // on V, pulled back to U

    // sign of d3 phi_3 at phi^{-1}(y_i)
    double anchor_sign() const;
    // theta as a function of x and its x-gradient.
    double theta_x(const Vec3& x) const { return theta.value(phi(x)); }
    Vec3 theta_x_gradient(const Vec3& x) const { return jacobian(x).transpose() * theta.gradient(phi(x)); }

    // Deterministic polar/cartesian samples plus seeded random points.
    std::vector<Vec3> boundary_samples(int random_count, std::uint64_t seed) const;
    std::vector<Vec3> interior_samples(int random_count, std::uint64_t seed) const;
};

using ChartPtr = std::shared_ptr<const Chart>;

// Registry: "identity", "scaled", "tilted", "hemisphere". The chart is
// validated on its sample set; |beta| < tau or kappa <= 0 throws degenerate_chart.
ChartPtr build_chart(const std::string& name, const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> chart_names();

struct LocalizationOptions {
    double eta = 1.0;
    // Third row of R-hat: (-w d1 phi3, -w d2 phi3, -beta) by default; the
    // printed variant (+w d1 phi3, +w d2 phi3, -beta) is kept for comparison.
    bool printed_sign = false;
};

// Chart quantities at y.
struct ChartPoint {
    Vec3 y, x;
    Mat3 jac;
    double omega = 0.0, omega_tilde = 0.0, beta = 0.0;
    Mat3 Rhat;
    Mat6 R;
};

ChartPoint chart_point(const Chart& c, const Vec3& y, const LocalizationOptions& o = {});

using MatField6 = std::function<Mat6(const Vec3&)>;
using MatField3 = std::function<Mat3(const Vec3&)>;
using VecField6 = std::function<Vec6(const Vec3&)>;
using VecField3 = std::function<Vec3(const Vec3&)>;

struct InteriorCoefficients {
    Mat6 A0, A1, A2, A3, D;
    // A_j^i = sum_k mu_jk Aco[k]
    Vec3 mu1, mu2;
    double mu_residual = 0.0;  // max entrywise residual of both decompositions
    // R (w sum_k Aco[k] d_k phi_3 + (1 - w) s Aco[3]) R^T - Aco[3]; A3 itself is never recomputed.
    double a3_defect = 0.0;
    double symmetry_defect = 0.0;
    double min_eig_a0 = 0.0;
    double congruence_bound = 0.0;  // eta * min eig(R R^T)
};

// Interior part: A0 and D are given as functions of x in U.
InteriorCoefficients transform_coeffs(const Chart& c, const Vec3& y, const MatField6& A0, const MatField6& D,
                                      const LocalizationOptions& o = {});

struct BoundaryCoefficients {
    Vec3 nu;
    double kappa = 0.0;
    Mat3 b_tilde, b_i;
    Mat36 B_long;      // long formula
    Mat36 B_identity;  // B2co + B0co b_i B1co
    double residual = 0.0;
    // |B_long - R-hat Phi(kappa B) R^T| where omega = 1; NaN elsewhere
    double reconstruction_residual = 0.0;
    // |R-hat (w Phi(kappa B0) + (1 - w) s B0co) R-hat^T - B0co|
    double b0co_residual = 0.0;
    double min_eig_b_i = 0.0;
    double eta_bound = 0.0;  // min eig(b_tilde) / max eig(R-hat R-hat^T)
};

// Boundary part at y with y3 = 0; b is given on Sigma as a function of x.
// Throws identity_violation when the residual exceeds tolerance (if > 0).
BoundaryCoefficients transform_boundary(const Chart& c, const Vec3& y, const MatField3& b,
                                        const LocalizationOptions& o = {}, double tolerance = 1e-10);

// Partition function on U with its x-gradient; defaults to the chart's theta.
struct Partition {
    std::function<double(const Vec3&)> value;
    std::function<Vec3(const Vec3&)> gradient;
};
Partition chart_partition(const ChartPtr& c);

// v0^i = (R^T)^{-1} Phi(theta v0), g^i = R-hat Phi(theta kappa g),
// f^i = R (Phi(theta h) + Phi(sum_j Aco[j] d_j theta v)).
Vec6 transform_initial(const Chart& c, const Vec3& y, const VecField6& v0, const Partition& p,
                       const LocalizationOptions& o = {});
Vec3 transform_boundary_data(const Chart& c, const Vec3& y, const VecField3& g, const Partition& p,
                             const LocalizationOptions& o = {});
Vec6 transform_source(const Chart& c, const Vec3& y, const VecField6& h, const VecField6& v, const Partition& p,
                      const LocalizationOptions& o = {});

struct ChartVerification {
    std::string chart;
    nlohmann::json params;
    int boundary_samples = 0, interior_samples = 0;
    double identity_residual = 0.0;
    double reconstruction_residual = 0.0;
    double b0co_residual = 0.0;
    double a3_defect = 0.0;
    double mu_residual = 0.0;
    double symmetry_defect = 0.0;
    double congruence_margin = 0.0;  // min over samples of min eig(A0i) - eta min eig(R R^T)
    double eta_prime_a0 = 0.0;       // empirical min eig(A0i)
    double eta_prime_b = 0.0;        // empirical min eig(b_i)
    double b_margin = 0.0;           // min over samples of min eig(b_i) - eta_bound
    double beta_min = 0.0, kappa_min = 0.0;
    double d_max = 0.0;
    bool pass = false;
    nlohmann::json to_json() const;
};

struct VerifyOptions {
    LocalizationOptions loc;
    int random_boundary = 64;
    int random_interior = 64;
    std::uint64_t seed = 2024;
    double tolerance = 1e-10;
};

// Samples seeded smooth coefficient fields (A0, b >= eta I; D arbitrary) and
// evaluates every identity on the chart's sample set.
ChartVerification verify_chart(const Chart& c, const VerifyOptions& o = {});

}  // namespace qmax
