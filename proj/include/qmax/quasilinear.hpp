#pragma once

#include "qmax/compat.hpp"
#include "qmax/data.hpp"
#include "qmax/linear.hpp"
#include "qmax/material.hpp"

#include <json.hpp>

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qmax {

// A0 = chi(x, u^), D = sigma(x, u^), b = zeta(x, tr_t E^) for a stored
// trajectory u^, interpolated in time by cubic Lagrange polynomials over the
// four nearest stored states (fewer if fewer are stored).
class FrozenCoefficients final : public LinearCoefficients {
public:
    FrozenCoefficients(LawPtr law, std::shared_ptr<const Trajectory> frozen);

    void sample(const Grid& g, double t, CoefficientSample& out) const override;
    bool time_dependent() const override { return frozen_->states.size() > 1; }
    double eta() const override { return law_->eta(); }
    nlohmann::json describe() const override;

    Field state(double t) const;
    const Trajectory& frozen() const { return *frozen_; }

private:
    LawPtr law_;
    std::shared_ptr<const Trajectory> frozen_;
    double spacing_ = 0.0;
};

// Constants entering the smallness thresholds; none of them is computable, so
// the defaults are placeholders and the pass flags are advisory.
struct RunConstants {
    double c_m0 = 1.0;   // C_{m,0}
    double c_bar = 1.0;  // C-bar
    double c0 = 1.0;     // C_0
};

struct SmallnessReport {
    double kappa_bar = 0.0;
    double z0 = 0.0, z = 0.0;
    double threshold_regularity = 0.0;  // (C_{m,0} C-bar)^{-1/2} / 8
    double threshold_uniqueness = 0.0;  // (2 C_0)^{-1/2}
    bool pass_regularity = true, pass_uniqueness = true, pass = true;
    bool advisory = true;
    int samples = 0;
    Vec3 argmax_xi = Vec3::Zero();
    nlohmann::json to_json() const;
};

struct SmallnessOptions {
    int radial = 8;
    int angular = 32;
    int refinements = 4;
    int max_face_points = 256;
};

// z0 = max over face points and tangential |xi| <= kappa_bar of the norm of
// d_xi zeta, eta |-> d_xi zeta[eta] from unit tangential eta to 3x3 matrices
// with the spectral norm; z = z0 kappa_bar.
SmallnessReport smallness(const MaterialLaw& law, const Grid& g, double kappa_bar, const RunConstants& c = {},
                          const SmallnessOptions& opt = {});

struct QuasilinearParams {
    int m = 3;
    double t0 = 0.0;
    double tau = 0.25;          // horizon of one Picard solve
    double dt = 0.0;            // 0: from the CFL limit at the seed with a safety factor
    double cfl = 0.4;
    double dt_safety = 0.8;
    double tol = 1e-10;
    int n_max = 20;
    int no_contraction_run = 3;  // consecutive ratios >= 1 before giving up
    double R = 0.0;              // 0: calibrated
    double kappa = 0.0;          // 0: half the distance of ran(u0) to the boundary of U
    double kappa_tilde = 0.0;    // 0: automatic
    bool enforce_ball = false;
    bool check_compat = true;
    CompatOptions compat;
    RunConstants constants;
    Integrator integrator = Integrator::rk4;
};

struct IterationRow {
    int n = 0;
    double distance = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double norm = 0.0;        // G^m surrogate of the iterate
    double sup_dist_u0 = 0.0; // sup_t,x |u_n - u0|
    double jet_error = 0.0;   // FD time jets at t0 against s_nl, relative
    bool in_R = true, in_kappa = true;
};

struct IterationHistory {
    std::vector<IterationRow> rows;
    bool converged = false;
    int iterations = 0;
    double median_ratio = std::numeric_limits<double>::quiet_NaN();
    double final_ratio = std::numeric_limits<double>::quiet_NaN();
    nlohmann::json to_json() const;
};

// Structure of the step selection with fitted or placeholder constants.
struct Calibration {
    double c_fit = 1.0;    // empirical linear-estimate constant, used for C_{m,0} and C_m
    double c_sobolev = 1.0;
    double r = 0.0;        // sqrt(d_m)
    double R = 0.0;
    double gamma = 1.0;
    double tau_formula = 0.0;
    double kappa = 0.0, kappa_tilde = 0.0, trace_sup = 0.0;
    nlohmann::json to_json() const;
};

struct QuasilinearResult {
    Trajectory trajectory;
    IterationHistory history;
    Calibration calibration;
    SmallnessReport smallness;
    std::optional<CompatReport> compat;
    double bc_residual = 0.0;   // sup_t |B(u)u - g|_{L2(face)}
    double pde_residual = 0.0;  // sup_t |L(u)u - f|_{L2}, FD in time
    nlohmann::json to_json() const;
};

// Phi: solve the linear problem with coefficients frozen at u^ and the
// original data.
Trajectory picard_step(const Trajectory& frozen, const LawPtr& law, const ScenarioData& data,
                       const QuasilinearParams& p);

// Time jets (s_nl) of the data at t0 and the seeded trajectory built from them.
TimeJet data_jets(const MaterialLaw& law, const ScenarioData& data, const Grid& g, double t0, int m);
Trajectory seed_trajectory(const TimeJet& jets, double dt, int n_steps);

QuasilinearResult solve_quasilinear(const LawPtr& law, const ScenarioData& data, const Grid& g,
                                    const QuasilinearParams& p);

// (B(u) u - g) and (L(u) u - f) residual sizes of a trajectory.
double boundary_residual(const Trajectory& tr, const MaterialLaw& law, const ScenarioData& data);
double pde_residual(const Trajectory& tr, const MaterialLaw& law, const ScenarioData& data);

struct MonitorRow {
    double t = 0.0;
    double l2 = 0.0;
    double dist_boundary_u = 0.0;  // min_x dist(u(t,x), boundary of U)
    double hm = 0.0;               // H^m surrogate
    double grad_inf = 0.0;
    double trace_sup = 0.0;        // |B1 u|_inf on the face x3 = 0
    double omega = 0.0;            // running W^{1,inf} sup
    std::string criterion = "none";
};

struct BlowupReport {
    std::vector<MonitorRow> rows;
    std::string criterion = "none";  // a, b, c or none
    std::string status = "reached";  // reached, monitor, failure
    std::string detail;
    std::optional<ErrorCode> failure;  // set when status is "failure"
    double t_reached = 0.0;
    double kappa = 0.0, kappa_tilde = 0.0, hm0 = 0.0;
    int steps = 0, halvings = 0;
    std::vector<int> iterations;  // Picard iterations per accepted step
    std::vector<bool> restart_compat;  // compatibility at each restart, recorded only
    nlohmann::json to_json() const;
};

struct ContinuationOptions {
    double monitor_a = 0.25;    // dist < monitor_a kappa
    double monitor_b = 1e3;     // H^m > monitor_b H^m(t0)
    int max_halvings = 4;
    int store_stride = 1;       // stored states of the concatenated trajectory
    std::optional<Field> restart_state;
    std::optional<double> restart_kappa, restart_kappa_tilde, restart_hm0;
};

struct ContinuationResult {
    Trajectory trajectory;
    BlowupReport report;
    std::vector<IterationHistory> histories;
    nlohmann::json to_json() const;
};

// Repeated Picard solves on windows of length p.tau from p.t0 until t_target
// or a monitor fires. A restart state replaces u0 (jets rederived from it).
ContinuationResult continue_maximal(const LawPtr& law, const ScenarioData& data, const Grid& g, double t_target,
                                    const QuasilinearParams& p, const ContinuationOptions& opt = {});

// Data with the initial state replaced.
DataPtr restart_data(DataPtr base, Field state);

}  // namespace qmax
