#pragma once

#include "qmax/compat.hpp"
#include "qmax/data.hpp"
#include "qmax/grid.hpp"
#include "qmax/material.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qmax {

// Coefficients of A0 u_t + sum Aco_j D_j u + D u = f at one time. Each array
// holds one matrix (uniform) or one per node; b lives on the face x3 = 0.
struct CoefficientSample {
    MatField A0, D;
    std::vector<Mat3> b;
};

class LinearCoefficients {
public:
    virtual ~LinearCoefficients() = default;

    virtual void sample(const Grid& g, double t, CoefficientSample& out) const = 0;
    virtual bool time_dependent() const = 0;
    // Lower bound for A0 and the tangential part of b.
    virtual double eta() const = 0;
    virtual nlohmann::json describe() const = 0;

    // d/dt A0 by a central difference of sample(); zero when time independent.
    virtual MatField A0_dot(const Grid& g, double t) const;
    // Derivatives at t0 up to count entries. The default handles time-independent
    // coefficients only.
    virtual void jets(const Grid& g, double t0, int count, CoefficientJet& A0, CoefficientJet& D,
                      BoundaryCoefficientJet& b) const;
};

using CoeffPtr = std::shared_ptr<const LinearCoefficients>;

class ConstantCoefficients final : public LinearCoefficients {
public:
    ConstantCoefficients(CoefficientSample s, double eta) : s_(std::move(s)), eta_(eta) {}
    // Uniform A0, D, b.
    ConstantCoefficients(const Mat6& A0, const Mat6& D, const Mat3& b, double eta)
        : ConstantCoefficients(CoefficientSample{{A0}, {D}, {b}}, eta) {}

    void sample(const Grid&, double, CoefficientSample& out) const override { out = s_; }
    bool time_dependent() const override { return false; }
    double eta() const override { return eta_; }
    nlohmann::json describe() const override;

private:
    CoefficientSample s_;
    double eta_;
};

// A0(t) = (1 + rate (t - t_ref)) A0_base; D and b from the base.
class RampedCoefficients final : public LinearCoefficients {
public:
    RampedCoefficients(CoeffPtr base, double rate, double t_ref = 0.0) : base_(std::move(base)), rate_(rate), t_ref_(t_ref) {}

    void sample(const Grid& g, double t, CoefficientSample& out) const override;
    bool time_dependent() const override { return rate_ != 0.0; }
    double eta() const override { return base_->eta(); }
    nlohmann::json describe() const override;
    MatField A0_dot(const Grid& g, double t) const override;
    void jets(const Grid& g, double t0, int count, CoefficientJet& A0, CoefficientJet& D,
              BoundaryCoefficientJet& b) const override;

private:
    CoeffPtr base_;
    double rate_, t_ref_;
};

// A0 = chi(x, 0), D = sigma(x, 0), b = zeta(x, 0).
CoeffPtr law_coefficients(const MaterialLaw& law, const Grid& g);

enum class Integrator { rk4, implicit_midpoint };
Integrator parse_integrator(const std::string& s);
std::string integrator_name(Integrator i);

struct SolverOptions {
    double t0 = 0.0;
    double t_final = 1.0;
    double dt = 0.0;  // 0 selects the largest stable uniform step
    double cfl = 0.4;
    Integrator integrator = Integrator::rk4;
    int store_stride = 1;  // 0 keeps the initial and final states only
    double implicit_tol = 1e-12;
    int implicit_max_iter = 500;
    bool check_coefficients = true;
};

struct Trajectory {
    Grid grid;
    double t0 = 0.0, dt = 0.0;
    int n_steps = 0;
    std::vector<int> steps;  // step index of each stored state
    std::vector<double> times;
    std::vector<Field> states;

    const Field& final_state() const { return states.back(); }
    double t_final() const { return t0 + n_steps * dt; }
};

using StepObserver = std::function<void(int step, double t, const Field& u)>;

// Largest admissible step c_cfl h_min eta / max(|A0|, |b|).
double cfl_limit(const LinearCoefficients& c, const Grid& g, double t, double cfl);

// Method-of-lines solve with centered differences and penalty boundary terms. The
// far face x3 = H carries the same impedance condition with b = I.
Trajectory solve_linear(const LinearCoefficients& coeffs, const Field& u0, const ScenarioData& forcing,
                        const SolverOptions& opt, const StepObserver& observer = {});

// Right-hand side of the semi-discrete system u_t = F(t, u).
class SemiDiscrete {
public:
    SemiDiscrete(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g, bool check);
    void rhs(double t, const Field& u, Field& out);
    // Same without f and g (the homogeneous part).
    void rhs_homogeneous(double t, const Field& u, Field& out);
    const CoefficientSample& coefficients(double t);
    void source(double t, Field& out);
    void boundary(double t, bool top, FaceData& out);

private:
    struct Cached;
    const Cached& at(double t);
    void apply(double t, const Field& u, Field& out, bool forced);

    const LinearCoefficients& coeffs_;
    const ScenarioData& forcing_;
    Grid g_;
    bool check_;
    std::vector<std::shared_ptr<Cached>> cache_;
    Field tmp_;
};

// Semi-discrete energy balance
//   1/2 (A0 u, u)(T) + int sum_faces (b s).s = 1/2 (A0 u, u)(t0)
//     + int [((1/2 dA0/dt - D) u, u) + (f, u) - sum_faces g.tr_tau E]
// with s = tr_t E, integrated in time by the trapezoid rule.
struct EnergyAudit {
    double lhs = 0.0, rhs = 0.0, residual = 0.0;
    double energy_initial = 0.0, energy_final = 0.0;
    double dissipation = 0.0, work = 0.0;
    int n_steps = 0;
    double dt = 0.0;
    std::vector<double> times, lhs_series, rhs_series;
    nlohmann::json to_json() const;
};

class EnergyAccumulator {
public:
    EnergyAccumulator(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g);
    void observe(int step, double t, const Field& u);
    const EnergyAudit& result() const { return audit_; }

private:
    const LinearCoefficients& coeffs_;
    const ScenarioData& forcing_;
    Grid g_;
    EnergyAudit audit_;
    double prev_t_ = 0.0, prev_q_ = 0.0, prev_p_ = 0.0;
    bool started_ = false;
};

EnergyAudit energy_audit(const Trajectory& traj, const LinearCoefficients& coeffs, const ScenarioData& forcing);
// Streaming variant that does not store states.
EnergyAudit run_energy_audit(const LinearCoefficients& coeffs, const Field& u0, const ScenarioData& forcing,
                             SolverOptions opt);

// Both sides of the gamma-weighted estimate
//   e^{-2 g T}|u(T)|^2 + g |u|^2_g + |tr_tau u|^2_g
//     <= c (|A0(t0)| |u0|^2 + |f|^2_g / g + |g|^2_g)
// with the constant c fitted as the ratio of the two sides.
struct AprioriRow {
    double gamma = 0.0, lhs = 0.0, bracket = 0.0, c_fit = 0.0;
};
struct AprioriReport {
    double r = 0.0, gamma0 = 0.0;
    std::vector<AprioriRow> rows;
    bool monotone = true;
    nlohmann::json to_json() const;
};

class AprioriAccumulator {
public:
    AprioriAccumulator(const LinearCoefficients& coeffs, const ScenarioData& forcing, const Grid& g,
                       std::vector<double> gammas);
    void observe(int step, double t, const Field& u);
    AprioriReport result() const;
    // r = sup |D - dA0/dt / 2| seen so far.
    double r() const { return r_; }

private:
    const LinearCoefficients& coeffs_;
    const ScenarioData& forcing_;
    Grid g_;
    std::vector<double> gammas_;
    double t0_ = 0.0, prev_t_ = 0.0, a0_norm0_ = 0.0, u0_sq_ = 0.0, last_u_sq_ = 0.0, last_t_ = 0.0, r_ = 0.0;
    std::vector<double> prev_u_, prev_tr_, prev_f_, prev_g_;
    std::vector<double> int_u_, int_tr_, int_f_, int_g_;
    bool started_ = false;
};

// Gamma defaults: {gamma0, 2 gamma0, 4 gamma0} with gamma0 = max(1, 4 r / eta).
double apriori_gamma0(const LinearCoefficients& coeffs, const Grid& g, double t0, double t1);
AprioriReport apriori_monitor(const Trajectory& traj, const LinearCoefficients& coeffs, const ScenarioData& forcing,
                              std::vector<double> gammas = {});

}  // namespace qmax
