#pragma once

#include "qmax/data.hpp"
#include "qmax/grid.hpp"
#include "qmax/material.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace qmax {

// (d_t^0 u, ..., d_t^{m-1} u) at t0.
struct TimeJet {
    double t0 = 0.0;
    std::vector<Field> entries;

    int order() const { return int(entries.size()); }
    void validate() const;
};

// Time derivatives of a matrix coefficient at t0; each entry holds one
// matrix (uniform) or one per node.
template <class M>
struct CoefficientJetT {
    std::vector<std::vector<M>> entries;
    int order() const { return int(entries.size()); }
};
using CoefficientJet = CoefficientJetT<Mat6>;
using BoundaryCoefficientJet = CoefficientJetT<Mat3>;

enum class LawComponent { chi, sigma };

CoefficientJet jet_compose(const MaterialLaw& law, LawComponent component, const TimeJet& state);
// Jets of zeta(B1 u) on a face, B1 u = tr_t E.
BoundaryCoefficientJet jet_compose_boundary(const MaterialLaw& law, const TimeJet& state, bool top = false);

// Linear recursion for A0 u_t + sum Aco_j D_j u + D u = f. f_jets holds
// d_t^k f(t0) for k <= m-2; an empty list means f = 0.
TimeJet s_lin(int m, double t0, const CoefficientJet& A0, const CoefficientJet& D, const Field& u0,
              const std::vector<Field>& f_jets);

// Nonlinear recursion for chi(u) u_t + sum Aco_j D_j u + sigma(u) u = f.
TimeJet s_nl(int m, double t0, const MaterialLaw& law, const Field& u0, const std::vector<Field>& f_jets);

struct CompatOptions {
    std::string mode = "auto";  // "relative", "dx2" or "auto"
    double rel_tol = 1e-8;
    double dx2_factor = 10.0;
};

struct CompatReport {
    std::string kind;
    int m = 0;
    std::vector<double> residuals;
    double data_norm = 0.0;
    double tolerance = 0.0;
    std::string mode;
    std::vector<bool> order_pass;
    bool pass = true;
    nlohmann::json to_json() const;
};

// Residuals of B(t0) S_p = d^p g(t0) + nu x sum_{k>=1} C(p,k) d^k b S_{p-k}
// on the face x3 = 0, p < m.
CompatReport check_cc_linear(int m, const TimeJet& s, const BoundaryCoefficientJet& b,
                             const std::vector<FaceData>& g_jets, const CompatOptions& opt = {},
                             bool analytic = true);
// Same with b replaced by the jets of zeta(B1 u).
CompatReport check_cc_nonlinear(int m, const MaterialLaw& law, const TimeJet& s,
                                const std::vector<FaceData>& g_jets, const CompatOptions& opt = {},
                                bool analytic = true);

// Builds the jets from the data. The linear kind freezes the law at u = 0.
CompatReport check_cc(const std::string& kind, int m, const ScenarioData& data, const MaterialLaw& law,
                      const Grid& g, double t0, const CompatOptions& opt = {});

// Jets of a law frozen at u = 0 (time independent).
CoefficientJet frozen_jet(const MaterialLaw& law, LawComponent c, const Grid& g);
BoundaryCoefficientJet frozen_boundary_jet(const MaterialLaw& law, const Grid& g);

// Columnar text form: header "order,node,u1..u6", one row per order and node.
void write_jet_csv(std::ostream& os, const TimeJet& jet);
TimeJet read_jet_csv(std::istream& is, const Grid& g, double t0 = 0.0);

// u(t, x) = F^{-1}[ psi(<xi> (t - t0)) sum_k h_k^(xi) (t - t0)^k / k! ] with the
// discrete Fourier transform in (x1, x2) on each x3 line.
class JetExtension {
public:
    explicit JetExtension(const std::vector<Field>& h, double t0 = 0.0, double tail_threshold = 0.25);

    Field evaluate(double t) const;
    // d_t^k u(t) for k < count.
    std::vector<Field> derivatives(double t, int count) const;

    // sum_k ||h_k||_{H^{m-k-1/2}} with tangential Fourier weights.
    double sobolev_surrogate() const;
    double tail_fraction() const { return tail_; }
    int order() const { return m_; }
    const Grid& grid() const { return grid_; }
    double t0() const { return t0_; }

    static double psi(double s);
    static Taylor psi(const Taylor& s);

private:
    Grid grid_;
    double t0_;
    int m_;
    double tail_ = 0.0;
    std::vector<double> bracket_;  // <xi> per tangential mode
    // hat[((k * n3 + line) * 6 + c) * n1n2 + mode], real and imaginary parts.
    std::vector<double> re_, im_;
    std::size_t at(int k, int line, int c) const;
};

}  // namespace qmax
