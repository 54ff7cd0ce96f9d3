#pragma once

#include "qmax/data.hpp"
#include "qmax/grid.hpp"
#include "qmax/linear.hpp"

#include <json.hpp>

#include <array>
#include <vector>

namespace qmax {

// Multi-indices with |alpha| <= k, in graded order; alpha3 = 0 if tangential_only.
std::vector<std::array<int, 3>> multi_indices(int k, bool tangential_only = false);

// Largest k accepted by the Sobolev norms on this grid.
int max_norm_order(const Grid& g);

// sum_{|alpha| <= k} |D^alpha u|^2 with the solver's difference stencils.
double hk_norm_sq(const Field& u, int k, bool tangential_only = false);
inline double hk_norm(const Field& u, int k) { return std::sqrt(hk_norm_sq(u, k)); }
inline double hk_ta_norm(const Field& u, int k) { return std::sqrt(hk_norm_sq(u, k, true)); }

// Traces on the face x3 = 0: (tr_t E, tr_t H).
using TraceData = std::vector<Vec6>;
TraceData face_trace(const Field& u);
// H^k of face data with periodic central differences in x1, x2.
double face_hk_norm_sq(const Grid& g, const TraceData& d, int k);
double face_hk_norm_sq(const Grid& g, const FaceData& d, int k);

// d_t^j of an equally spaced series: centered inside, one-sided second order
// at both ends. Needs three or more entries.
std::vector<Field> time_derivative(const std::vector<Field>& s, double dt);

// Spacing of the stored states; throws unless they are equally spaced.
double stored_spacing(const Trajectory& tr);

// (int e^{-2 gamma (t - t0)} |u(t)|_{H^k}^2 dt)^{1/2}, trapezoid over the stored states.
double gamma_norm(const Trajectory& tr, int k, double gamma);

// max_{j <= k} sup_t |d_t^j u|_{H^{k-j}}; with_trace adds the same quantity
// for the face traces.
double g_surrogate(const Trajectory& tr, int k, bool with_trace = false);
// Same for the difference of two trajectories with matching stored times.
double g_distance(const Trajectory& a, const Trajectory& b, int k, bool with_trace = true);
double g_surrogate(const std::vector<Field>& states, double dt, int k, bool with_trace);

struct NormSuite {
    int k = 0;
    double gamma = 0.0;
    double l2 = 0.0;         // sup_t |u|_{L2}
    double hk = 0.0;         // sup_t |u|_{H^k}
    double hk_ta = 0.0;      // sup_t |u|_{H^k_ta}
    double weighted = 0.0;   // gamma_norm
    double g = 0.0;          // g_surrogate without traces
    double trace_hk = 0.0;   // sup_t |tr u|_{H^k(face)}
    nlohmann::json to_json() const;
};

NormSuite norm_suite(const Trajectory& tr, int k, double gamma);

// Running sup of max(|u|_inf, max_j |D_j u|_inf) over the stored states.
std::vector<double> lipschitz_omega(const Trajectory& tr);
double w1inf(const Field& u);

// d_k(J) = |u0|_{H^k}^2 + sum_{j<k} |d_t^j f(t0)|_{H^{k-1-j}}^2 + |f|_{H^k(J x G)}^2
//        + |g|_{H^k(J x face)}^2, space-time norms sampled on n_time + 1 points.
struct DataQuantity {
    int k = 0;
    double t0 = 0.0, t1 = 0.0;
    double initial = 0.0, source_jets = 0.0, source = 0.0, boundary = 0.0, total = 0.0;
    nlohmann::json to_json() const;
};

DataQuantity data_quantity(const ScenarioData& data, const Grid& g, double t0, double t1, int k,
                           int n_time = 16);

}  // namespace qmax
