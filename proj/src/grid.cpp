#include "qmax/grid.hpp"

#include <string>

namespace qmax {

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::grid_too_small: return "grid-too-small";
        case ErrorCode::shape_mismatch: return "shape-mismatch";
        case ErrorCode::zeta_domain_violation: return "zeta-domain-violation";
        case ErrorCode::law_invalid: return "law-invalid";
        case ErrorCode::domain_violation: return "domain-violation";
        case ErrorCode::order_exceeds_derivative_data: return "order-exceeds-derivative-data";
        case ErrorCode::singular_a0: return "singular-A0";
        case ErrorCode::singular_chi: return "singular-chi";
        case ErrorCode::non_smooth_input: return "non-smooth-input";
        case ErrorCode::cfl_violation: return "cfl-violation";
        case ErrorCode::coefficient_invariant_failure: return "coefficient-invariant-failure";
        case ErrorCode::nan_detected: return "nan-detected";
        case ErrorCode::no_contraction: return "no-contraction";
        case ErrorCode::ball_exit: return "ball-exit";
        case ErrorCode::domain_exit: return "domain-exit";
        case ErrorCode::compat_failure: return "compat-failure";
        case ErrorCode::degenerate_chart: return "degenerate-chart";
        case ErrorCode::positivity_lost: return "positivity-lost";
        case ErrorCode::identity_violation: return "identity-violation";
        case ErrorCode::k_too_large: return "k-too-large-for-grid";
        case ErrorCode::config_invalid: return "config-invalid";
        case ErrorCode::perturbed_run_failure: return "perturbed-run-failure";
    }
    return "unknown";
}

void Grid::validate() const {
    if (n1 < 3 || n2 < 3 || n3 < 3)
        throw Error(ErrorCode::grid_too_small,
                    "grid needs at least 3 nodes per axis, got " + std::to_string(n1) + "x" +
                        std::to_string(n2) + "x" + std::to_string(n3));
    if (!(L1 > 0 && L2 > 0 && H > 0))
        throw Error(ErrorCode::grid_too_small, "grid extents must be positive");
}

double face_l2(const Grid& g, const FaceData& d) {
    double s = 0.0;
    for (const auto& x : d) s += x.squaredNorm();
    return std::sqrt(s * g.face_weight());
}

}  // namespace qmax
