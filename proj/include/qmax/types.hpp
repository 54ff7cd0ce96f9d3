#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace qmax {

using Vec3 = Eigen::Matrix<double, 3, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix<double, 3, 3>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

enum class ErrorCode {
    grid_too_small,
    shape_mismatch,
    zeta_domain_violation,
    law_invalid,
    domain_violation,
    order_exceeds_derivative_data,
    singular_a0,
    singular_chi,
    non_smooth_input,
    cfl_violation,
    coefficient_invariant_failure,
    nan_detected,
    no_contraction,
    ball_exit,
    domain_exit,
    compat_failure,
    degenerate_chart,
    positivity_lost,
    identity_violation,
    k_too_large,
    config_invalid,
    perturbed_run_failure,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline Vec6 stack(const Vec3& e, const Vec3& h) {
    Vec6 u;
    u << e, h;
    return u;
}

}  // namespace qmax
