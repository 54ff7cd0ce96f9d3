#pragma once

#include "qmax/quasilinear.hpp"
#include "qmax/scenario.hpp"

#include <json.hpp>

#include <limits>
#include <string>
#include <vector>

namespace qmax {

struct StudyRow {
    double parameter = 0.0;  // resolution, delta or amplitude
    double value = std::numeric_limits<double>::quiet_NaN();
    double order = std::numeric_limits<double>::quiet_NaN();  // against the previous row
    bool ok = true;
    std::string error;
    nlohmann::json extra = nlohmann::json::object();
};

struct StudyResult {
    std::string kind, parameter, quantity;
    std::vector<StudyRow> rows;
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    bool monotone = true;
    bool pass = false;
    std::string expectation;
    nlohmann::json to_json() const;
};

// Least-squares slope of log y against log x.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// L2 error at T against data.exact on n^3 grids (other extents from base).
// Linear laws use solve_linear, others one Picard window of length T - t0.
// Orders need at least three resolutions; pass when the fitted order is at
// least expected_order and the errors decrease.
StudyResult convergence_study(const LawPtr& law, const DataPtr& data, const Grid& base, const std::vector<int>& resolutions,
                              double T, const QuasilinearParams& p, double expected_order = 1.9);

// |Psi(scale(d, 1 + delta)) - Psi(d)| in the G^{m-1} surrogate (with the
// boundary trace term) for one Picard window [t0, T]; slope fitted over the
// nonzero deltas. Failing runs are recorded per row as perturbed_run_failure.
StudyResult dependence_study(const LawPtr& law, const DataPtr& data, const Grid& g, const std::vector<double>& deltas,
                             double T, const QuasilinearParams& p, double slope_lo = 0.9, double slope_hi = 1.1);

// Picard ratios for scale(d, a) over amplitudes a; monotone means the median
// ratio does not increase as the amplitude decreases.
StudyResult contraction_study(const LawPtr& law, const DataPtr& data, const Grid& g, const std::vector<double>& amplitudes,
                              const QuasilinearParams& p, int max_iterations = 12, double final_ratio_max = 0.75);

// Study driven by a scenario file; options come from the "study" block.
StudyResult run_study(const std::string& kind, const ScenarioConfig& c);

}  // namespace qmax
