#pragma once

#include "qmax/jet.hpp"
#include "qmax/types.hpp"

#include <json.hpp>

#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace qmax {

using Vec3T = Eigen::Matrix<Taylor, 3, 1>;
using Vec6T = Eigen::Matrix<Taylor, 6, 1>;
using Mat3T = Eigen::Matrix<Taylor, 3, 3>;
using Mat6T = Eigen::Matrix<Taylor, 6, 6>;

// Admissible state set U with an analytic distance to its boundary.
struct StateDomain {
    enum class Kind { whole, ball, e_ball, e_slab };
    Kind kind = Kind::whole;
    double radius = std::numeric_limits<double>::infinity();
    int axis = 0;

    static StateDomain whole_space() { return {}; }
    static StateDomain ball(double r) { return {Kind::ball, r, 0}; }
    static StateDomain e_ball(double r) { return {Kind::e_ball, r, 0}; }
    static StateDomain e_slab(double r, int axis) { return {Kind::e_slab, r, axis}; }

    std::string name() const;
    // Distance of an interior point to the boundary; 0 outside, +inf for the whole space.
    double distance(const Vec6& u) const;
    bool contains(const Vec6& u) const { return distance(u) > 0.0; }
    // Tangential traces xi = E x nu (nu = -e3) that arise from states in U.
    bool trace_admissible(const Vec3& xi) const;
    double trace_radius() const;
    Vec6 sample(std::mt19937_64& rng, double fill = 0.9) const;
};

class MaterialLaw {
public:
    virtual ~MaterialLaw() = default;

    virtual std::string name() const = 0;
    virtual double eta() const = 0;
    virtual const StateDomain& domain() const = 0;

    virtual Vec6 theta(const Vec3& x, const Vec6& u) const = 0;
    virtual Mat6 chi(const Vec3& x, const Vec6& u) const = 0;
    virtual Mat6 sigma(const Vec3& x, const Vec6& u) const = 0;
    virtual Mat3 zeta(const Vec3& x, const Vec3& xi) const = 0;

    virtual Mat6T chi(const Vec3& x, const Vec6T& u) const = 0;
    virtual Mat6T sigma(const Vec3& x, const Vec6T& u) const = 0;
    virtual Mat3T zeta(const Vec3& x, const Vec3T& xi) const = 0;

    virtual bool chi_depends_on_state() const = 0;
    virtual bool sigma_depends_on_state() const = 0;
    virtual bool zeta_depends_on_state() const = 0;
    bool is_linear() const {
        return !chi_depends_on_state() && !sigma_depends_on_state() && !zeta_depends_on_state();
    }
    // Largest jet order available through the Taylor closures.
    int max_jet_order() const { return Taylor::N; }

    virtual nlohmann::json params() const = 0;
};

using LawPtr = std::shared_ptr<const MaterialLaw>;

// Registry: "linear", "kerr", "aniso-demo". Unknown keys throw config_invalid.
LawPtr make_law(const std::string& name, const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> law_names();

// Nonlinear boundary operator B(u)u = tr_t H - nu x (zeta(tr_t E) tr_t E).
Vec3 apply_B(const MaterialLaw& law, const Vec3& x, const Vec6& u, const Vec3& nu);

struct LawValidation {
    int samples = 0;
    double symmetry_defect = 0.0;
    double min_eig_chi = 0.0;
    double min_eig_zeta = 0.0;
    double jacobian_defect = 0.0;
    double jacobian_slope = 0.0;
    double tangentiality_defect = 0.0;
    double sigma_block_defect = 0.0;
    bool ok = true;
    std::string offending;
    nlohmann::json to_json() const;
};

LawValidation validate_material_law(const MaterialLaw& law, int sample_count,
                                    std::uint64_t seed = 1234, bool throw_on_failure = true);

}  // namespace qmax
