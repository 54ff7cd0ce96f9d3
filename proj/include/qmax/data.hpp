#pragma once

#include "qmax/grid.hpp"
#include "qmax/material.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qmax {

// Data tuple (u0, f, g) of an initial boundary value problem. Boundary data is
// given on the physical face x3 = 0 and on the artificial far face x3 = H.
class ScenarioData {
public:
    virtual ~ScenarioData() = default;

    virtual std::string name() const = 0;
    virtual Field initial(const Grid& g, double t0) const = 0;

    virtual bool has_source() const { return false; }
    virtual void source(const Grid& g, double t, Field& out) const;
    virtual bool has_boundary_data() const { return false; }
    virtual void boundary(const Grid& g, double t, bool top, FaceData& out) const;

    // Time derivatives d^k/dt^k at t0 for k < count.
    virtual std::vector<Field> source_jets(const Grid& g, double t0, int count) const;
    virtual std::vector<FaceData> boundary_jets(const Grid& g, double t0, int count, bool top) const;

    virtual std::optional<Field> exact(const Grid&, double) const { return std::nullopt; }
    // Jets of the data are analytic (compatibility residuals are exact zeros up
    // to roundoff) rather than affected by spatial discretization.
    virtual bool analytic_compat() const { return true; }

    virtual nlohmann::json describe() const = 0;
};

using DataPtr = std::shared_ptr<const ScenarioData>;

// Registry: "zero", "plane-wave", "pulse", "colliding-pulses", "manufactured",
// "affine-exact", "boundary-forcing".
DataPtr make_data(const std::string& name, const nlohmann::json& params, LawPtr law);
std::vector<std::string> data_names();

// (s u0, s f, s g).
DataPtr scale_data(DataPtr base, double s);

// Smooth compactly supported profile (1 - r^2)^5 on r < 1.
double bump(double r2);

}  // namespace qmax
