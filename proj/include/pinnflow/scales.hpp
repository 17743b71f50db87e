#pragma once

#include "pinnflow/common.hpp"

namespace pinnflow {

/// Reference quantities used to nondimensionalize the problem:
///   x* = x / L_ref,  v* = v / V_ref,  p* = p / (rho V_ref^2),
///   Re = rho V_ref L_ref / mu.
struct ReferenceScales {
    double L_ref = 1.0;
    double V_ref = 1.0;
    double rho = 1.0;
    double mu = 1.0;

    double reynolds() const { return rho * V_ref * L_ref / mu; }
    double pressure_scale() const { return rho * V_ref * V_ref; }

    double x_to_nondim(double x) const { return x / L_ref; }
    double v_to_nondim(double v) const { return v / V_ref; }
    double p_to_nondim(double p) const { return p / pressure_scale(); }
    double x_to_si(double xs) const { return xs * L_ref; }
    double v_to_si(double vs) const { return vs * V_ref; }
    double p_to_si(double ps) const { return ps * pressure_scale(); }

    /// Throws ConfigError naming the offending field if any scale is not
    /// strictly positive.
    void validate() const {
        if (!(L_ref > 0.0)) throw ConfigError("reference scale L_ref must be > 0");
        if (!(V_ref > 0.0)) throw ConfigError("reference scale V_ref must be > 0");
        if (!(rho > 0.0)) throw ConfigError("density rho must be > 0");
        if (!(mu > 0.0)) throw ConfigError("viscosity mu must be > 0");
    }
};

} // namespace pinnflow
