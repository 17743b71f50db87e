#pragma once

#include <cstdint>
#include <string>

#include "pinnflow/geometry.hpp"

namespace pinnflow {

/// Built-in domain samplers for the bundled test cases. Positions and labels
/// are in SI units and round-trip through write_point_csv/load_point_sets.
///
/// channel2d: plane Poiseuille channel, box [0,2] x [-0.5,0.5] m.
///   Inlet x=0 with u(y) = u_max (1 - 4 y^2), no-slip walls at y = +-0.5,
///   pressure outlet p=0 at x=2. With rho=1, mu=0.02, L_ref=V_ref=1 the
///   analytic solution is u = 1 - 4 y^2, v = 0, p = 0.16 (2 - x).
///
/// cylinder3d: tunnel x in [-0.15,0.95], y in [-0.15,0.26], z in [0,0.4] m
///   with a diameter-0.1 cylinder along the z axis through the origin.
///   Bi-quadratic inflow at x=-0.15 (peak 1 m/s on the tunnel centerline
///   y=0.055, z=0.2), no-slip tunnel walls and cylinder, pressure outlet
///   at x=0.95. In the parametric variant the cylinder surface is tagged M
///   (as-built at k=0) and volume points also cover the positions swept by
///   a vertical displacement k in [-0.05,0.05].
///
/// tjunction3d: T-junction, depth z in [0,0.1] m. Horizontal duct
///   x in [-0.15,0.15]: left arm height k (as-built 0.03, variable up to
///   0.07), right arm height 0.08. Vertical inlet duct x in [-0.045,0.045]
///   up to y=0.2 with a bi-quadratic downward inflow (peak 1 m/s). Pressure
///   outlets at both arm ends; the left-arm ceiling and the part of the
///   inlet-duct left wall above it are tagged M (they rise with k).

CollocationSet sample_channel2d(int n_volume, std::uint64_t seed);

/// Analytic Poiseuille solution for the channel2d case (SI units).
void channel2d_solution(double x, double y, double& u, double& v, double& p);

/// Reference cloud holding the analytic solution at the given 2D points.
ReferenceCloud channel2d_reference(const std::vector<double>& points_xy);

CollocationSet sample_cylinder3d(int n_volume, std::uint64_t seed, bool parametric);

CollocationSet sample_tjunction3d(int n_volume, std::uint64_t seed);

/// Dispatch by case name: "channel2d", "cylinder3d", "cylinder3d-parametric",
/// "tjunction3d". Unknown names are rejected.
CollocationSet sample_case(const std::string& name, int n_volume, std::uint64_t seed);

/// Writes the point CSV schema read back by load_point_sets (%.17g, exact
/// round-trip). Label cells are left empty where not applicable.
void write_point_csv(const std::string& path, const CollocationSet& set);

/// Writes a reference cloud ("x,y[,z],vx,vy[,vz],p" or positions only).
void write_reference_csv(const std::string& path, const ReferenceCloud& cloud);

} // namespace pinnflow
