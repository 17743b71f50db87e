#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinnflow/geometry.hpp"
#include "pinnflow/network.hpp"

namespace pinnflow {

/// Pooled relative L2 error of (v, p) against a reference at the same
/// points: ||pred - ref||_2 / ||ref||_2 over all velocity components and
/// the pressure together. Arrays must be point-aligned and nondimensional
/// (so velocity and pressure are comparable). Throws on a zero-norm
/// reference or length mismatch.
double test_loss(std::span<const double> v_pred, std::span<const double> p_pred,
                 std::span<const double> v_ref, std::span<const double> p_ref);

/// Nondimensional velocity and pressure of the network at nondimensional
/// inputs (row-major [n x input_width]). v is [n x n_sd], p is [n].
void evaluate_vp(const NetworkParams& params, std::span<const double> inputs,
                 std::vector<double>& v, std::vector<double>& p);

/// Redimensionalized field prediction at query points.
struct FieldPrediction {
    int n_sd = 2;
    bool parametric = false;
    std::vector<double> x;          // [n x n_sd] meters
    std::vector<double> k;          // [n] meters (parametric checkpoints)
    std::vector<double> v;          // [n x n_sd] m/s
    std::vector<double> p;          // [n] Pa
    std::vector<char> extrapolated; // [n] 1 where k falls outside the trained range
    std::string checkpoint_id;

    int n_points() const { return n_sd ? static_cast<int>(x.size()) / n_sd : 0; }
};

/// Evaluates the checkpointed network at positions in meters with one
/// geometry parameter k (meters; ignored by static checkpoints).
/// k_range, when given, marks points as extrapolated if k lies outside it.
FieldPrediction predict_field(const Checkpoint& ckpt, std::span<const double> x_meters,
                              double k_meters = 0.0,
                              std::optional<std::array<double, 2>> k_range = std::nullopt);

/// Field export CSV: metadata comment lines (checkpoint id, scales), then
/// header x,y[,z],k,vx,vy[,vz],p,extrapolated and one row per point.
void write_field_csv(const std::string& path, const FieldPrediction& pred,
                     const ReferenceScales& scales);

/// Nearest-neighbor assignment of reference values to query positions
/// (brute force; reference clouds come without connectivity). Reports the
/// match distances so interpolation error stays visible.
struct InterpolationResult {
    std::vector<double> v; // [n x n_sd]
    std::vector<double> p; // [n]
    std::vector<int> index;
    double mean_distance = 0.0;
    double max_distance = 0.0;
};

InterpolationResult nearest_reference_interpolation(const ReferenceCloud& reference,
                                                    std::span<const double> query_x, int n_sd);

/// Quantitative comparison of a prediction against point-aligned reference
/// fields in SI units. L_test is evaluated on nondimensionalized values.
struct ErrorReport {
    double L_test = 0.0;
    int n_points = 0;
    double max_dv = 0.0;              // m/s
    std::array<double, 3> max_dv_x{}; // meters
    double max_dp = 0.0;              // Pa
    std::array<double, 3> max_dp_x{};
    std::vector<double> rms;          // per velocity component, then pressure
    double mean_match_distance = 0.0; // nearest-neighbor alignment, meters
    double max_match_distance = 0.0;
};

ErrorReport make_error_report(const FieldPrediction& pred, std::span<const double> v_ref,
                              std::span<const double> p_ref, const ReferenceScales& scales);

std::string error_report_text(const ErrorReport& report);
std::string error_report_csv(const ErrorReport& report); // header line + value line

/// Area-weighted outlet mass flow: mdot = rho * sum w_i (v_i . n).
struct OutletFlow {
    std::vector<double> v;    // [n x n_sd] m/s
    std::vector<double> area; // [n] m^2, all positive
    std::array<double, 3> normal{}; // unit outward normal
};

/// r_m = mdot_left / mdot_right. Throws on nonpositive weights, non-unit
/// normals, or mdot_right <= 0 (reverse flow dominates).
double mass_flow_ratio(const OutletFlow& left, const OutletFlow& right, double rho, int n_sd);

} // namespace pinnflow
