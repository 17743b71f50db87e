#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pinnflow/network.hpp"
#include "pinnflow/scales.hpp"

namespace pinnflow {

/// Nondimensional residuals of the steady mixed-variable system at a point:
///   momentum:  (v.grad) v - div sigma                     (n_sd components)
///   stress:    (1/Re)(grad v + grad v^T) - p I - sigma    (unique components)
///   trace:     p + tr(sigma) / n_sd
/// The no-stress head folds the constitutive law into the momentum residual,
///   (v.grad) v + grad p - (1/Re) laplace v,
/// and has no stress or trace residual.
struct ResidualVector {
    int n_sd = 2;
    int n_stress = 0;
    std::array<double, 3> momentum{};
    std::array<double, 6> stress{}; // unique components in layout slot order
    double trace = 0.0;
};

ResidualVector compute_residuals(const KinematicState& state, double reynolds, OutputMode mode);

/// Loss components. Every component is a mean over its point set AND over
/// the vector/tensor components inside each term; empty sets contribute 0.
struct LossBreakdown {
    double L_D = 0.0;     // Dirichlet velocity MSE
    double L_N = 0.0;     // Neumann pressure MSE
    double L_v = 0.0;     // momentum residual MSE
    double L_sigma = 0.0; // stress residual MSE
    double L_p = 0.0;     // trace residual MSE
    double f_bc = 1.0;
    double f_sigma = 1.0;
    int n_volume = 0, n_dirichlet = 0, n_neumann = 0;

    double physics() const { return L_v + f_sigma * L_sigma + L_p; }
    double total() const { return f_bc * (L_D + L_N) + physics(); }
};

/// Loss weights (defaults follow the production configuration).
struct PhysicsWeights {
    double f_bc = 10.0;
    double f_sigma = 1.0;
};

/// Pure assembly of the weighted loss from precomputed residuals and
/// boundary errors; the independent counterpart of the fused training
/// evaluator. Dirichlet errors are per-point velocity error vectors,
/// Neumann errors per-point pressure errors (all nondimensional).
/// Throws std::invalid_argument if every set is empty.
LossBreakdown assemble_loss(std::span<const ResidualVector> volume,
                            std::span<const std::array<double, 3>> dirichlet_errors,
                            std::span<const double> neumann_errors, int n_sd,
                            PhysicsWeights weights);

/// One optimizer step's worth of nondimensional, label-carrying point data.
/// Inputs are row-major [n x input_width] network inputs (spatial coordinates
/// over L_ref, plus k/L_ref when the network is parametric).
struct EvalBatch {
    std::vector<double> volume_x;
    std::vector<double> dirichlet_x;
    std::vector<double> dirichlet_v; // [n x n_sd] nondimensional velocity labels
    std::vector<double> neumann_x;
    std::vector<double> neumann_p;   // [n] nondimensional pressure labels
    int input_width = 2;

    int n_volume() const { return static_cast<int>(volume_x.size()) / input_width; }
    int n_dirichlet() const { return static_cast<int>(dirichlet_x.size()) / input_width; }
    int n_neumann() const { return static_cast<int>(neumann_x.size()) / input_width; }
    bool empty() const { return volume_x.empty() && dirichlet_x.empty() && neumann_x.empty(); }
};

/// Fused loss + parameter gradient over one batch. Volume points are
/// evaluated at order 2, Dirichlet at order 1, Neumann at order 0; spatial
/// inputs only are differentiated. grad is assigned (not accumulated).
/// workspace_bytes, when given, receives the peak batch-proportional buffer
/// size of the evaluation. Throws NumericError on a non-finite loss.
LossBreakdown batch_loss_gradient(const NetworkParams& params, const EvalBatch& batch,
                                  double reynolds, PhysicsWeights weights,
                                  std::vector<double>& grad,
                                  std::size_t* workspace_bytes = nullptr);

/// Loss only (used for held-out monitoring).
LossBreakdown batch_loss(const NetworkParams& params, const EvalBatch& batch, double reynolds,
                         PhysicsWeights weights);

/// Same quantities through the serial reference evaluator; kept for tests.
LossBreakdown reference_batch_loss_gradient(const NetworkParams& params, const EvalBatch& batch,
                                            double reynolds, PhysicsWeights weights,
                                            std::vector<double>& grad);

} // namespace pinnflow
