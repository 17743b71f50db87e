#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "pinnflow/evaluation.hpp"
#include "pinnflow/geometry.hpp"
#include "pinnflow/network.hpp"
#include "pinnflow/optim.hpp"
#include "pinnflow/physics.hpp"

namespace pinnflow {

struct TrainControls {
    int adam_iters = 10000;
    double adam_lr = 1e-3;
    int lbfgs_max_epochs = 200;
    int lbfgs_inner = 20;     // L-BFGS iterations per batch block
    int lbfgs_history = 50;
    int lbfgs_max_evals = 40; // line-search evaluation budget
    int max_batch = 1000000000;
    double test_fraction = 0.01;
    int test_interval = 100;  // iterations between test evaluations (0 = never)
    CheckpointFormat checkpoint_format = CheckpointFormat::Text;
};

struct TrainSetup {
    Scenario scenario;
    int hidden_layers = 8;
    int width = 40;
    int n_sd = 3;
    OutputMode mode = OutputMode::Mixed;
    ReferenceScales scales;
    PhysicsWeights weights;
    TrainControls controls;
    std::uint64_t seed = 1;
    std::string out_dir;         // "" disables all file output
    NetworkParams resume_params; // nonempty values -> resume from them
};

struct TrainResult {
    NetworkParams params;
    ReferenceScales scales;
    std::string termination; // descent-failure | max-epochs | non-finite-abort
    std::string error;       // message accompanying non-finite-abort
    LossBreakdown last_loss;
    std::string test_metric; // eq12 | physics-proxy | none
    double initial_test = 0.0;
    double final_test = 0.0;
    long iterations = 0; // Adam steps + L-BFGS inner iterations
    long adam_iterations = 0;
    long lbfgs_iterations = 0;
    int epochs = 0; // L-BFGS epochs completed
    int skipped_batches = 0;
    double wall_seconds = 0.0;
    std::size_t workspace_peak = 0; // bytes of loss-evaluation buffers
    std::string checkpoint_path;
};

/// Two-phase training (Adam preconditioning, then minibatch L-BFGS per
/// Fig. 2): per epoch the geometry parameter is resampled (parametric
/// scenarios), the filter pipeline reapplied and batches rebuilt; a static
/// single-batch run keeps its batch and its L-BFGS history across epochs.
/// Writes convergence.csv, run_summary.json and checkpoints into out_dir.
/// A non-finite loss aborts training, retaining the last good parameters
/// and checkpoints ("non-finite-abort"). The held-out metric is Eq. 12
/// against `reference` when given (values interpolated by nearest
/// neighbor), otherwise the physics loss on the held-out points, labeled
/// "physics-proxy".
TrainResult train(const TrainSetup& setup, const CollocationSet& data,
                  const ReferenceCloud* reference = nullptr);

/// Throws ConfigError with a field-by-field diff when checkpoint params
/// cannot continue under this setup (anything but loss weights/optimizer
/// settings must match).
void check_resume_compatible(const NetworkParams& ckpt, const TrainSetup& setup);

} // namespace pinnflow
