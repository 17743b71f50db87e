#pragma once

#include <cstdint>
#include <string>

#include "pinnflow/geometry.hpp"
#include "pinnflow/training.hpp"

namespace pinnflow {

/// Parsed run configuration. File format: INI-style sections [scenario],
/// [network], [scales], [loss], [optim], [data], [output] with key = value
/// lines; '#' or ';' start comment lines. Unknown sections or keys are
/// rejected; all paths are resolved relative to the config file.
struct RunConfig {
    ScenarioConfig scenario;
    int n_sd = 3;
    int hidden_layers = 8;
    int width = 40;
    OutputMode mode = OutputMode::Mixed;
    std::uint64_t seed = 1;
    ReferenceScales scales;
    PhysicsWeights weights;
    TrainControls controls;
    std::string points_path;
    std::string reference_path; // optional
    std::string out_dir;
};

RunConfig load_run_config(const std::string& path);

/// Builds the scenario and bundles everything train() needs.
TrainSetup make_train_setup(const RunConfig& cfg);

} // namespace pinnflow
