#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pinnflow/common.hpp"
#include "pinnflow/physics.hpp"
#include "pinnflow/scales.hpp"

namespace pinnflow {

/// The four imported point populations, positions in meters, labels in SI
/// units. Boundary area weights are optional (NaN where absent); they are
/// only needed by mass-flow evaluation, never by training.
struct CollocationSet {
    int n_sd = 2;
    std::vector<double> volume_x;    // volume points, [n x n_sd]
    std::vector<double> dirichlet_x; // static Dirichlet points
    std::vector<double> dirichlet_v; // [n x n_sd] velocity labels, m/s
    std::vector<double> dirichlet_area;
    std::vector<double> neumann_x;   // pressure-outlet points
    std::vector<double> neumann_p;   // [n] pressure labels, Pa
    std::vector<double> neumann_area;
    std::vector<double> moving_x;    // parameter-dependent Dirichlet points
    std::vector<double> moving_v;
    std::vector<double> moving_area;

    int n_volume() const { return static_cast<int>(volume_x.size()) / n_sd; }
    int n_dirichlet() const { return static_cast<int>(dirichlet_x.size()) / n_sd; }
    int n_neumann() const { return static_cast<int>(neumann_x.size()) / n_sd; }
    int n_moving() const { return static_cast<int>(moving_x.size()) / n_sd; }
    bool empty() const {
        return volume_x.empty() && dirichlet_x.empty() && neumann_x.empty() && moving_x.empty();
    }
};

/// Point CSV schema: header "x,y[,z],set,vx,vy[,vz],p,area", comment lines
/// start with '#', label cells empty where not applicable. set is one of
/// f (volume), D (static Dirichlet), N (pressure outlet), M (moving
/// Dirichlet). D/M rows need velocity labels, N rows a pressure label.
/// Errors carry the file name and 1-based line number.
CollocationSet load_point_sets(const std::string& path);

/// Positions plus (optionally) velocity/pressure columns: header
/// "x,y[,z][,vx,vy[,vz],p]". has_fields() tells whether labels are present.
struct ReferenceCloud {
    int n_sd = 2;
    std::vector<double> x; // [n x n_sd] meters
    std::vector<double> v; // [n x n_sd] m/s, empty when absent
    std::vector<double> p; // [n] Pa, empty when absent
    int n_points() const { return n_sd ? static_cast<int>(x.size()) / n_sd : 0; }
    bool has_fields() const { return !p.empty(); }
};

ReferenceCloud load_reference_cloud(const std::string& path);

/// Splits the volume population uniformly at random into train/test; the
/// test share is floor(fraction * n). Boundary populations stay with the
/// train set. fraction must lie in (0,1).
std::pair<CollocationSet, CollocationSet> split_test_set(const CollocationSet& set,
                                                         double fraction, Rng& rng);

/// A geometry scenario: the admissible parameter interval, the inside
/// predicates and the transform of the moving boundary. Predicates and
/// transform operate on positions in meters. transform(x, k_reference) is
/// the identity; parametric is false when the k-interval is degenerate (the
/// network then gets no k input, but filtering still applies at the fixed k).
struct Scenario {
    std::string name = "static";
    int n_sd = 2;
    double k_min = 0.0, k_max = 0.0, k_ref = 0.0;
    bool parametric = false;
    std::function<bool(const double*, double)> inside_fdn;
    std::function<bool(const double*, double)> inside_m;
    std::function<void(const double*, double, double*)> transform;

    /// The k assigned to every point of a non-parametric run.
    double static_k() const { return k_min == k_max ? k_min : k_ref; }
};

/// Knobs of the built-in scenarios. name selects: "static" (identity,
/// always inside), "cylinder-translate" (cylinder of diameter D on the
/// z-axis, shifted to y=k), "tjunction-height" (left junction arm of height
/// k, inlet length L_IN, moving wall below H), or "file" (declarative JSON
/// predicate tree at definition_path).
struct ScenarioConfig {
    std::string name = "static";
    double k_min = 0.0;
    double k_max = 0.0;
    double diameter = 0.1;         // cylinder-translate
    double inlet_length = 0.09;    // tjunction-height
    double junction_height = 0.2;  // tjunction-height
    std::string definition_path;   // name == "file"
};

/// Builds a scenario; throws ConfigError on unknown names, bad ranges or a
/// malformed JSON definition.
Scenario make_scenario(const ScenarioConfig& cfg, int n_sd);

/// Per-point parameter values, one per point of each population, drawn
/// uniformly from [k_min, k_max] (fresh draws per call, in population order
/// volume, dirichlet, neumann, moving). Non-parametric scenarios assign
/// static_k() everywhere without consuming random numbers.
struct ParameterSample {
    std::vector<double> volume_k, dirichlet_k, neumann_k, moving_k;
};

ParameterSample sample_parameters(const CollocationSet& set, const Scenario& scenario, Rng& rng);

/// Pipeline output: the surviving points with their k values and labels.
/// Dirichlet holds filtered static points first, then transformed moving
/// points; src indices point into the source populations (moving points are
/// offset by the static Dirichlet count).
struct FilteredSet {
    int n_sd = 2;
    std::vector<double> volume_x, volume_k;
    std::vector<int> volume_src;
    std::vector<double> dirichlet_x, dirichlet_v, dirichlet_k;
    std::vector<int> dirichlet_src;
    std::vector<double> neumann_x, neumann_p, neumann_k;
    std::vector<int> neumann_src;

    int n_volume() const { return static_cast<int>(volume_k.size()); }
    int n_dirichlet() const { return static_cast<int>(dirichlet_k.size()); }
    int n_neumann() const { return static_cast<int>(neumann_k.size()); }
    bool empty() const { return volume_k.empty() && dirichlet_k.empty() && neumann_k.empty(); }
};

/// sample -> transform -> inside-filter: moving points are transformed with
/// their own k and kept where inside_m holds; volume/Neumann/static-Dirichlet
/// points are kept where inside_fdn holds; the final Dirichlet population is
/// the union of surviving static and moving points. Labels travel with their
/// points. Throws on non-finite positions or k.
FilteredSet apply_parametric_pipeline(const CollocationSet& set, const ParameterSample& ks,
                                      const Scenario& scenario);

/// Index partition of one filtered set into batches: every population is
/// shuffled and split into B = max_p ceil(N_p / max_batch) near-equal parts
/// (sizes within 1), so each batch carries a proportional share of every
/// population and the union of all batches is the input exactly once.
struct BatchIndices {
    std::vector<int> volume, dirichlet, neumann;
};

std::vector<BatchIndices> make_batches(const FilteredSet& set, int max_batch, Rng& rng);

/// Assembles the network-ready batch: positions over L_ref (k/L_ref
/// appended when parametric), velocity labels over V_ref, pressure labels
/// over rho*V_ref^2. indices == nullptr takes the whole set.
EvalBatch assemble_batch(const FilteredSet& set, const BatchIndices* indices,
                         const ReferenceScales& scales, bool parametric);

} // namespace pinnflow
