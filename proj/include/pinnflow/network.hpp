#pragma once

#include <array>
#include <string>

#include "pinnflow/autodiff.hpp"
#include "pinnflow/scales.hpp"

namespace pinnflow {

/// Maps physical roles to output slots. The mixed head (default) carries the
/// stream function, the fluid pressure and the unique Cauchy stress
/// components in this fixed slot order:
///   3D: [Psi1, Psi2, Psi3, p, s11, s12, s13, s23, s22, s33]
///   2D: [Psi,  p, s11, s12, s22]
/// The ablation heads replace the stream function with direct velocity slots
/// (no-stream-function) or drop the stress slots entirely (no-stress).
struct OutputLayout {
    int n_sd = 2;
    OutputMode mode = OutputMode::Mixed;
    int n_outputs = 0;
    int n_psi = 0; // stream-function slots (mixed only)
    int n_vel = 0; // direct velocity slots (ablations only)

    int psi(int i) const { return i; }
    int velocity(int i) const { return i; }
    int pressure() const { return n_psi + n_vel; }
    int n_stress() const { return n_sd == 3 ? 6 : 3; }
    bool has_stress() const { return mode != OutputMode::NoStress; }
    /// Unique stress components in slot order: 3D (0,0),(0,1),(0,2),(1,2),(1,1),(2,2);
    /// 2D (0,0),(0,1),(1,1).
    std::pair<int, int> stress_pair(int s) const {
        static constexpr std::array<std::pair<int, int>, 6> k3 = {
            {{0, 0}, {0, 1}, {0, 2}, {1, 2}, {1, 1}, {2, 2}}};
        static constexpr std::array<std::pair<int, int>, 3> k2 = {{{0, 0}, {0, 1}, {1, 1}}};
        return n_sd == 3 ? k3[s] : k2[s];
    }
    int stress(int a, int b) const {
        static constexpr int k3[3][3] = {{0, 1, 2}, {1, 4, 3}, {2, 3, 5}};
        static constexpr int k2[2][2] = {{0, 1}, {1, 2}};
        return pressure() + 1 + (n_sd == 3 ? k3[a][b] : k2[a][b]);
    }
    int stress_slot(int s) const { return pressure() + 1 + s; }
};

OutputLayout make_layout(int n_sd, OutputMode mode);
inline OutputLayout layout_of(const NetworkParams& p) { return make_layout(p.n_sd, p.mode); }

/// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
/// Weights are drawn layer by layer, row-major, as the first consumer of the
/// run RNG stream. Output width is fixed by (n_sd, mode).
NetworkParams init_params(int n_sd, bool parametric, int n_hidden, int width,
                          std::uint64_t seed, OutputMode mode = OutputMode::Mixed);
NetworkParams init_params(int n_sd, bool parametric, int n_hidden, int width, Rng& rng,
                          OutputMode mode = OutputMode::Mixed);

/// Derived per-point flow state, nondimensional.
struct KinematicState {
    int n_sd = 2;
    std::array<double, 3> v{};                  // velocity
    std::array<std::array<double, 3>, 3> dv{};  // dv[i][j] = d v_i / d x_j
    double p = 0.0;                             // fluid pressure output
    std::array<std::array<double, 3>, 3> sigma{};  // Cauchy stress (symmetric)
    std::array<double, 3> div_sigma{};          // divergence of sigma
    std::array<double, 3> dp{};                 // pressure gradient (no-stress head)
    std::array<double, 3> lap_v{};              // velocity Laplacian (no-stress head)
    double div_v = 0.0;                         // velocity divergence
};

/// Velocity only; requires first derivatives (mixed head) or values
/// (ablation heads). Acc provides value(i,slot) and jac(i,slot,j).
template <class Acc>
inline void velocity_at(const Acc& a, int i, const OutputLayout& lay, double v[3]) {
    if (lay.mode == OutputMode::Mixed) {
        if (lay.n_sd == 2) {
            v[0] = a.jac(i, lay.psi(0), 1);
            v[1] = -a.jac(i, lay.psi(0), 0);
            v[2] = 0.0;
        } else {
            v[0] = a.jac(i, lay.psi(2), 1) - a.jac(i, lay.psi(1), 2);
            v[1] = a.jac(i, lay.psi(0), 2) - a.jac(i, lay.psi(2), 0);
            v[2] = a.jac(i, lay.psi(1), 0) - a.jac(i, lay.psi(0), 1);
        }
    } else {
        for (int c = 0; c < lay.n_sd; ++c) v[c] = a.value(i, lay.velocity(c));
        if (lay.n_sd == 2) v[2] = 0.0;
    }
}

/// Full kinematic state; requires second derivatives. Acc provides
/// value(i,slot), jac(i,slot,j) and hess(i,slot,j,k).
template <class Acc>
inline KinematicState kinematics_at(const Acc& a, int i, const OutputLayout& lay) {
    KinematicState s;
    s.n_sd = lay.n_sd;
    velocity_at(a, i, lay, s.v.data());
    const int nd = lay.n_sd;
    if (lay.mode == OutputMode::Mixed) {
        if (nd == 2) {
            for (int j = 0; j < 2; ++j) {
                s.dv[0][j] = a.hess(i, lay.psi(0), 1, j);
                s.dv[1][j] = -a.hess(i, lay.psi(0), 0, j);
            }
        } else {
            for (int j = 0; j < 3; ++j) {
                s.dv[0][j] = a.hess(i, lay.psi(2), 1, j) - a.hess(i, lay.psi(1), 2, j);
                s.dv[1][j] = a.hess(i, lay.psi(0), 2, j) - a.hess(i, lay.psi(2), 0, j);
                s.dv[2][j] = a.hess(i, lay.psi(1), 0, j) - a.hess(i, lay.psi(0), 1, j);
            }
        }
    } else {
        for (int c = 0; c < nd; ++c)
            for (int j = 0; j < nd; ++j) s.dv[c][j] = a.jac(i, lay.velocity(c), j);
        for (int c = 0; c < nd; ++c) {
            s.lap_v[c] = 0.0;
            for (int j = 0; j < nd; ++j) s.lap_v[c] += a.hess(i, lay.velocity(c), j, j);
        }
    }
    s.p = a.value(i, lay.pressure());
    for (int j = 0; j < nd; ++j) s.dp[j] = a.jac(i, lay.pressure(), j);
    if (lay.has_stress()) {
        for (int t = 0; t < lay.n_stress(); ++t) {
            auto [pa, pb] = lay.stress_pair(t);
            const double val = a.value(i, lay.stress_slot(t));
            s.sigma[pa][pb] = val;
            s.sigma[pb][pa] = val;
        }
        for (int c = 0; c < nd; ++c) {
            s.div_sigma[c] = 0.0;
            for (int j = 0; j < nd; ++j) s.div_sigma[c] += a.jac(i, lay.stress(c, j), j);
        }
    }
    s.div_v = 0.0;
    for (int c = 0; c < nd; ++c) s.div_v += s.dv[c][c];
    return s;
}

/// Adapter so the templates above work on a public DerivativeBundle.
struct BundleAccess {
    const DerivativeBundle& b;
    double value(int, int slot) const { return b.value[slot]; }
    double jac(int, int slot, int j) const { return b.jac(slot, j); }
    double hess(int, int slot, int j, int k) const { return b.hess(slot, j, k); }
};

/// Spec-level convenience: full state from one bundle.
KinematicState kinematics_from_bundle(const DerivativeBundle& bundle, const OutputLayout& lay);

enum class CheckpointFormat { Text, Binary };

struct Checkpoint {
    NetworkParams params;
    ReferenceScales scales;
    int format_version = 1;
};

/// Writes header (format version, n_sd, parametric flag, output mode, layer
/// widths, activation, reference scales, seed) plus the canonical parameter
/// vector. The text encoding stores doubles as hexadecimal floats so both
/// formats round-trip bit-exactly.
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const ReferenceScales& scales, CheckpointFormat format);

/// Loads either encoding (detected from the leading magic). Throws
/// ConfigError on missing/truncated/inconsistent files.
Checkpoint load_checkpoint(const std::string& path);

/// Content hash of the parameter vector (FNV-1a, 16 hex digits); used as the
/// checkpoint id in exported file headers.
std::string checkpoint_id(const NetworkParams& params);

} // namespace pinnflow
