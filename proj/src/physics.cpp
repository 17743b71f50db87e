#include "pinnflow/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pinnflow {

ResidualVector compute_residuals(const KinematicState& s, double reynolds, OutputMode mode) {
    if (!(reynolds > 0.0))
        throw std::invalid_argument("Reynolds number must be > 0");
    ResidualVector r;
    r.n_sd = s.n_sd;
    const int nd = s.n_sd;
    if (mode == OutputMode::NoStress) {
        // Constitutive law folded in: (v.grad)v + grad p - (1/Re) laplace v.
        r.n_stress = 0;
        for (int c = 0; c < nd; ++c) {
            double conv = 0.0;
            for (int j = 0; j < nd; ++j) conv += s.v[j] * s.dv[c][j];
            r.momentum[c] = conv + s.dp[c] - s.lap_v[c] / reynolds;
        }
        return r;
    }
    const OutputLayout lay = make_layout(nd, OutputMode::Mixed);
    r.n_stress = lay.n_stress();
    for (int c = 0; c < nd; ++c) {
        double conv = 0.0;
        for (int j = 0; j < nd; ++j) conv += s.v[j] * s.dv[c][j];
        r.momentum[c] = conv - s.div_sigma[c];
    }
    for (int t = 0; t < r.n_stress; ++t) {
        auto [a, b] = lay.stress_pair(t);
        r.stress[t] = (s.dv[a][b] + s.dv[b][a]) / reynolds - (a == b ? s.p : 0.0) -
                      s.sigma[a][b];
    }
    double tr = 0.0;
    for (int c = 0; c < nd; ++c) tr += s.sigma[c][c];
    r.trace = s.p + tr / nd;
    return r;
}

LossBreakdown assemble_loss(std::span<const ResidualVector> volume,
                            std::span<const std::array<double, 3>> dirichlet_errors,
                            std::span<const double> neumann_errors, int n_sd,
                            PhysicsWeights weights) {
    if (volume.empty() && dirichlet_errors.empty() && neumann_errors.empty())
        throw std::invalid_argument("assemble_loss: every point set is empty");
    LossBreakdown L;
    L.f_bc = weights.f_bc;
    L.f_sigma = weights.f_sigma;
    L.n_volume = static_cast<int>(volume.size());
    L.n_dirichlet = static_cast<int>(dirichlet_errors.size());
    L.n_neumann = static_cast<int>(neumann_errors.size());
    if (!volume.empty()) {
        double sv = 0.0, ss = 0.0, sp = 0.0;
        const int n_stress = volume[0].n_stress;
        for (const auto& r : volume) {
            for (int c = 0; c < n_sd; ++c) sv += r.momentum[c] * r.momentum[c];
            for (int t = 0; t < r.n_stress; ++t) ss += r.stress[t] * r.stress[t];
            sp += r.trace * r.trace;
        }
        L.L_v = sv / (static_cast<double>(volume.size()) * n_sd);
        if (n_stress > 0) {
            L.L_sigma = ss / (static_cast<double>(volume.size()) * n_stress);
            L.L_p = sp / static_cast<double>(volume.size());
        }
    }
    if (!dirichlet_errors.empty()) {
        double sd = 0.0;
        for (const auto& e : dirichlet_errors)
            for (int c = 0; c < n_sd; ++c) sd += e[c] * e[c];
        L.L_D = sd / (static_cast<double>(dirichlet_errors.size()) * n_sd);
    }
    if (!neumann_errors.empty()) {
        double sn = 0.0;
        for (double e : neumann_errors) sn += e * e;
        L.L_N = sn / static_cast<double>(neumann_errors.size());
    }
    return L;
}

namespace {

// Adjoint of the velocity/velocity-gradient assembly: scatters d(loss)/dv and
// d(loss)/d(grad v) back onto the output slots (the mirror image of
// velocity_at / kinematics_at).
template <class Acc>
void seed_velocity(Acc& acc, int i, const OutputLayout& lay, const double vbar[3],
                   const double (*dvbar)[3]) {
    const int nd = lay.n_sd;
    if (lay.mode == OutputMode::Mixed) {
        if (nd == 2) {
            acc.add_seed_jac(i, lay.psi(0), 1, vbar[0]);
            acc.add_seed_jac(i, lay.psi(0), 0, -vbar[1]);
            if (dvbar)
                for (int j = 0; j < 2; ++j) {
                    acc.add_seed_hess(i, lay.psi(0), 1, j, dvbar[0][j]);
                    acc.add_seed_hess(i, lay.psi(0), 0, j, -dvbar[1][j]);
                }
        } else {
            acc.add_seed_jac(i, lay.psi(2), 1, vbar[0]);
            acc.add_seed_jac(i, lay.psi(1), 2, -vbar[0]);
            acc.add_seed_jac(i, lay.psi(0), 2, vbar[1]);
            acc.add_seed_jac(i, lay.psi(2), 0, -vbar[1]);
            acc.add_seed_jac(i, lay.psi(1), 0, vbar[2]);
            acc.add_seed_jac(i, lay.psi(0), 1, -vbar[2]);
            if (dvbar)
                for (int j = 0; j < 3; ++j) {
                    acc.add_seed_hess(i, lay.psi(2), 1, j, dvbar[0][j]);
                    acc.add_seed_hess(i, lay.psi(1), 2, j, -dvbar[0][j]);
                    acc.add_seed_hess(i, lay.psi(0), 2, j, dvbar[1][j]);
                    acc.add_seed_hess(i, lay.psi(2), 0, j, -dvbar[1][j]);
                    acc.add_seed_hess(i, lay.psi(1), 0, j, dvbar[2][j]);
                    acc.add_seed_hess(i, lay.psi(0), 1, j, -dvbar[2][j]);
                }
        }
    } else {
        for (int c = 0; c < nd; ++c) acc.add_seed_value(i, lay.velocity(c), vbar[c]);
        if (dvbar)
            for (int c = 0; c < nd; ++c)
                for (int j = 0; j < nd; ++j) acc.add_seed_jac(i, lay.velocity(c), j, dvbar[c][j]);
    }
}

// Volume point: residuals, raw squared sums, loss seeds. wv/wsig/wp are the
// derivative weights of the total loss (they carry the batch means and the
// loss weights). Returns the point's weighted loss contribution.
template <class Acc>
double volume_point(Acc& acc, int i, const OutputLayout& lay, double Re, double wv, double wsig,
                    double wp, double& sum_v, double& sum_sig, double& sum_p) {
    const int nd = lay.n_sd;
    const KinematicState s = kinematics_at(acc, i, lay);
    const ResidualVector r = compute_residuals(s, Re, lay.mode);

    double contrib = 0.0;
    double vbar[3] = {0.0, 0.0, 0.0};
    double dvbar[3][3] = {{0.0}};
    double rm_bar[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < nd; ++c) {
        sum_v += r.momentum[c] * r.momentum[c];
        contrib += wv * r.momentum[c] * r.momentum[c];
        rm_bar[c] = 2.0 * wv * r.momentum[c];
    }
    // Convective part is common to all heads.
    for (int c = 0; c < nd; ++c)
        for (int j = 0; j < nd; ++j) {
            dvbar[c][j] += rm_bar[c] * s.v[j];
            vbar[j] += rm_bar[c] * s.dv[c][j];
        }
    if (lay.mode == OutputMode::NoStress) {
        for (int c = 0; c < nd; ++c) {
            acc.add_seed_jac(i, lay.pressure(), c, rm_bar[c]);
            for (int j = 0; j < nd; ++j)
                acc.add_seed_hess(i, lay.velocity(c), j, j, -rm_bar[c] / Re);
        }
    } else {
        // d(momentum_c)/d(sigma_cj,j) = -1: scatter div-sigma adjoints onto
        // the stress slots' spatial derivatives.
        for (int c = 0; c < nd; ++c)
            for (int j = 0; j < nd; ++j) acc.add_seed_jac(i, lay.stress(c, j), j, -rm_bar[c]);
        double pbar = 0.0;
        for (int t = 0; t < r.n_stress; ++t) {
            auto [a, b] = lay.stress_pair(t);
            sum_sig += r.stress[t] * r.stress[t];
            contrib += wsig * r.stress[t] * r.stress[t];
            const double rb = 2.0 * wsig * r.stress[t];
            dvbar[a][b] += rb / Re;
            dvbar[b][a] += rb / Re;
            if (a == b) pbar -= rb;
            acc.add_seed_value(i, lay.stress_slot(t), -rb);
        }
        sum_p += r.trace * r.trace;
        contrib += wp * r.trace * r.trace;
        const double tb = 2.0 * wp * r.trace;
        pbar += tb;
        for (int c = 0; c < nd; ++c) acc.add_seed_value(i, lay.stress(c, c), tb / nd);
        acc.add_seed_value(i, lay.pressure(), pbar);
    }
    seed_velocity(acc, i, lay, vbar, dvbar);
    return contrib;
}

template <class Acc>
double dirichlet_point(Acc& acc, int i, const OutputLayout& lay, const double* label, double wD,
                       double& sum_D) {
    const int nd = lay.n_sd;
    double v[3];
    velocity_at(acc, i, lay, v);
    double vbar[3] = {0.0, 0.0, 0.0};
    double contrib = 0.0;
    for (int c = 0; c < nd; ++c) {
        const double e = v[c] - label[c];
        sum_D += e * e;
        contrib += wD * e * e;
        vbar[c] = 2.0 * wD * e;
    }
    seed_velocity(acc, i, lay, vbar, nullptr);
    return contrib;
}

template <class Acc>
double neumann_point(Acc& acc, int i, const OutputLayout& lay, double label, double wN,
                     double& sum_N) {
    const double e = acc.value(i, lay.pressure()) - label;
    sum_N += e * e;
    acc.add_seed_value(i, lay.pressure(), 2.0 * wN * e);
    return wN * e * e;
}

// Adapter: per-point loss functions reading one full-Hessian bundle and
// seeding its mirror (used by the serial reference path).
struct SeedBundleAccess {
    const DerivativeBundle& b;
    DerivativeBundle& s;
    double value(int, int slot) const { return b.value[slot]; }
    double jac(int, int slot, int j) const { return b.jac(slot, j); }
    double hess(int, int slot, int j, int k) const { return b.hess(slot, j, k); }
    void add_seed_value(int, int slot, double v) { s.value[slot] += v; }
    void add_seed_jac(int, int slot, int j, double v) {
        s.jacobian[static_cast<std::size_t>(slot) * s.n_in + j] += v;
    }
    void add_seed_hess(int, int slot, int j, int k, double v) {
        s.hessian[(static_cast<std::size_t>(slot) * s.n_in + j) * s.n_in + k] += v;
    }
};

struct PopWeights {
    double wv = 0.0, wsig = 0.0, wp = 0.0, wD = 0.0, wN = 0.0;
};

PopWeights make_weights(const EvalBatch& batch, int n_sd, int n_stress, PhysicsWeights w,
                        bool has_stress) {
    PopWeights pw;
    if (batch.n_volume() > 0) {
        pw.wv = 1.0 / (static_cast<double>(batch.n_volume()) * n_sd);
        if (has_stress) {
            pw.wsig = w.f_sigma / (static_cast<double>(batch.n_volume()) * n_stress);
            pw.wp = 1.0 / static_cast<double>(batch.n_volume());
        }
    }
    if (batch.n_dirichlet() > 0)
        pw.wD = w.f_bc / (static_cast<double>(batch.n_dirichlet()) * n_sd);
    if (batch.n_neumann() > 0) pw.wN = w.f_bc / static_cast<double>(batch.n_neumann());
    return pw;
}

// Locates the first point whose contribution is non-finite, for diagnostics.
[[noreturn]] void throw_non_finite(const char* population, int index) {
    throw NumericError(std::string("non-finite loss contribution (") + population + " point " +
                       std::to_string(index) + ")");
}

} // namespace

static LossBreakdown evaluate_batch(const NetworkParams& params, const EvalBatch& batch,
                                    double reynolds, PhysicsWeights weights,
                                    std::vector<double>* grad, std::size_t* workspace_bytes) {
    if (batch.empty()) throw std::invalid_argument("loss evaluation on an empty batch");
    if (batch.input_width != params.input_width())
        throw std::invalid_argument("batch input width does not match the network");
    const OutputLayout lay = layout_of(params);
    const int nd = params.n_sd;
    const PopWeights pw = make_weights(batch, nd, lay.n_stress(), weights, lay.has_stress());

    LossBreakdown L;
    L.f_bc = weights.f_bc;
    L.f_sigma = weights.f_sigma;
    L.n_volume = batch.n_volume();
    L.n_dirichlet = batch.n_dirichlet();
    L.n_neumann = batch.n_neumann();
    if (grad) grad->assign(params.param_count(), 0.0);
    std::size_t ws = 0;

    if (batch.n_volume() > 0) {
        BatchEval be(params, 2, nd);
        be.forward(batch.volume_x);
        const int n = be.n_points();
        const int nchunks = (n + BatchEval::kChunk - 1) / BatchEval::kChunk;
        std::vector<std::array<double, 3>> part(nchunks, {0.0, 0.0, 0.0});
#pragma omp parallel for schedule(dynamic, 1)
        for (int c = 0; c < nchunks; ++c) {
            const int end = std::min(n, (c + 1) * BatchEval::kChunk);
            for (int i = c * BatchEval::kChunk; i < end; ++i)
                volume_point(be, i, lay, reynolds, pw.wv, pw.wsig, pw.wp, part[c][0],
                             part[c][1], part[c][2]);
        }
        double sv = 0.0, ss = 0.0, sp = 0.0;
        for (const auto& s : part) {
            sv += s[0];
            ss += s[1];
            sp += s[2];
        }
        L.L_v = sv / (static_cast<double>(n) * nd);
        if (lay.has_stress()) {
            L.L_sigma = ss / (static_cast<double>(n) * lay.n_stress());
            L.L_p = sp / static_cast<double>(n);
        }
        if (!std::isfinite(L.L_v + L.L_sigma + L.L_p)) {
            for (int i = 0; i < n; ++i) {
                double a = 0.0, b = 0.0, c2 = 0.0;
                BatchEval& benc = be;
                if (!std::isfinite(volume_point(benc, i, lay, reynolds, 0.0, 0.0, 0.0, a, b, c2) +
                                   a + b + c2))
                    throw_non_finite("volume", i);
            }
            throw_non_finite("volume", -1);
        }
        if (grad) be.reverse(*grad);
        ws = std::max(ws, be.workspace_bytes());
    }
    if (batch.n_dirichlet() > 0) {
        BatchEval be(params, 1, nd);
        be.forward(batch.dirichlet_x);
        const int n = be.n_points();
        const int nchunks = (n + BatchEval::kChunk - 1) / BatchEval::kChunk;
        std::vector<double> part(nchunks, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
        for (int c = 0; c < nchunks; ++c) {
            const int end = std::min(n, (c + 1) * BatchEval::kChunk);
            for (int i = c * BatchEval::kChunk; i < end; ++i)
                dirichlet_point(be, i, lay, batch.dirichlet_v.data() + static_cast<std::size_t>(i) * nd,
                                pw.wD, part[c]);
        }
        double sd = 0.0;
        for (double s : part) sd += s;
        L.L_D = sd / (static_cast<double>(n) * nd);
        if (!std::isfinite(L.L_D)) {
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                dirichlet_point(be, i, lay, batch.dirichlet_v.data() + static_cast<std::size_t>(i) * nd,
                                0.0, s);
                if (!std::isfinite(s)) throw_non_finite("dirichlet", i);
            }
            throw_non_finite("dirichlet", -1);
        }
        if (grad) be.reverse(*grad);
        ws = std::max(ws, be.workspace_bytes());
    }
    if (batch.n_neumann() > 0) {
        BatchEval be(params, 0, nd);
        be.forward(batch.neumann_x);
        const int n = be.n_points();
        double sn = 0.0;
        for (int i = 0; i < n; ++i) neumann_point(be, i, lay, batch.neumann_p[i], pw.wN, sn);
        L.L_N = sn / static_cast<double>(n);
        if (!std::isfinite(L.L_N)) {
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                neumann_point(be, i, lay, batch.neumann_p[i], 0.0, s);
                if (!std::isfinite(s)) throw_non_finite("neumann", i);
            }
            throw_non_finite("neumann", -1);
        }
        if (grad) be.reverse(*grad);
        ws = std::max(ws, be.workspace_bytes());
    }
    if (workspace_bytes) *workspace_bytes = ws;
    return L;
}

LossBreakdown batch_loss_gradient(const NetworkParams& params, const EvalBatch& batch,
                                  double reynolds, PhysicsWeights weights,
                                  std::vector<double>& grad, std::size_t* workspace_bytes) {
    return evaluate_batch(params, batch, reynolds, weights, &grad, workspace_bytes);
}

LossBreakdown batch_loss(const NetworkParams& params, const EvalBatch& batch, double reynolds,
                         PhysicsWeights weights) {
    return evaluate_batch(params, batch, reynolds, weights, nullptr, nullptr);
}

LossBreakdown reference_batch_loss_gradient(const NetworkParams& params, const EvalBatch& batch,
                                            double reynolds, PhysicsWeights weights,
                                            std::vector<double>& grad) {
    if (batch.empty()) throw std::invalid_argument("loss evaluation on an empty batch");
    const OutputLayout lay = layout_of(params);
    const int nd = params.n_sd;
    const PopWeights pw = make_weights(batch, nd, lay.n_stress(), weights, lay.has_stress());
    grad.assign(params.param_count(), 0.0);
    LossBreakdown L;
    L.f_bc = weights.f_bc;
    L.f_sigma = weights.f_sigma;
    L.n_volume = batch.n_volume();
    L.n_dirichlet = batch.n_dirichlet();
    L.n_neumann = batch.n_neumann();

    auto accumulate = [&grad](const std::vector<double>& g) {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k];
    };
    if (batch.n_volume() > 0) {
        double sv = 0.0, ss = 0.0, sp = 0.0;
        auto [loss, g] = reference::loss_parameter_gradient(
            params, batch.volume_x, 2,
            [&](int, const DerivativeBundle& b, DerivativeBundle& seed) {
                SeedBundleAccess acc{b, seed};
                return volume_point(acc, 0, lay, reynolds, pw.wv, pw.wsig, pw.wp, sv, ss, sp);
            });
        (void)loss;
        accumulate(g);
        L.L_v = sv / (static_cast<double>(batch.n_volume()) * nd);
        if (lay.has_stress()) {
            L.L_sigma = ss / (static_cast<double>(batch.n_volume()) * lay.n_stress());
            L.L_p = sp / static_cast<double>(batch.n_volume());
        }
    }
    if (batch.n_dirichlet() > 0) {
        double sd = 0.0;
        auto [loss, g] = reference::loss_parameter_gradient(
            params, batch.dirichlet_x, 1,
            [&](int i, const DerivativeBundle& b, DerivativeBundle& seed) {
                SeedBundleAccess acc{b, seed};
                return dirichlet_point(acc, 0, lay,
                                       batch.dirichlet_v.data() + static_cast<std::size_t>(i) * nd,
                                       pw.wD, sd);
            });
        (void)loss;
        accumulate(g);
        L.L_D = sd / (static_cast<double>(batch.n_dirichlet()) * nd);
    }
    if (batch.n_neumann() > 0) {
        double sn = 0.0;
        auto [loss, g] = reference::loss_parameter_gradient(
            params, batch.neumann_x, 0,
            [&](int i, const DerivativeBundle& b, DerivativeBundle& seed) {
                SeedBundleAccess acc{b, seed};
                return neumann_point(acc, 0, lay, batch.neumann_p[i], pw.wN, sn);
            });
        (void)loss;
        accumulate(g);
        L.L_N = sn / static_cast<double>(batch.n_neumann());
    }
    return L;
}

} // namespace pinnflow
