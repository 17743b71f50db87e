#include <cmath>
#include <stdexcept>
#include <vector>

#include "pinnflow/autodiff.hpp"

// Straightforward single-point evaluation with full Hessian storage. This
// file is the serial reference the batched kernels are tested against; keep
// it simple rather than fast.

namespace pinnflow::reference {

namespace {

struct Stage {
    std::vector<double> val;  // [w]
    std::vector<double> jac;  // [w][d]
    std::vector<double> hess; // [w][d][d]
};

Stage make_stage(int w, int d) {
    Stage s;
    s.val.assign(w, 0.0);
    s.jac.assign(static_cast<std::size_t>(w) * d, 0.0);
    s.hess.assign(static_cast<std::size_t>(w) * d * d, 0.0);
    return s;
}

void tanh_activate(const Stage& z, Stage& a, int w, int d) {
    for (int i = 0; i < w; ++i) {
        const double t = std::tanh(z.val[i]);
        const double d1 = 1.0 - t * t;
        const double d2 = -2.0 * t * d1;
        a.val[i] = t;
        for (int j = 0; j < d; ++j) a.jac[static_cast<std::size_t>(i) * d + j] = d1 * z.jac[static_cast<std::size_t>(i) * d + j];
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                const std::size_t idx = (static_cast<std::size_t>(i) * d + j) * d + k;
                a.hess[idx] = d2 * z.jac[static_cast<std::size_t>(i) * d + j] *
                                  z.jac[static_cast<std::size_t>(i) * d + k] +
                              d1 * z.hess[idx];
            }
    }
}

void relu_activate(const Stage& z, Stage& a, int w) {
    for (int i = 0; i < w; ++i) a.val[i] = z.val[i] > 0.0 ? z.val[i] : 0.0;
}

void linear(const NetworkParams& p, int layer, const Stage& a, Stage& z, int d) {
    const int w_in = p.layer_widths[layer];
    const int w_out = p.layer_widths[layer + 1];
    const double* W = p.values.data() + p.weight_offset(layer);
    const double* b = p.values.data() + p.bias_offset(layer);
    for (int o = 0; o < w_out; ++o) {
        double v = b[o];
        for (int i = 0; i < w_in; ++i) v += W[static_cast<std::size_t>(o) * w_in + i] * a.val[i];
        z.val[o] = v;
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < w_in; ++i)
                s += W[static_cast<std::size_t>(o) * w_in + i] *
                     a.jac[static_cast<std::size_t>(i) * d + j];
            z.jac[static_cast<std::size_t>(o) * d + j] = s;
        }
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double s = 0.0;
                for (int i = 0; i < w_in; ++i)
                    s += W[static_cast<std::size_t>(o) * w_in + i] *
                         a.hess[(static_cast<std::size_t>(i) * d + j) * d + k];
                z.hess[(static_cast<std::size_t>(o) * d + j) * d + k] = s;
            }
    }
}

// Forward pass keeping every pre-activation stage.
std::vector<Stage> forward_stages(const NetworkParams& p, const double* x) {
    const int d = p.input_width();
    const int L = p.n_weight_layers();
    std::vector<Stage> stages;
    stages.reserve(L + 1);
    Stage s0 = make_stage(d, d);
    for (int i = 0; i < d; ++i) {
        s0.val[i] = x[i];
        s0.jac[static_cast<std::size_t>(i) * d + i] = 1.0;
    }
    stages.push_back(std::move(s0));
    for (int l = 1; l <= L; ++l) {
        Stage a = make_stage(p.layer_widths[l - 1], d);
        if (l == 1) {
            a = stages[0];
        } else if (p.activation == Activation::Tanh) {
            tanh_activate(stages[l - 1], a, p.layer_widths[l - 1], d);
        } else {
            relu_activate(stages[l - 1], a, p.layer_widths[l - 1]);
        }
        Stage z = make_stage(p.layer_widths[l], d);
        linear(p, l - 1, a, z, d);
        stages.push_back(std::move(z));
    }
    return stages;
}

DerivativeBundle bundle_from(const Stage& s, int n_out, int d, int order) {
    DerivativeBundle b;
    b.n_out = n_out;
    b.n_in = d;
    b.order = order;
    b.value = s.val;
    if (order >= 1) b.jacobian = s.jac;
    if (order >= 2) b.hessian = s.hess;
    return b;
}

} // namespace

DerivativeBundle forward_point(const NetworkParams& params, const double* x, int order) {
    if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be in [0,2]");
    if (params.activation != Activation::Tanh && order >= 1 && params.n_weight_layers() > 1)
        throw std::invalid_argument("non-smooth activation does not support derivatives");
    auto stages = forward_stages(params, x);
    return bundle_from(stages.back(), params.output_width(), params.input_width(), order);
}

std::pair<double, std::vector<double>> loss_parameter_gradient(const NetworkParams& params,
                                                               std::span<const double> points,
                                                               int order,
                                                               const PointSeeder& seeder) {
    const int d = params.input_width();
    const int L = params.n_weight_layers();
    const int n = static_cast<int>(points.size() / d);
    std::vector<double> grad(params.param_count(), 0.0);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        auto stages = forward_stages(params, points.data() + static_cast<std::size_t>(i) * d);
        DerivativeBundle out =
            bundle_from(stages.back(), params.output_width(), d, 2);
        out.order = order;
        DerivativeBundle seed;
        seed.n_out = out.n_out;
        seed.n_in = d;
        seed.order = order;
        seed.value.assign(out.n_out, 0.0);
        seed.jacobian.assign(static_cast<std::size_t>(out.n_out) * d, 0.0);
        seed.hessian.assign(static_cast<std::size_t>(out.n_out) * d * d, 0.0);
        loss += seeder(i, out, seed);

        // Adjoint sweep with full Hessian storage.
        Stage zbar;
        zbar.val = seed.value;
        zbar.jac = seed.jacobian;
        zbar.hess = seed.hessian;
        for (int l = L; l >= 1; --l) {
            const int w_in = params.layer_widths[l - 1];
            const int w_out = params.layer_widths[l];
            Stage a = make_stage(w_in, d);
            if (l == 1)
                a = stages[0];
            else
                tanh_activate(stages[l - 1], a, w_in, d);
            const double* W = params.values.data() + params.weight_offset(l - 1);
            double* gW = grad.data() + params.weight_offset(l - 1);
            double* gb = grad.data() + params.bias_offset(l - 1);
            for (int o = 0; o < w_out; ++o) {
                gb[o] += zbar.val[o];
                for (int m = 0; m < w_in; ++m) {
                    double s = zbar.val[o] * a.val[m];
                    for (int j = 0; j < d; ++j)
                        s += zbar.jac[static_cast<std::size_t>(o) * d + j] *
                             a.jac[static_cast<std::size_t>(m) * d + j];
                    for (int j = 0; j < d; ++j)
                        for (int k = 0; k < d; ++k)
                            s += zbar.hess[(static_cast<std::size_t>(o) * d + j) * d + k] *
                                 a.hess[(static_cast<std::size_t>(m) * d + j) * d + k];
                    gW[static_cast<std::size_t>(o) * w_in + m] += s;
                }
            }
            if (l == 1) break;
            Stage abar = make_stage(w_in, d);
            for (int m = 0; m < w_in; ++m)
                for (int o = 0; o < w_out; ++o) {
                    const double w = W[static_cast<std::size_t>(o) * w_in + m];
                    abar.val[m] += w * zbar.val[o];
                    for (int j = 0; j < d; ++j)
                        abar.jac[static_cast<std::size_t>(m) * d + j] +=
                            w * zbar.jac[static_cast<std::size_t>(o) * d + j];
                    for (int j = 0; j < d; ++j)
                        for (int k = 0; k < d; ++k)
                            abar.hess[(static_cast<std::size_t>(m) * d + j) * d + k] +=
                                w * zbar.hess[(static_cast<std::size_t>(o) * d + j) * d + k];
                }
            // Adjoint of tanh at the stored pre-activation state.
            const Stage& z = stages[l - 1];
            Stage zprev = make_stage(w_in, d);
            for (int m = 0; m < w_in; ++m) {
                const double t = std::tanh(z.val[m]);
                const double d1 = 1.0 - t * t;
                const double d2 = -2.0 * t * d1;
                const double d3 = d1 * (6.0 * t * t - 2.0);
                double v = abar.val[m] * d1;
                for (int j = 0; j < d; ++j) {
                    const double zj = z.jac[static_cast<std::size_t>(m) * d + j];
                    v += abar.jac[static_cast<std::size_t>(m) * d + j] * d2 * zj;
                    double jb = d1 * abar.jac[static_cast<std::size_t>(m) * d + j];
                    for (int k = 0; k < d; ++k) {
                        const std::size_t jk = (static_cast<std::size_t>(m) * d + j) * d + k;
                        const std::size_t kj = (static_cast<std::size_t>(m) * d + k) * d + j;
                        jb += (abar.hess[jk] + abar.hess[kj]) * d2 *
                              z.jac[static_cast<std::size_t>(m) * d + k];
                    }
                    zprev.jac[static_cast<std::size_t>(m) * d + j] = jb;
                }
                for (int j = 0; j < d; ++j)
                    for (int k = 0; k < d; ++k) {
                        const std::size_t jk = (static_cast<std::size_t>(m) * d + j) * d + k;
                        const double hb = abar.hess[jk];
                        v += hb * (d3 * z.jac[static_cast<std::size_t>(m) * d + j] *
                                       z.jac[static_cast<std::size_t>(m) * d + k] +
                                   d2 * z.hess[jk]);
                        zprev.hess[jk] = d1 * hb;
                    }
                zprev.val[m] = v;
            }
            zbar = std::move(zprev);
        }
    }
    return {loss, std::move(grad)};
}

} // namespace pinnflow::reference
