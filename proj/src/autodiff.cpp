#include "pinnflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace pinnflow {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::ReLU;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

const char* output_mode_name(OutputMode m) {
    switch (m) {
        case OutputMode::Mixed: return "mixed";
        case OutputMode::NoStreamFunction: return "no-stream-function";
        case OutputMode::NoStress: return "no-stress";
    }
    return "?";
}

OutputMode output_mode_from_name(const std::string& name) {
    if (name == "mixed") return OutputMode::Mixed;
    if (name == "no-stream-function") return OutputMode::NoStreamFunction;
    if (name == "no-stress") return OutputMode::NoStress;
    throw std::invalid_argument("unknown output mode '" + name + "'");
}

std::size_t NetworkParams::param_count() const {
    std::size_t n = 0;
    for (int l = 1; l < static_cast<int>(layer_widths.size()); ++l)
        n += static_cast<std::size_t>(layer_widths[l - 1] + 1) * layer_widths[l];
    return n;
}

std::size_t NetworkParams::weight_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l)
        off += static_cast<std::size_t>(layer_widths[l] + 1) * layer_widths[l + 1];
    return off;
}

std::size_t NetworkParams::bias_offset(int layer) const {
    return weight_offset(layer) +
           static_cast<std::size_t>(layer_widths[layer]) * layer_widths[layer + 1];
}

void NetworkParams::validate() const {
    if (layer_widths.size() < 2) throw std::invalid_argument("network needs at least one layer");
    for (int w : layer_widths)
        if (w <= 0) throw std::invalid_argument("layer widths must be positive");
    if (n_sd != 2 && n_sd != 3) throw std::invalid_argument("n_sd must be 2 or 3");
    if (input_width() != n_sd + (parametric ? 1 : 0))
        throw std::invalid_argument("input width inconsistent with n_sd/parametric");
    if (values.size() != param_count())
        throw std::invalid_argument("parameter vector size does not match layer widths");
}

namespace {

// Activation pushforward for one point's stage: z -> a, both [w x comp].
// Channel 0 is the value, channels 1..dd the first derivatives, the rest the
// packed Hessian triangle. tanh derivatives are expressed through t = tanh z.
void tanh_push(const double* z, double* a, int w, int comp, int order, int dd) {
    const int nt = comp - 1 - dd;
    for (int i = 0; i < w; ++i) {
        const double* zi = z + static_cast<std::size_t>(i) * comp;
        double* ai = a + static_cast<std::size_t>(i) * comp;
        const double t = std::tanh(zi[0]);
        const double d1 = 1.0 - t * t;
        ai[0] = t;
        if (order >= 1)
            for (int j = 0; j < dd; ++j) ai[1 + j] = d1 * zi[1 + j];
        if (order >= 2) {
            const double d2 = -2.0 * t * d1;
            int idx = 1 + dd;
            for (int j = 0; j < dd; ++j)
                for (int k = j; k < dd; ++k, ++idx)
                    ai[idx] = d2 * zi[1 + j] * zi[1 + k] + d1 * zi[idx];
            (void)nt;
        }
    }
}

void relu_push(const double* z, double* a, int w, int comp) {
    for (int i = 0; i < w; ++i) {
        const double v = z[static_cast<std::size_t>(i) * comp];
        a[static_cast<std::size_t>(i) * comp] = v > 0.0 ? v : 0.0;
    }
}

// Dense layer pushforward: z = W a + b acts identically on every channel,
// so the kernel is a plain (w_out x w_in) x (w_in x comp) product with the
// bias added to the value channel.
void linear_push(const double* W, const double* b, const double* a, double* z, int w_in,
                 int w_out, int comp) {
    for (int o = 0; o < w_out; ++o) {
        double* zo = z + static_cast<std::size_t>(o) * comp;
        for (int c = 0; c < comp; ++c) zo[c] = 0.0;
        const double* wrow = W + static_cast<std::size_t>(o) * w_in;
        for (int i = 0; i < w_in; ++i) {
            const double w = wrow[i];
            const double* ai = a + static_cast<std::size_t>(i) * comp;
            for (int c = 0; c < comp; ++c) zo[c] += w * ai[c];
        }
        zo[0] += b[o];
    }
}

// Adjoint of tanh_push at stored pre-activation z: abar -> zbar.
void tanh_reverse(const double* z, const double* abar, double* zbar, int w, int comp, int order,
                  int dd) {
    for (int i = 0; i < w; ++i) {
        const double* zi = z + static_cast<std::size_t>(i) * comp;
        const double* ab = abar + static_cast<std::size_t>(i) * comp;
        double* zb = zbar + static_cast<std::size_t>(i) * comp;
        const double t = std::tanh(zi[0]);
        const double d1 = 1.0 - t * t;
        const double d2 = -2.0 * t * d1;
        const double d3 = d1 * (6.0 * t * t - 2.0);
        double v = ab[0] * d1;
        if (order >= 1)
            for (int j = 0; j < dd; ++j) {
                zb[1 + j] = d1 * ab[1 + j];
                v += ab[1 + j] * d2 * zi[1 + j];
            }
        if (order >= 2) {
            int idx = 1 + dd;
            for (int j = 0; j < dd; ++j)
                for (int k = j; k < dd; ++k, ++idx) {
                    const double hb = ab[idx];
                    zb[idx] = d1 * hb;
                    v += hb * (d3 * zi[1 + j] * zi[1 + k] + d2 * zi[idx]);
                    if (j == k) {
                        zb[1 + j] += 2.0 * d2 * zi[1 + j] * hb;
                    } else {
                        zb[1 + j] += d2 * zi[1 + k] * hb;
                        zb[1 + k] += d2 * zi[1 + j] * hb;
                    }
                }
        }
        zb[0] = v;
    }
}

} // namespace

BatchEval::BatchEval(const NetworkParams& params, int order, int diff_dims)
    : p_(params), order_(order), dd_(diff_dims), comp_(comp_size(order, diff_dims)) {
    if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be in [0,2]");
    if (diff_dims < 1 || diff_dims > params.input_width())
        throw std::invalid_argument("diff_dims out of range");
    if (params.activation != Activation::Tanh && order >= 1)
        throw std::invalid_argument(std::string("activation '") +
                                    activation_name(params.activation) +
                                    "' does not support derivative orders >= 1");
    stages_.resize(params.layer_widths.size());
}

void BatchEval::forward(std::span<const double> points) {
    const int d_in = p_.input_width();
    if (points.size() % static_cast<std::size_t>(d_in) != 0)
        throw std::invalid_argument("points size is not a multiple of the input width");
    n_points_ = static_cast<int>(points.size() / d_in);
    const int L = p_.n_weight_layers();
    const int max_w = *std::max_element(p_.layer_widths.begin(), p_.layer_widths.end());
    for (int l = 0; l <= L; ++l)
        stages_[l].resize(static_cast<std::size_t>(n_points_) * p_.layer_widths[l] * comp_);
    seeds_.assign(static_cast<std::size_t>(n_points_) * p_.output_width() * comp_, 0.0);

#pragma omp parallel
    {
        std::vector<double> act(static_cast<std::size_t>(max_w) * comp_);
#pragma omp for schedule(static)
        for (int i = 0; i < n_points_; ++i) {
            // Stage 0: the input itself; identity gradient on the first
            // diff_dims inputs, zero Hessian.
            double* s0 = stages_[0].data() + static_cast<std::size_t>(i) * d_in * comp_;
            for (int n = 0; n < d_in; ++n) {
                double* sn = s0 + static_cast<std::size_t>(n) * comp_;
                sn[0] = points[static_cast<std::size_t>(i) * d_in + n];
                for (int c = 1; c < comp_; ++c) sn[c] = 0.0;
                if (order_ >= 1 && n < dd_) sn[1 + n] = 1.0;
            }
            for (int l = 1; l <= L; ++l) {
                const int w_in = p_.layer_widths[l - 1];
                const int w_out = p_.layer_widths[l];
                const double* prev =
                    stages_[l - 1].data() + static_cast<std::size_t>(i) * w_in * comp_;
                const double* a = prev;
                if (l > 1) {
                    if (p_.activation == Activation::Tanh)
                        tanh_push(prev, act.data(), w_in, comp_, order_, dd_);
                    else
                        relu_push(prev, act.data(), w_in, comp_);
                    a = act.data();
                }
                linear_push(p_.values.data() + p_.weight_offset(l - 1),
                            p_.values.data() + p_.bias_offset(l - 1), a,
                            stages_[l].data() + static_cast<std::size_t>(i) * w_out * comp_,
                            w_in, w_out, comp_);
            }
        }
    }
}

const double* BatchEval::out(int i) const {
    return stages_.back().data() + static_cast<std::size_t>(i) * p_.output_width() * comp_;
}

double BatchEval::hess(int i, int slot, int j, int k) const {
    const int lo = std::min(j, k), hi = std::max(j, k);
    return out(i)[slot * comp_ + 1 + dd_ + tri_index(dd_, lo, hi)];
}

void BatchEval::clear_seeds() { std::fill(seeds_.begin(), seeds_.end(), 0.0); }

void BatchEval::add_seed_value(int i, int slot, double v) {
    seeds_[(static_cast<std::size_t>(i) * p_.output_width() + slot) * comp_] += v;
}

void BatchEval::add_seed_jac(int i, int slot, int j, double v) {
    seeds_[(static_cast<std::size_t>(i) * p_.output_width() + slot) * comp_ + 1 + j] += v;
}

void BatchEval::add_seed_hess(int i, int slot, int j, int k, double v) {
    const int lo = std::min(j, k), hi = std::max(j, k);
    seeds_[(static_cast<std::size_t>(i) * p_.output_width() + slot) * comp_ + 1 + dd_ +
           tri_index(dd_, lo, hi)] += v;
}

void BatchEval::reverse(std::span<double> grad) const {
    const std::size_t P = p_.param_count();
    if (grad.size() != P) throw std::invalid_argument("gradient size mismatch");
    if (p_.activation != Activation::Tanh && p_.n_weight_layers() > 1)
        throw std::invalid_argument("reverse sweep requires a smooth activation");
    const int L = p_.n_weight_layers();
    const int max_w = *std::max_element(p_.layer_widths.begin(), p_.layer_widths.end());
    const int n_chunks = (n_points_ + kChunk - 1) / kChunk;
    chunk_grads_.assign(static_cast<std::size_t>(n_chunks) * P, 0.0);

#pragma omp parallel
    {
        std::vector<double> act(static_cast<std::size_t>(max_w) * comp_);
        std::vector<double> zbar(static_cast<std::size_t>(max_w) * comp_);
        std::vector<double> abar(static_cast<std::size_t>(max_w) * comp_);
#pragma omp for schedule(dynamic, 1)
        for (int c = 0; c < n_chunks; ++c) {
            double* g = chunk_grads_.data() + static_cast<std::size_t>(c) * P;
            const int i_end = std::min(n_points_, (c + 1) * kChunk);
            for (int i = c * kChunk; i < i_end; ++i) {
                // Seed the output stage adjoint.
                const int w_last = p_.output_width();
                std::memcpy(zbar.data(),
                            seeds_.data() + static_cast<std::size_t>(i) * w_last * comp_,
                            static_cast<std::size_t>(w_last) * comp_ * sizeof(double));
                for (int l = L; l >= 1; --l) {
                    const int w_in = p_.layer_widths[l - 1];
                    const int w_out = p_.layer_widths[l];
                    const double* prev =
                        stages_[l - 1].data() + static_cast<std::size_t>(i) * w_in * comp_;
                    const double* a = prev;
                    if (l > 1) {
                        tanh_push(prev, act.data(), w_in, comp_, order_, dd_);
                        a = act.data();
                    }
                    const double* W = p_.values.data() + p_.weight_offset(l - 1);
                    double* gW = g + p_.weight_offset(l - 1);
                    double* gb = g + p_.bias_offset(l - 1);
                    for (int o = 0; o < w_out; ++o) {
                        const double* zo = zbar.data() + static_cast<std::size_t>(o) * comp_;
                        gb[o] += zo[0];
                        double* gWrow = gW + static_cast<std::size_t>(o) * w_in;
                        for (int n = 0; n < w_in; ++n) {
                            const double* an = a + static_cast<std::size_t>(n) * comp_;
                            double s = 0.0;
                            for (int cc = 0; cc < comp_; ++cc) s += zo[cc] * an[cc];
                            gWrow[n] += s;
                        }
                    }
                    if (l == 1) break; // input adjoint is not needed
                    std::fill(abar.begin(), abar.begin() + static_cast<std::size_t>(w_in) * comp_,
                              0.0);
                    for (int o = 0; o < w_out; ++o) {
                        const double* wrow = W + static_cast<std::size_t>(o) * w_in;
                        const double* zo = zbar.data() + static_cast<std::size_t>(o) * comp_;
                        for (int n = 0; n < w_in; ++n) {
                            const double w = wrow[n];
                            double* an = abar.data() + static_cast<std::size_t>(n) * comp_;
                            for (int cc = 0; cc < comp_; ++cc) an[cc] += w * zo[cc];
                        }
                    }
                    tanh_reverse(prev, abar.data(), zbar.data(), w_in, comp_, order_, dd_);
                }
            }
        }
    }
    // Ordered combine: chunk index order, independent of thread count.
    for (int c = 0; c < n_chunks; ++c) {
        const double* g = chunk_grads_.data() + static_cast<std::size_t>(c) * P;
        for (std::size_t k = 0; k < P; ++k) grad[k] += g[k];
    }
}

std::size_t BatchEval::workspace_bytes() const {
    std::size_t b = 0;
    for (const auto& s : stages_) b += s.size() * sizeof(double);
    b += seeds_.size() * sizeof(double);
    b += chunk_grads_.size() * sizeof(double);
    return b;
}

std::vector<DerivativeBundle> forward_with_derivatives(const NetworkParams& params,
                                                       std::span<const double> points,
                                                       int order) {
    params.validate();
    for (double v : params.values)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite network parameter");
    const int d_in = params.input_width();
    BatchEval be(params, order, d_in);
    be.forward(points);
    const int n = be.n_points();
    const int n_out = params.output_width();
    std::vector<DerivativeBundle> bundles(n);
    for (int i = 0; i < n; ++i) {
        DerivativeBundle& b = bundles[i];
        b.n_out = n_out;
        b.n_in = d_in;
        b.order = order;
        b.value.resize(n_out);
        for (int o = 0; o < n_out; ++o) b.value[o] = be.value(i, o);
        if (order >= 1) {
            b.jacobian.resize(static_cast<std::size_t>(n_out) * d_in);
            for (int o = 0; o < n_out; ++o)
                for (int j = 0; j < d_in; ++j)
                    b.jacobian[static_cast<std::size_t>(o) * d_in + j] = be.jac(i, o, j);
        }
        if (order >= 2) {
            b.hessian.resize(static_cast<std::size_t>(n_out) * d_in * d_in);
            for (int o = 0; o < n_out; ++o)
                for (int j = 0; j < d_in; ++j)
                    for (int k = 0; k < d_in; ++k)
                        b.hessian[(static_cast<std::size_t>(o) * d_in + j) * d_in + k] =
                            be.hess(i, o, j, k);
        }
    }
    return bundles;
}

std::pair<double, std::vector<double>> loss_parameter_gradient(const NetworkParams& params,
                                                               std::span<const double> points,
                                                               int order,
                                                               const LossEvaluator& evaluator) {
    BatchEval be(params, order, params.input_width());
    be.forward(points);
    const double loss = evaluator(be);
    if (!std::isfinite(loss)) {
        int bad = -1;
        for (int i = 0; i < be.n_points() && bad < 0; ++i)
            for (int o = 0; o < params.output_width(); ++o)
                if (!std::isfinite(be.value(i, o))) {
                    bad = i;
                    break;
                }
        throw NumericError("loss is non-finite" +
                           (bad >= 0 ? " (first non-finite output at batch point " +
                                           std::to_string(bad) + ")"
                                     : std::string()));
    }
    std::vector<double> grad(params.param_count(), 0.0);
    be.reverse(grad);
    return {loss, std::move(grad)};
}

FdCheckReport finite_difference_check(const NetworkParams& params,
                                      std::span<const double> points, int order, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite-difference step must be positive");
    if (order < 1) throw std::invalid_argument("nothing to check below order 1");
    const int d_in = params.input_width();
    const int n = static_cast<int>(points.size() / d_in);
    const int n_out = params.output_width();
    auto analytic = forward_with_derivatives(params, points, order);

    FdCheckReport rep;
    rep.order = order;
    double max_jac_diff = 0.0, max_jac = 0.0;
    double max_hess_diff = 0.0, max_hess = 0.0;
    std::vector<double> x(d_in);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d_in; ++j) {
            std::copy_n(points.data() + static_cast<std::size_t>(i) * d_in, d_in, x.begin());
            x[j] += step;
            auto plus = forward_with_derivatives(params, std::span<const double>(x), order - 1);
            x[j] -= 2.0 * step;
            auto minus = forward_with_derivatives(params, std::span<const double>(x), order - 1);
            for (int o = 0; o < n_out; ++o) {
                const double fd = (plus[0].value[o] - minus[0].value[o]) / (2.0 * step);
                max_jac_diff = std::max(max_jac_diff, std::abs(fd - analytic[i].jac(o, j)));
                max_jac = std::max(max_jac, std::abs(analytic[i].jac(o, j)));
                if (order >= 2)
                    for (int k = 0; k < d_in; ++k) {
                        const double fdh = (plus[0].jac(o, k) - minus[0].jac(o, k)) / (2.0 * step);
                        max_hess_diff =
                            std::max(max_hess_diff, std::abs(fdh - analytic[i].hess(o, k, j)));
                        max_hess = std::max(max_hess, std::abs(analytic[i].hess(o, k, j)));
                    }
            }
        }
    }
    rep.max_rel_jacobian = max_jac_diff / (1.0 + max_jac);
    rep.max_rel_hessian = order >= 2 ? max_hess_diff / (1.0 + max_hess) : 0.0;
    return rep;
}

double fd_param_gradient_error(const NetworkParams& params, std::span<const double> points,
                               int order, const LossEvaluator& evaluator, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite-difference step must be positive");
    auto [loss, grad] = loss_parameter_gradient(params, points, order, evaluator);
    (void)loss;
    double max_g = 0.0;
    for (double g : grad) max_g = std::max(max_g, std::abs(g));
    double max_diff = 0.0;
    NetworkParams probe = params;
    for (std::size_t k = 0; k < params.param_count(); ++k) {
        probe.values[k] = params.values[k] + step;
        BatchEval bp(probe, order, probe.input_width());
        bp.forward(points);
        const double fp = evaluator(bp);
        probe.values[k] = params.values[k] - step;
        BatchEval bm(probe, order, probe.input_width());
        bm.forward(points);
        const double fm = evaluator(bm);
        probe.values[k] = params.values[k];
        max_diff = std::max(max_diff, std::abs((fp - fm) / (2.0 * step) - grad[k]));
    }
    return max_diff / (1.0 + max_g);
}

} // namespace pinnflow
