#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pinnflow/common.hpp"

namespace pinnflow {

enum class Activation { Tanh, ReLU };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Output head variants. Mixed is the production scheme (stream function,
/// pressure and stress outputs); the other two are ablation modes kept for
/// experiments and are flagged as such by the trainer.
enum class OutputMode { Mixed, NoStreamFunction, NoStress };

const char* output_mode_name(OutputMode m);
OutputMode output_mode_from_name(const std::string& name);

/// Fully-connected network parameters in one flat canonical vector.
///
/// Canonical layout: for each weight layer l in order, the weight matrix
/// W_l (row-major, rows = output neurons) followed by the bias b_l. All
/// derivative code, checkpoints and optimizers share this layout.
struct NetworkParams {
    int n_sd = 2;                 // spatial dimensions (2 or 3)
    bool parametric = false;      // true adds one geometry-parameter input
    OutputMode mode = OutputMode::Mixed;
    Activation activation = Activation::Tanh;
    std::vector<int> layer_widths; // [d_in, m, ..., m, d_out]
    std::uint64_t seed = 0;        // seed used for weight init (provenance)
    std::vector<double> values;    // flat parameter vector, canonical layout

    int input_width() const { return layer_widths.front(); }
    int output_width() const { return layer_widths.back(); }
    int n_weight_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
    std::size_t param_count() const;
    std::size_t weight_offset(int layer) const;
    std::size_t bias_offset(int layer) const;
    /// Throws std::invalid_argument if widths/values are inconsistent.
    void validate() const;
};

/// Exact derivatives of all network outputs at one point: value, gradient
/// with respect to the network inputs, and input Hessian (full storage,
/// symmetric by construction).
struct DerivativeBundle {
    int n_out = 0;
    int n_in = 0;
    int order = 0;
    std::vector<double> value;    // [n_out]
    std::vector<double> jacobian; // [n_out x n_in] row-major
    std::vector<double> hessian;  // [n_out x n_in x n_in]

    double jac(int o, int j) const { return jacobian[static_cast<std::size_t>(o) * n_in + j]; }
    double hess(int o, int j, int k) const {
        return hessian[(static_cast<std::size_t>(o) * n_in + j) * n_in + k];
    }
};

/// Number of stored components per neuron: value, d_d first derivatives and
/// the upper triangle of the second-derivative matrix.
inline int tri_size(int dd) { return dd * (dd + 1) / 2; }
inline int comp_size(int order, int dd) {
    return 1 + (order >= 1 ? dd : 0) + (order >= 2 ? tri_size(dd) : 0);
}
/// Index of (j,k), j <= k, inside the packed upper triangle.
inline int tri_index(int dd, int j, int k) { return j * dd - j * (j - 1) / 2 + (k - j); }

/// One batched forward/reverse derivative evaluation.
///
/// The forward sweep pushes (value, input gradient, packed input Hessian)
/// through every layer and stores the pre-activation state of each layer for
/// the whole batch; the reverse sweep walks that augmented computation
/// backwards and accumulates the gradient of a scalar loss with respect to
/// the parameters. Points are independent: the forward loop is parallel over
/// points and the reverse reduction is chunked with a fixed chunk size and
/// combined in chunk order, so results are bit-identical for any thread
/// count. Buffer sizes scale with batch size; workspace_bytes() reports them.
class BatchEval {
  public:
    /// diff_dims: how many leading inputs are differentiated (the training
    /// loop differentiates spatial coordinates only; the public API uses all
    /// inputs). order in [0,2].
    BatchEval(const NetworkParams& params, int order, int diff_dims);

    /// points: row-major [n x input_width], nondimensional network inputs.
    void forward(std::span<const double> points);

    int n_points() const { return n_points_; }
    int order() const { return order_; }
    int diff_dims() const { return dd_; }
    int comp() const { return comp_; }

    /// Contiguous output state of point i: per output neuron comp() scalars
    /// (value, then gradient, then packed Hessian triangle).
    const double* out(int i) const;
    double value(int i, int slot) const { return out(i)[slot * comp_]; }
    double jac(int i, int slot, int j) const { return out(i)[slot * comp_ + 1 + j]; }
    double hess(int i, int slot, int j, int k) const;

    /// Loss seeds d(loss)/d(output entry), same layout as out(). Seeds into
    /// full Hessian entries (j,k) and (k,j) both fold into the triangle slot.
    void clear_seeds();
    void add_seed_value(int i, int slot, double v);
    void add_seed_jac(int i, int slot, int j, double v);
    void add_seed_hess(int i, int slot, int j, int k, double v);

    /// Reverse sweep. Accumulates (+=) d(loss)/d(params) into grad, which
    /// must have param_count() entries. Requires a prior forward().
    void reverse(std::span<double> grad) const;

    /// Bytes of batch-proportional evaluation state currently allocated
    /// (layer states, seed buffer, chunked gradient accumulators).
    std::size_t workspace_bytes() const;

    static constexpr int kChunk = 1024; // points per reduction chunk

  private:
    const NetworkParams& p_;
    int order_, dd_, comp_;
    int n_points_ = 0;
    std::vector<std::vector<double>> stages_; // stages_[l]: n x width_l x comp
    std::vector<double> seeds_;               // n x out_width x comp
    mutable std::vector<double> chunk_grads_; // n_chunks x param_count
};

/// Evaluate outputs and exact input derivatives up to `order` at each point.
/// points is row-major [n x input_width]. Throws std::invalid_argument on
/// bad order, non-finite parameters, a non-smooth activation with order >= 1,
/// or a size mismatch.
std::vector<DerivativeBundle> forward_with_derivatives(const NetworkParams& params,
                                                       std::span<const double> points,
                                                       int order);

/// Batch loss evaluator: inspects the forward results, writes seeds and
/// returns the scalar loss.
using LossEvaluator = std::function<double(BatchEval&)>;

/// Forward + evaluator + reverse in one call. Returns (loss, gradient).
/// Throws NumericError naming the first offending point if the loss is
/// non-finite.
std::pair<double, std::vector<double>> loss_parameter_gradient(const NetworkParams& params,
                                                               std::span<const double> points,
                                                               int order,
                                                               const LossEvaluator& evaluator);

/// Worst-case relative error between analytic and central-difference
/// derivatives, per derivative order. Relative error is measured as
/// max|a-b| / (1 + max|entry|) over the compared entries.
struct FdCheckReport {
    double max_rel_jacobian = 0.0;
    double max_rel_hessian = 0.0;
    int order = 0;
};

/// Central-difference check of the analytic derivatives at the given points.
/// Jacobians are differenced from values, Hessians from analytic Jacobians.
/// step must be > 0.
FdCheckReport finite_difference_check(const NetworkParams& params,
                                      std::span<const double> points, int order, double step);

/// Central-difference check of loss_parameter_gradient for an arbitrary
/// evaluator. Returns the worst relative error over all parameters.
double fd_param_gradient_error(const NetworkParams& params, std::span<const double> points,
                               int order, const LossEvaluator& evaluator, double step);

/// Plain single-threaded per-point implementation kept as the reference for
/// the batched kernels. Full (untriangled) Hessian storage, straight loops,
/// summation strictly in point order.
namespace reference {

DerivativeBundle forward_point(const NetworkParams& params, const double* x, int order);

/// Per-point loss: receives the point's bundle, writes d(loss)/d(bundle)
/// into `seed` (allocated by the caller with matching shapes, zeroed) and
/// returns the point's additive loss contribution.
using PointSeeder =
    std::function<double(int i, const DerivativeBundle& bundle, DerivativeBundle& seed)>;

std::pair<double, std::vector<double>> loss_parameter_gradient(const NetworkParams& params,
                                                               std::span<const double> points,
                                                               int order,
                                                               const PointSeeder& seeder);

} // namespace reference

} // namespace pinnflow
