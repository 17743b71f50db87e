#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pinnflow/common.hpp"

namespace pinnflow {

/// Loss and gradient at x; returns the loss, fills grad (same length as x).
using LossGradFn = std::function<double(std::span<const double> x, std::vector<double>& grad)>;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long t = 0;
    std::vector<double> m, v; // first/second moment estimates

    explicit AdamState(std::size_t n = 0, AdamConfig c = {}) : cfg(c), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws NumericError naming the
/// first non-finite gradient entry.
void adam_step(AdamState& state, std::span<const double> grad, std::span<double> params);

enum class LineSearchStatus { Success, NotDescent, ExhaustedEvals, StepUnderflow };

const char* line_search_status_name(LineSearchStatus s);

struct WolfeConfig {
    double c1 = 1e-4; // sufficient-decrease constant
    double c2 = 0.9;  // curvature constant
    int max_evals = 40;
    double alpha0 = 1.0; // first trial step
};

struct LineSearchResult {
    LineSearchStatus status = LineSearchStatus::NotDescent;
    double alpha = 0.0;
    double f = 0.0;
    int evals = 0;
};

/// Strong-Wolfe line search (bracket + zoom, quadratic interpolation with a
/// bisection safeguard). f0/g0 are loss and gradient at x0. On Success,
/// x_out = x0 + alpha*dir and g_out holds the gradient there; on failure
/// both are unspecified. Failures are returned, never thrown.
LineSearchResult wolfe_line_search(const LossGradFn& fg, std::span<const double> x0, double f0,
                                   std::span<const double> g0, std::span<const double> dir,
                                   const WolfeConfig& cfg, std::vector<double>& x_out,
                                   std::vector<double>& g_out);

/// Bounded curvature-pair history for the two-loop recursion.
class LbfgsState {
  public:
    explicit LbfgsState(int capacity = 50);

    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(rho_.size()); }
    void clear();

    /// Stores (s, y) iff y's > 1e-10 * |s| * |y| (curvature condition);
    /// evicts the oldest pair beyond capacity. Returns whether stored.
    bool push(std::span<const double> s, std::span<const double> y);

    /// Two-loop recursion with initial scaling gamma = s'y / y'y from the
    /// newest pair; empty history gives steepest descent. dir is assigned.
    void direction(std::span<const double> grad, std::vector<double>& dir) const;

  private:
    int capacity_;
    std::vector<std::vector<double>> s_, y_; // oldest first
    std::vector<double> rho_;
};

} // namespace pinnflow
