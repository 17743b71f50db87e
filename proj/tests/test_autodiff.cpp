#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "pinnflow/autodiff.hpp"
#include "pinnflow/network.hpp"

using namespace pinnflow;

namespace {

std::vector<double> random_points(Rng& rng, int n, int width, double lo = -0.9,
                                  double hi = 0.9) {
    std::vector<double> pts(static_cast<std::size_t>(n) * width);
    for (double& c : pts) c = rng.uniform(lo, hi);
    return pts;
}

} // namespace

TEST_CASE("a pure linear layer has jacobian W and zero hessian") {
    NetworkParams p = init_params(3, true, 0, 1, 11, OutputMode::Mixed);
    REQUIRE(p.layer_widths.size() == 2);
    const int din = p.input_width(), dout = p.output_width();
    Rng rng(21);
    auto pts = random_points(rng, 5, din, -2.0, 2.0);
    auto bundles = forward_with_derivatives(p, pts, 2);
    REQUIRE(bundles.size() == 5);
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& b = bundles[i];
        for (int o = 0; o < dout; ++o) {
            // value = W x + b, exactly
            double want = p.values[p.bias_offset(0) + o];
            for (int j = 0; j < din; ++j)
                want += p.values[p.weight_offset(0) + static_cast<std::size_t>(o) * din + j] *
                        pts[i * din + j];
            CHECK(b.value[o] == doctest::Approx(want).epsilon(1e-15));
            for (int j = 0; j < din; ++j) {
                CHECK(b.jac(o, j) ==
                      p.values[p.weight_offset(0) + static_cast<std::size_t>(o) * din + j]);
                for (int k = 0; k < din; ++k) CHECK(b.hess(o, j, k) == 0.0);
            }
        }
    }
}

TEST_CASE("analytic derivatives match central differences") {
    Rng rng(3);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        for (int nd : {2, 3}) {
            NetworkParams p = init_params(nd, seed == 2, 2, 10, seed, OutputMode::Mixed);
            auto pts = random_points(rng, 6, p.input_width());
            FdCheckReport rep = finite_difference_check(p, pts, 2, 1e-4);
            CHECK(rep.max_rel_jacobian <= 1e-6);
            CHECK(rep.max_rel_hessian <= 1e-5);
        }
    }
}

TEST_CASE("hessian is symmetric") {
    NetworkParams p = init_params(3, true, 3, 12, 5, OutputMode::Mixed);
    Rng rng(8);
    auto pts = random_points(rng, 4, p.input_width());
    auto bundles = forward_with_derivatives(p, pts, 2);
    for (const auto& b : bundles)
        for (int o = 0; o < b.n_out; ++o)
            for (int j = 0; j < b.n_in; ++j)
                for (int k = j + 1; k < b.n_in; ++k)
                    CHECK(std::abs(b.hess(o, j, k) - b.hess(o, k, j)) <= 1e-12);
}

TEST_CASE("parameter gradient of a least-squares loss matches the analytic formula") {
    // linear net, loss = 0.5 sum_i (y_i0 - t_i)^2 => dL/dW_0j = sum_i r_i x_ij,
    // dL/db_0 = sum_i r_i, zero for every other output row
    NetworkParams p = init_params(2, false, 0, 1, 9, OutputMode::NoStress);
    const int din = p.input_width(), dout = p.output_width();
    Rng rng(14);
    const int n = 7;
    auto pts = random_points(rng, n, din, -1.5, 1.5);
    std::vector<double> targets(n);
    for (double& t : targets) t = rng.uniform(-1, 1);

    auto [loss, grad] = loss_parameter_gradient(
        p, pts, 0, [&](BatchEval& be) {
            double L = 0.0;
            for (int i = 0; i < be.n_points(); ++i) {
                double r = be.value(i, 0) - targets[i];
                L += 0.5 * r * r;
                be.add_seed_value(i, 0, r);
            }
            return L;
        });

    std::vector<double> want(p.param_count(), 0.0);
    double check_loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double y = p.values[p.bias_offset(0)];
        for (int j = 0; j < din; ++j)
            y += p.values[p.weight_offset(0) + j] * pts[static_cast<std::size_t>(i) * din + j];
        const double r = y - targets[i];
        check_loss += 0.5 * r * r;
        for (int j = 0; j < din; ++j) want[p.weight_offset(0) + j] += r * pts[i * din + j];
        want[p.bias_offset(0)] += r;
    }
    CHECK(loss == doctest::Approx(check_loss).epsilon(1e-13));
    REQUIRE(grad.size() == want.size());
    for (std::size_t i = 0; i < grad.size(); ++i)
        CHECK(std::abs(grad[i] - want[i]) <= 1e-12 * (1.0 + std::abs(want[i])));
    (void)dout;
}

TEST_CASE("parameter gradients pass a finite-difference probe") {
    NetworkParams p = init_params(2, false, 2, 8, 17, OutputMode::Mixed);
    Rng rng(30);
    auto pts = random_points(rng, 5, p.input_width());
    std::vector<double> w(static_cast<std::size_t>(5) * p.output_width());
    for (double& c : w) c = rng.uniform(-1, 1);
    LossEvaluator ev = [&](BatchEval& be) {
        // touches values, first and second derivatives so the reverse sweep
        // exercises every stored component
        double L = 0.0;
        for (int i = 0; i < be.n_points(); ++i)
            for (int o = 0; o < 2; ++o) {
                L += w[i * 2 + o] * be.value(i, o);
                be.add_seed_value(i, o, w[i * 2 + o]);
                L += 0.3 * be.jac(i, o, 1);
                be.add_seed_jac(i, o, 1, 0.3);
                L += 0.2 * be.hess(i, o, 0, 1);
                be.add_seed_hess(i, o, 0, 1, 0.2);
            }
        return L;
    };
    double err = fd_param_gradient_error(p, pts, 2, ev, 1e-4);
    CHECK(err <= 1e-6);
}

TEST_CASE("evaluation is deterministic") {
    NetworkParams p = init_params(3, false, 3, 16, 23, OutputMode::Mixed);
    Rng rng(31);
    auto pts = random_points(rng, 40, p.input_width());
    auto a = forward_with_derivatives(p, pts, 2);
    auto b = forward_with_derivatives(p, pts, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].value == b[i].value);
        CHECK(a[i].jacobian == b[i].jacobian);
        CHECK(a[i].hessian == b[i].hessian);
    }
}

TEST_CASE("non-smooth activations are rejected for derivative orders >= 1") {
    NetworkParams p = init_params(2, false, 2, 8, 2, OutputMode::Mixed);
    p.activation = Activation::ReLU;
    std::vector<double> pts = {0.1, 0.2};
    CHECK_THROWS_AS((void)forward_with_derivatives(p, pts, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)forward_with_derivatives(p, pts, 2), std::invalid_argument);
    CHECK_NOTHROW((void)forward_with_derivatives(p, pts, 0));
}

TEST_CASE("batched evaluation matches the serial reference point by point") {
    Rng rng(44);
    for (int nd : {2, 3}) {
        NetworkParams p = init_params(nd, true, 3, 10, 77 + nd, OutputMode::Mixed);
        const int din = p.input_width();
        auto pts = random_points(rng, 9, din);
        auto batched = forward_with_derivatives(p, pts, 2);
        for (int i = 0; i < 9; ++i) {
            DerivativeBundle ref = reference::forward_point(p, &pts[i * din], 2);
            for (int o = 0; o < p.output_width(); ++o) {
                CHECK(std::abs(batched[i].value[o] - ref.value[o]) <=
                      1e-13 * (1.0 + std::abs(ref.value[o])));
                for (int j = 0; j < din; ++j) {
                    CHECK(std::abs(batched[i].jac(o, j) - ref.jac(o, j)) <=
                          1e-13 * (1.0 + std::abs(ref.jac(o, j))));
                    for (int k = 0; k < din; ++k)
                        CHECK(std::abs(batched[i].hess(o, j, k) - ref.hess(o, j, k)) <=
                              1e-12 * (1.0 + std::abs(ref.hess(o, j, k))));
                }
            }
        }
    }
}

TEST_CASE("non-finite losses name the offending batch point") {
    NetworkParams p = init_params(2, false, 0, 1, 4, OutputMode::Mixed);
    std::vector<double> pts = {0.1, 0.2, std::numeric_limits<double>::infinity(), 0.4};
    try {
        (void)loss_parameter_gradient(p, pts, 0, [](BatchEval& be) {
            double L = 0.0;
            for (int i = 0; i < be.n_points(); ++i) L += be.value(i, 0);
            return L;
        });
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("batch point 1") != std::string::npos);
    }
}

TEST_CASE("non-finite parameters are rejected up front") {
    NetworkParams p = init_params(2, false, 1, 4, 6, OutputMode::Mixed);
    p.values[3] = std::nan("");
    std::vector<double> pts = {0.1, 0.2};
    CHECK_THROWS_AS((void)forward_with_derivatives(p, pts, 1), std::invalid_argument);
}

TEST_CASE("bad inputs are rejected") {
    NetworkParams p = init_params(2, false, 1, 4, 6, OutputMode::Mixed);
    std::vector<double> pts = {0.1, 0.2, 0.3}; // not a multiple of input width
    CHECK_THROWS_AS((void)forward_with_derivatives(p, pts, 1), std::invalid_argument);
    std::vector<double> ok = {0.1, 0.2};
    CHECK_THROWS_AS((void)forward_with_derivatives(p, ok, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)forward_with_derivatives(p, ok, -1), std::invalid_argument);
}
