// Benchmark of the OpenMP batched loss-gradient kernels against the serial
// per-point reference implementation, on identical batches. The reference
// path exists for testing; this target keeps its cost visible and checks
// that both paths agree.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pinnflow/network.hpp"
#include "pinnflow/physics.hpp"

using namespace pinnflow;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

EvalBatch make_batch(int n_volume, int n_dirichlet, int n_neumann, int iw, int nd, Rng& rng) {
    EvalBatch b;
    b.input_width = iw;
    auto fill = [&](std::vector<double>& v, int n) {
        v.resize(static_cast<std::size_t>(n));
        for (double& c : v) c = rng.uniform(-0.9, 0.9);
    };
    fill(b.volume_x, n_volume * iw);
    fill(b.dirichlet_x, n_dirichlet * iw);
    fill(b.dirichlet_v, n_dirichlet * nd);
    fill(b.neumann_x, n_neumann * iw);
    fill(b.neumann_p, n_neumann);
    return b;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bench_eval: OpenMP batched kernels vs serial reference"};
    int hidden = 8, width = 40, n_volume = 2048, reps = 3;
    bool quick = false;
    app.add_option("--hidden", hidden, "hidden layers");
    app.add_option("--width", width, "layer width");
    app.add_option("--n", n_volume, "volume points");
    app.add_option("--reps", reps, "timing repetitions");
    app.add_flag("--quick", quick, "tiny smoke-test sizes");
    CLI11_PARSE(app, argc, argv);

    if (quick) {
        hidden = 2;
        width = 10;
        n_volume = 64;
        reps = 1;
    }
    const int nd = 3;
    NetworkParams params = init_params(nd, false, hidden, width, 17, OutputMode::Mixed);
    Rng rng(99);
    EvalBatch batch = make_batch(n_volume, n_volume / 4, n_volume / 16, params.input_width(),
                                 nd, rng);
    PhysicsWeights weights;
    const double reynolds = 77.0;

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("net %dx%d, %d volume / %d dirichlet / %d neumann points, %d threads\n", hidden,
                width, n_volume, n_volume / 4, n_volume / 16, threads);

    std::vector<double> grad, ref_grad;
    batch_loss_gradient(params, batch, reynolds, weights, grad); // warm-up + allocation
    double t_batched = 1e300, t_reference = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        batch_loss_gradient(params, batch, reynolds, weights, grad);
        t_batched = std::min(t_batched, seconds_since(t0));
    }
    for (int r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        reference_batch_loss_gradient(params, batch, reynolds, weights, ref_grad);
        t_reference = std::min(t_reference, seconds_since(t0));
    }

    double max_rel = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        max_rel = std::max(max_rel,
                           std::abs(grad[i] - ref_grad[i]) / (1.0 + std::abs(ref_grad[i])));
    }
    std::printf("%-22s %12s %14s\n", "path", "seconds", "points/s");
    std::printf("%-22s %12.4f %14.0f\n", "openmp batched", t_batched, n_volume / t_batched);
    std::printf("%-22s %12.4f %14.0f\n", "serial reference", t_reference,
                n_volume / t_reference);
    std::printf("speedup %.2fx, gradient max rel difference %.3e\n", t_reference / t_batched,
                max_rel);
    return max_rel <= 1e-10 ? 0 : 1;
}
