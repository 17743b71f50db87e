#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pinnflow/autodiff.hpp"
#include "pinnflow/evaluation.hpp"
#include "pinnflow/network.hpp"
#include "pinnflow/physics.hpp"
#include "pinnflow/runconfig.hpp"
#include "pinnflow/sampler.hpp"
#include "pinnflow/training.hpp"

namespace fs = std::filesystem;
using namespace pinnflow;

namespace {

// exit codes: 0 success, 1 user error, 2 numerical abort
constexpr int kUserError = 1;
constexpr int kNumericAbort = 2;

void apply_threads(int threads, bool deterministic) {
#ifdef _OPENMP
    if (deterministic) threads = 1;
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
    (void)deterministic;
#endif
}

void require_writable(const std::string& path, bool overwrite) {
    if (!overwrite && fs::exists(path))
        throw ConfigError("'" + path + "' exists; pass --overwrite to replace it");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int run_train(const std::string& config_path, std::uint64_t seed, bool seed_set,
              const std::string& resume, bool overwrite) {
    RunConfig cfg = load_run_config(config_path);
    if (seed_set) cfg.seed = seed;
    TrainSetup setup = make_train_setup(cfg);
    if (!setup.out_dir.empty()) {
        if (!resume.empty()) {
            // resuming appends to the existing run directory
        } else {
            require_writable(setup.out_dir + "/run_summary.json", overwrite);
        }
        fs::create_directories(setup.out_dir);
    }
    if (!resume.empty()) {
        Checkpoint ckpt = load_checkpoint(resume);
        setup.resume_params = ckpt.params;
    }

    CollocationSet data = load_point_sets(cfg.points_path);
    ReferenceCloud reference;
    bool have_ref = !cfg.reference_path.empty();
    if (have_ref) reference = load_reference_cloud(cfg.reference_path);

    std::cout << "scenario " << setup.scenario.name << "  net " << setup.hidden_layers << "x"
              << setup.width << "  mode " << output_mode_name(setup.mode) << "  Re "
              << fmt(setup.scales.reynolds()) << "\n"
              << "points: " << data.n_volume() << " volume, " << data.n_dirichlet()
              << " dirichlet, " << data.n_neumann() << " neumann, " << data.n_moving()
              << " moving\n"
              << "seed " << setup.seed << (resume.empty() ? "" : "  (resumed)") << std::endl;

    TrainResult res = train(setup, data, have_ref ? &reference : nullptr);

    std::cout << "termination: " << res.termination << " after " << res.iterations
              << " iterations (" << res.adam_iterations << " adam + " << res.lbfgs_iterations
              << " lbfgs inner, " << res.epochs << " epochs, " << fmt(res.wall_seconds)
              << " s)\n"
              << "final loss " << fmt(res.last_loss.total()) << "  test (" << res.test_metric
              << ") " << fmt(res.final_test) << " from " << fmt(res.initial_test) << "\n";
    if (!res.checkpoint_path.empty()) std::cout << "checkpoint: " << res.checkpoint_path << "\n";
    if (res.termination == "non-finite-abort") {
        std::cerr << "error: " << res.error << "\n";
        return kNumericAbort;
    }
    return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& reference_path,
                 const std::string& points_path, double k, const std::string& out_dir,
                 bool overwrite) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    ReferenceCloud ref = load_reference_cloud(reference_path);
    if (!ref.has_fields())
        throw ConfigError("reference '" + reference_path + "' has no velocity/pressure columns");
    if (ref.n_sd != ckpt.params.n_sd)
        throw ConfigError("reference is " + std::to_string(ref.n_sd) + "D but the checkpoint is " +
                          std::to_string(ckpt.params.n_sd) + "D");

    std::vector<double> query = ref.x;
    if (!points_path.empty()) {
        ReferenceCloud pts = load_reference_cloud(points_path);
        if (pts.n_sd != ckpt.params.n_sd)
            throw ConfigError("points file dimension does not match the checkpoint");
        query = pts.x;
    }

    FieldPrediction pred = predict_field(ckpt, query, k);
    InterpolationResult interp = nearest_reference_interpolation(ref, query, ref.n_sd);
    ErrorReport rep = make_error_report(pred, interp.v, interp.p, ckpt.scales);
    rep.mean_match_distance = interp.mean_distance;
    rep.max_match_distance = interp.max_distance;

    std::cout << error_report_text(rep);
    fs::create_directories(out_dir);
    std::string txt = out_dir + "/error_report.txt", csv = out_dir + "/error_report.csv";
    require_writable(txt, overwrite);
    require_writable(csv, overwrite);
    std::ofstream(txt) << error_report_text(rep);
    std::ofstream(csv) << error_report_csv(rep);
    return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& points_path, double k,
                const std::string& out_path, const std::string& config_path, bool overwrite) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    ReferenceCloud pts = load_reference_cloud(points_path);
    if (pts.n_sd != ckpt.params.n_sd)
        throw ConfigError("points file is " + std::to_string(pts.n_sd) + "D but the checkpoint is " +
                          std::to_string(ckpt.params.n_sd) + "D");
    std::optional<std::array<double, 2>> k_range;
    if (!config_path.empty()) {
        RunConfig cfg = load_run_config(config_path);
        k_range = std::array<double, 2>{cfg.scenario.k_min, cfg.scenario.k_max};
    }
    require_writable(out_path, overwrite);
    FieldPrediction pred = predict_field(ckpt, pts.x, k, k_range);
    write_field_csv(out_path, pred, ckpt.scales);
    std::cout << "wrote " << pred.n_points() << " points to " << out_path << "\n";
    return 0;
}

int run_checkgrad(const std::string& config_path, bool linear, bool corrupt) {
    // default probe: a 3x20 tanh net on 16 random 3D points, full physics mode
    NetworkParams params;
    double reynolds = 50.0;
    PhysicsWeights weights;
    if (!config_path.empty()) {
        RunConfig cfg = load_run_config(config_path);
        params = init_params(cfg.n_sd, cfg.scenario.k_min < cfg.scenario.k_max, cfg.hidden_layers,
                             cfg.width, cfg.seed, cfg.mode);
        reynolds = cfg.scales.reynolds();
        weights = cfg.weights;
    } else {
        params = init_params(3, false, 3, 20, 7, OutputMode::Mixed);
    }
    if (linear) params = init_params(params.n_sd, params.parametric, 0, 1, 11, OutputMode::Mixed);

    Rng rng(13);
    const int n_pts = 16, nd = params.n_sd, iw = params.input_width();
    std::vector<double> pts(static_cast<std::size_t>(n_pts) * iw);
    for (double& c : pts) c = rng.uniform(-0.8, 0.8);

    FdCheckReport rep = finite_difference_check(params, pts, 2, linear ? 1e-2 : 1e-4);
    if (corrupt) rep.max_rel_jacobian += 1.0; // test hook: forced failure

    // parameter gradient of the full physics loss vs central differences
    EvalBatch batch;
    batch.input_width = iw;
    batch.volume_x.assign(pts.begin(), pts.begin() + 8 * iw);
    batch.dirichlet_x.assign(pts.begin() + 8 * iw, pts.begin() + 12 * iw);
    batch.neumann_x.assign(pts.begin() + 12 * iw, pts.end());
    for (int i = 0; i < 4 * nd; ++i) batch.dirichlet_v.push_back(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < 4; ++i) batch.neumann_p.push_back(rng.uniform(-1.0, 1.0));

    std::vector<double> grad;
    batch_loss_gradient(params, batch, reynolds, weights, grad);
    double param_err = 0.0, h = 1e-5;
    NetworkParams probe = params;
    for (std::size_t i = 0; i < probe.values.size(); ++i) {
        double keep = probe.values[i];
        probe.values[i] = keep + h;
        double fp = batch_loss(probe, batch, reynolds, weights).total();
        probe.values[i] = keep - h;
        double fm = batch_loss(probe, batch, reynolds, weights).total();
        probe.values[i] = keep;
        double fd = (fp - fm) / (2.0 * h);
        param_err = std::max(param_err, std::abs(fd - grad[i]) / (1.0 + std::abs(grad[i])));
    }

    const double input_tol = linear ? 1e-12 : 1e-5;
    const double param_tol = 1e-6;
    bool ok = rep.max_rel_jacobian <= input_tol && rep.max_rel_hessian <= input_tol &&
              param_err <= param_tol;
    std::cout << "jacobian max rel error " << fmt(rep.max_rel_jacobian) << "\n"
              << "hessian  max rel error " << fmt(rep.max_rel_hessian) << "\n"
              << "physics loss parameter gradient max rel error " << fmt(param_err) << "\n"
              << (ok ? "PASS" : "FAIL") << " (tolerances " << fmt(input_tol) << " inputs, "
              << fmt(param_tol) << " parameters)\n";
    return ok ? 0 : kNumericAbort;
}

int run_gridsearch(const std::string& config_path, std::vector<int> depths,
                   std::vector<int> widths, const std::string& out_path, bool overwrite) {
    RunConfig base = load_run_config(config_path);
    if (depths.empty()) depths = {base.hidden_layers};
    if (widths.empty()) widths = {base.width};
    require_writable(out_path, overwrite);

    CollocationSet data = load_point_sets(base.points_path);
    ReferenceCloud reference;
    bool have_ref = !base.reference_path.empty();
    if (have_ref) reference = load_reference_cloud(base.reference_path);

    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write '" + out_path + "'");
    out << "n,m,final_L_test,iterations,mean_step_seconds\n";
    for (int n : depths) {
        for (int m : widths) {
            RunConfig cfg = base;
            cfg.hidden_layers = n;
            cfg.width = m;
            if (!base.out_dir.empty())
                cfg.out_dir = base.out_dir + "/n" + std::to_string(n) + "m" + std::to_string(m);
            TrainSetup setup = make_train_setup(cfg);
            if (!setup.out_dir.empty()) fs::create_directories(setup.out_dir);
            std::cout << "grid point n=" << n << " m=" << m << "\n";
            TrainResult res = train(setup, data, have_ref ? &reference : nullptr);
            double step = res.iterations > 0 ? res.wall_seconds / res.iterations : 0.0;
            char row[160];
            std::snprintf(row, sizeof row, "%d,%d,%.17g,%ld,%.17g\n", n, m, res.final_test,
                          res.iterations, step);
            out << row;
            out.flush();
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int run_sample(const std::string& case_name, int n_volume, std::uint64_t seed,
               const std::string& out_path, const std::string& reference_path, bool overwrite) {
    require_writable(out_path, overwrite);
    CollocationSet set = sample_case(case_name, n_volume, seed);
    write_point_csv(out_path, set);
    std::cout << "wrote " << set.n_volume() << " volume, " << set.n_dirichlet() << " dirichlet, "
              << set.n_neumann() << " neumann, " << set.n_moving() << " moving points to "
              << out_path << "\n";
    if (!reference_path.empty()) {
        if (case_name != "channel2d")
            throw ConfigError("analytic reference output is only available for channel2d");
        require_writable(reference_path, overwrite);
        write_reference_csv(reference_path, channel2d_reference(set.volume_x));
        std::cout << "wrote analytic reference to " << reference_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pinnflow: physics-informed flow field surrogates"};
    app.require_subcommand(1);

    int threads = 0;
    bool deterministic = false;
    app.add_option("--threads", threads, "worker threads (default: all cores)");
    app.add_flag("--deterministic", deterministic,
                 "run single-threaded (results are bit-identical at any thread count; this "
                 "removes scheduling variance in timings)");

    std::string config, resume, ckpt_path, reference_path, points_path, out_path;
    std::uint64_t seed = 1;
    bool overwrite = false, linear = false, corrupt = false;
    double k = 0.0;
    int n_volume = 5000;
    std::vector<int> depths, widths;
    std::string case_name;

    CLI::App* c_train = app.add_subcommand("train", "train a model from a run config");
    c_train->add_option("config", config, "run config file")->required();
    CLI::Option* seed_opt = c_train->add_option("--seed", seed, "override the config seed");
    c_train->add_option("--resume", resume, "checkpoint to continue from");
    c_train->add_flag("--overwrite", overwrite, "replace an existing run directory");

    CLI::App* c_eval = app.add_subcommand("evaluate", "compare a checkpoint against a reference");
    c_eval->add_option("checkpoint", ckpt_path)->required();
    c_eval->add_option("reference", reference_path, "reference cloud CSV with fields")->required();
    c_eval->add_option("points", points_path, "query points CSV (default: reference positions)");
    c_eval->add_option("--k", k, "geometry parameter (meters)");
    c_eval->add_option("--out", out_path, "report directory")->default_val(".");
    c_eval->add_flag("--overwrite", overwrite);

    CLI::App* c_pred = app.add_subcommand("predict", "export a field at given points");
    c_pred->add_option("checkpoint", ckpt_path)->required();
    c_pred->add_option("points", points_path, "positions CSV")->required();
    c_pred->add_option("--k", k, "geometry parameter (meters)");
    c_pred->add_option("--out", out_path, "output CSV")->default_val("field.csv");
    c_pred->add_option("--config", config, "run config providing the trained k range");
    c_pred->add_flag("--overwrite", overwrite);

    CLI::App* c_grad = app.add_subcommand("checkgrad", "finite-difference derivative audit");
    c_grad->add_option("config", config, "optional run config for the network shape");
    c_grad->add_flag("--linear", linear, "audit a single linear layer instead");
    c_grad->add_flag("--corrupt", corrupt, "deliberately corrupt a derivative (must FAIL)");

    CLI::App* c_grid = app.add_subcommand("gridsearch", "train over a depth x width grid");
    c_grid->add_option("config", config, "base run config")->required();
    c_grid->add_option("--depths", depths, "hidden layer counts")->delimiter(',');
    c_grid->add_option("--widths", widths, "layer widths")->delimiter(',');
    c_grid->add_option("--out", out_path, "result CSV")->default_val("gridsearch.csv");
    c_grid->add_flag("--overwrite", overwrite);

    CLI::App* c_samp = app.add_subcommand("sample", "generate a bundled test case dataset");
    c_samp->add_option("case", case_name,
                       "channel2d | cylinder3d | cylinder3d-parametric | tjunction3d")
        ->required();
    c_samp->add_option("--n", n_volume, "volume point count")->default_val(5000);
    c_samp->add_option("--seed", seed, "sampling seed");
    c_samp->add_option("--out", out_path, "output CSV")->required();
    c_samp->add_option("--reference", reference_path, "also write the analytic reference cloud");
    c_samp->add_flag("--overwrite", overwrite);

    CLI11_PARSE(app, argc, argv);
    apply_threads(threads, deterministic);

    try {
        if (*c_train) return run_train(config, seed, seed_opt->count() > 0, resume, overwrite);
        if (*c_eval)
            return run_evaluate(ckpt_path, reference_path, points_path, k, out_path, overwrite);
        if (*c_pred) return run_predict(ckpt_path, points_path, k, out_path, config, overwrite);
        if (*c_grad) return run_checkgrad(config, linear, corrupt);
        if (*c_grid) return run_gridsearch(config, depths, widths, out_path, overwrite);
        if (*c_samp)
            return run_sample(case_name, n_volume, seed, out_path, reference_path, overwrite);
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericAbort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    }
    return 0;
}
