#include "pinnflow/training.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace pinnflow {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string widths_string(const std::vector<int>& w) {
    std::string s = "[";
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(w[i]);
    }
    return s + "]";
}

// last "iteration" value of an existing convergence CSV, 0 if unusable
long last_logged_iteration(const std::string& path) {
    std::ifstream in(path);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty() && (std::isdigit(static_cast<unsigned char>(line[0])))) last = line;
    if (last.empty()) return 0;
    return std::strtol(last.c_str(), nullptr, 10);
}

} // namespace

void check_resume_compatible(const NetworkParams& ckpt, const TrainSetup& setup) {
    NetworkParams want;
    want.n_sd = setup.n_sd;
    want.parametric = setup.scenario.parametric;
    want.mode = setup.mode;
    want.layer_widths.push_back(setup.n_sd + (setup.scenario.parametric ? 1 : 0));
    for (int l = 0; l < setup.hidden_layers; ++l) want.layer_widths.push_back(setup.width);
    want.layer_widths.push_back(make_layout(setup.n_sd, setup.mode).n_outputs);

    std::string diff;
    auto mismatch = [&](const char* field, const std::string& a, const std::string& b) {
        diff += std::string("\n  ") + field + ": checkpoint=" + a + " config=" + b;
    };
    if (ckpt.n_sd != want.n_sd)
        mismatch("n_sd", std::to_string(ckpt.n_sd), std::to_string(want.n_sd));
    if (ckpt.parametric != want.parametric)
        mismatch("parametric", ckpt.parametric ? "true" : "false",
                 want.parametric ? "true" : "false");
    if (ckpt.mode != want.mode)
        mismatch("output_mode", output_mode_name(ckpt.mode), output_mode_name(want.mode));
    if (ckpt.activation != Activation::Tanh)
        mismatch("activation", activation_name(ckpt.activation), "tanh");
    if (ckpt.layer_widths != want.layer_widths)
        mismatch("layer_widths", widths_string(ckpt.layer_widths),
                 widths_string(want.layer_widths));
    if (!diff.empty()) throw ConfigError("checkpoint is incompatible with this setup:" + diff);
}

TrainResult train(const TrainSetup& setup, const CollocationSet& data,
                  const ReferenceCloud* reference) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario& scenario = setup.scenario;
    const TrainControls& ctl = setup.controls;
    setup.scales.validate();
    const double Re = setup.scales.reynolds();
    if (Re < 1e-6) throw ConfigError("Reynolds number is degenerate (Re < 1e-6)");
    if (!(setup.weights.f_bc > 0.0)) throw ConfigError("loss key 'f_bc' must be > 0");
    if (!(setup.weights.f_sigma > 0.0)) throw ConfigError("loss key 'f_sigma' must be > 0");
    if (ctl.adam_iters < 0) throw ConfigError("optim key 'adam_iters' must be >= 0");
    if (!(ctl.adam_lr > 0.0)) throw ConfigError("optim key 'adam_lr' must be > 0");
    if (ctl.lbfgs_max_epochs < 0) throw ConfigError("optim key 'lbfgs_max_epochs' must be >= 0");
    if (ctl.lbfgs_inner < 1) throw ConfigError("optim key 'lbfgs_inner' must be >= 1");
    if (ctl.lbfgs_history < 1) throw ConfigError("optim key 'lbfgs_history' must be >= 1");
    if (ctl.max_batch < 1) throw ConfigError("data key 'max_batch' must be >= 1");
    if (ctl.test_fraction < 0.0 || ctl.test_fraction >= 1.0)
        throw ConfigError("data key 'test_fraction' must lie in [0,1)");
    if (ctl.test_interval < 0) throw ConfigError("optim key 'test_interval' must be >= 0");
    if (data.empty()) throw ConfigError("the point set is empty");
    if (data.n_sd != setup.n_sd)
        throw ConfigError("point set is " + std::to_string(data.n_sd) + "D but the network is " +
                          std::to_string(setup.n_sd) + "D");
    if (scenario.n_sd != setup.n_sd) throw ConfigError("scenario/network dimension mismatch");

    TrainResult res;
    res.scales = setup.scales;
    res.termination = "max-epochs";

    // documented draw order: weight init, test split (with its one-time k
    // assignment), then per epoch k samples and batch shuffles
    Rng rng(setup.seed);
    NetworkParams params = init_params(setup.n_sd, scenario.parametric, setup.hidden_layers,
                                       setup.width, rng, setup.mode);
    params.seed = setup.seed;
    const bool resuming = !setup.resume_params.values.empty();
    if (resuming) {
        // the fresh init above still consumed its draws, so the split and
        // all later samples land exactly where the original run put them
        check_resume_compatible(setup.resume_params, setup);
        setup.resume_params.validate();
        params = setup.resume_params;
    }

    CollocationSet train_data = data, test_data;
    if (ctl.test_fraction > 0.0 && data.n_volume() > 1) {
        auto split = split_test_set(data, ctl.test_fraction, rng);
        train_data = std::move(split.first);
        test_data = std::move(split.second);
    }

    // frozen held-out probe: one k per test point, pipeline applied once
    EvalBatch test_batch;
    std::vector<double> test_vref, test_pref; // nondimensional, Eq.12 mode
    res.test_metric = "none";
    if (test_data.n_volume() > 0) {
        ParameterSample tks = sample_parameters(test_data, scenario, rng);
        FilteredSet tf = apply_parametric_pipeline(test_data, tks, scenario);
        test_batch = assemble_batch(tf, nullptr, setup.scales, scenario.parametric);
        if (test_batch.n_volume() > 0) {
            if (reference && reference->has_fields()) {
                auto interp =
                    nearest_reference_interpolation(*reference, tf.volume_x, setup.n_sd);
                test_vref = std::move(interp.v);
                test_pref = std::move(interp.p);
                const double vs = 1.0 / setup.scales.V_ref;
                const double ps = 1.0 / setup.scales.pressure_scale();
                for (double& v : test_vref) v *= vs;
                for (double& p : test_pref) p *= ps;
                res.test_metric = "eq12";
            } else {
                res.test_metric = "physics-proxy";
            }
        }
    }
    const bool have_test = res.test_metric != "none";
    auto eval_test = [&]() -> double {
        if (!have_test) return std::numeric_limits<double>::quiet_NaN();
        if (res.test_metric == "eq12") {
            std::vector<double> v, p;
            evaluate_vp(params, test_batch.volume_x, v, p);
            return test_loss(v, p, test_vref, test_pref);
        }
        return batch_loss(params, test_batch, Re, setup.weights).physics();
    };

    // ---- output files
    namespace fs = std::filesystem;
    std::ofstream log;
    long iter = 0;
    if (!setup.out_dir.empty()) {
        fs::create_directories(setup.out_dir);
        const std::string log_path = setup.out_dir + "/convergence.csv";
        if (resuming && fs::exists(log_path)) {
            iter = last_logged_iteration(log_path);
            log.open(log_path, std::ios::app);
        } else {
            log.open(log_path);
            log << "iteration,phase,epoch,batch,L_total,L_D,L_N,L_v,L_sigma,L_p,L_test\n";
        }
        if (!log) throw ConfigError("cannot write '" + log_path + "'");
    }
    auto log_row = [&](const char* phase, int epoch, int batch, const LossBreakdown& L,
                       double ltest, bool have_ltest) {
        if (!log.is_open()) return;
        log << iter << ',' << phase << ',' << epoch << ',' << batch << ',' << g17(L.total())
            << ',' << g17(L.L_D) << ',' << g17(L.L_N) << ',' << g17(L.L_v) << ','
            << g17(L.L_sigma) << ',' << g17(L.L_p) << ',';
        if (have_ltest) log << g17(ltest);
        log << '\n';
    };
    auto write_ckpt = [&](const char* name) -> std::string {
        if (setup.out_dir.empty()) return "";
        const std::string path = setup.out_dir + "/" + name;
        save_checkpoint(path, params, setup.scales, ctl.checkpoint_format);
        return path;
    };

    // ---- per-epoch resample/filter/rebatch
    std::vector<EvalBatch> batches;
    int B = 0;
    auto rebuild = [&](bool force) {
        if (!force && B == 1 && !scenario.parametric) return; // static full batch kept
        ParameterSample ks = sample_parameters(train_data, scenario, rng);
        FilteredSet filtered = apply_parametric_pipeline(train_data, ks, scenario);
        if (filtered.empty())
            throw ConfigError("every training point was filtered out by the scenario");
        auto idx = make_batches(filtered, ctl.max_batch, rng);
        batches.clear();
        for (const auto& bi : idx)
            batches.push_back(assemble_batch(filtered, &bi, setup.scales, scenario.parametric));
        B = static_cast<int>(batches.size());
    };
    rebuild(true);
    res.initial_test = eval_test();

    std::vector<double> grad;
    std::size_t ws = 0;
    auto maybe_test = [&](double& out) {
        if (have_test && ctl.test_interval > 0 && iter % ctl.test_interval == 0) {
            out = eval_test();
            return true;
        }
        return false;
    };

    try {
        // ---- phase 1: Adam preconditioning, cycling batches
        AdamState adam(params.param_count(), AdamConfig{ctl.adam_lr, 0.9, 0.999, 1e-8});
        int b = 0, epoch = 0;
        while (res.adam_iterations < ctl.adam_iters) {
            if (b >= B) {
                b = 0;
                ++epoch;
                rebuild(false);
            }
            const EvalBatch& batch = batches[b];
            if (batch.empty()) {
                std::cerr << "warning: skipping empty batch " << b << " (adam epoch " << epoch
                          << ")\n";
                ++res.skipped_batches;
                ++b;
                continue;
            }
            const LossBreakdown L = batch_loss_gradient(params, batch, Re, setup.weights, grad, &ws);
            res.workspace_peak = std::max(res.workspace_peak, ws);
            adam_step(adam, grad, params.values);
            ++iter;
            ++res.adam_iterations;
            res.last_loss = L;
            double lt = 0.0;
            const bool ht = maybe_test(lt);
            log_row("adam", epoch, b, L, lt, ht);
            ++b;
        }
        if (ctl.adam_iters > 0) write_ckpt("checkpoint_adam.ckpt");

        // ---- phase 2: minibatch L-BFGS
        WolfeConfig wolfe;
        wolfe.max_evals = ctl.lbfgs_max_evals;
        LbfgsState lbfgs(ctl.lbfgs_history);
        NetworkParams work = params;
        const bool keep_history = !scenario.parametric && B == 1;
        std::vector<double> x, g, xn, gn, dir, s, y;
        for (int ep = 0; ep < ctl.lbfgs_max_epochs; ++ep) {
            if (res.adam_iterations > 0 || ep > 0) rebuild(false);
            bool any_success = false;
            for (int bb = 0; bb < B; ++bb) {
                const EvalBatch& batch = batches[bb];
                if (batch.empty()) {
                    std::cerr << "warning: skipping empty batch " << bb << " (lbfgs epoch " << ep
                              << ")\n";
                    ++res.skipped_batches;
                    continue;
                }
                if (!keep_history) lbfgs.clear();
                LossBreakdown Lcur;
                auto fg = [&](std::span<const double> xv, std::vector<double>& gv) {
                    std::copy(xv.begin(), xv.end(), work.values.begin());
                    Lcur = batch_loss_gradient(work, batch, Re, setup.weights, gv, &ws);
                    res.workspace_peak = std::max(res.workspace_peak, ws);
                    return Lcur.total();
                };
                x = params.values;
                double f = fg(x, g);
                LossBreakdown Lat = Lcur;
                for (int j = 0; j < ctl.lbfgs_inner; ++j) {
                    lbfgs.direction(g, dir);
                    const LineSearchResult ls = wolfe_line_search(fg, x, f, g, dir, wolfe, xn, gn);
                    if (ls.status != LineSearchStatus::Success) break;
                    s.resize(x.size());
                    y.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        s[i] = xn[i] - x[i];
                        y[i] = gn[i] - g[i];
                    }
                    lbfgs.push(s, y);
                    x.swap(xn);
                    g.swap(gn);
                    f = ls.f;
                    Lat = Lcur;
                    any_success = true;
                    ++iter;
                    ++res.lbfgs_iterations;
                    res.last_loss = Lat;
                    double lt = 0.0;
                    const bool ht = maybe_test(lt);
                    log_row("lbfgs", ep, bb, Lat, lt, ht);
                }
                params.values = x;
            }
            ++res.epochs;
            if (!any_success) {
                res.termination = "descent-failure";
                break;
            }
        }
    } catch (const NumericError& e) {
        res.termination = "non-finite-abort";
        res.error = e.what();
        std::cerr << "numerical abort: " << e.what() << "\n";
    }

    try {
        res.final_test = eval_test();
    } catch (const NumericError&) {
        res.final_test = std::numeric_limits<double>::quiet_NaN();
    }
    res.iterations = iter;
    res.params = params;
    res.checkpoint_path = write_ckpt("checkpoint_final.ckpt");
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!setup.out_dir.empty()) {
        nlohmann::json j;
        j["termination"] = res.termination;
        if (!res.error.empty()) j["error"] = res.error;
        j["iterations"] = res.iterations;
        j["adam_iterations"] = res.adam_iterations;
        j["lbfgs_iterations"] = res.lbfgs_iterations;
        j["epochs"] = res.epochs;
        j["skipped_batches"] = res.skipped_batches;
        j["wall_seconds"] = res.wall_seconds;
        j["workspace_peak_bytes"] = res.workspace_peak;
        j["seed"] = setup.seed;
        j["resumed"] = resuming;
        j["f_bc"] = setup.weights.f_bc;
        j["f_sigma"] = setup.weights.f_sigma;
        j["loss"] = {{"total", res.last_loss.total()}, {"L_D", res.last_loss.L_D},
                     {"L_N", res.last_loss.L_N},       {"L_v", res.last_loss.L_v},
                     {"L_sigma", res.last_loss.L_sigma}, {"L_p", res.last_loss.L_p}};
        j["test_metric"] = res.test_metric;
        if (std::isfinite(res.initial_test)) j["initial_test"] = res.initial_test;
        if (std::isfinite(res.final_test)) j["final_test"] = res.final_test;
        j["checkpoint"] = res.checkpoint_path;
        j["checkpoint_id"] = checkpoint_id(res.params);
        std::ofstream summary(setup.out_dir + "/run_summary.json");
        summary << j.dump(2) << "\n";
    }
    return res;
}

} // namespace pinnflow
