#include "pinnflow/runconfig.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace pinnflow {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Parser {
    const std::string& path;
    int lineno = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + msg);
    }
    double num(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size())
            fail("key '" + key + "' needs a number, got '" + v + "'");
        return d;
    }
    int integer(const std::string& key, const std::string& v) const {
        const double d = num(key, v);
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) fail("key '" + key + "' needs an integer, got '" + v + "'");
        return i;
    }
    std::uint64_t u64(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
        if (v.empty() || end != v.c_str() + v.size())
            fail("key '" + key + "' needs a nonnegative integer, got '" + v + "'");
        return u;
    }
};

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    RunConfig cfg;
    Parser P{path};
    std::string line, section;
    while (std::getline(in, line)) {
        ++P.lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') P.fail("unterminated section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            if (section != "scenario" && section != "network" && section != "scales" &&
                section != "loss" && section != "optim" && section != "data" &&
                section != "output")
                P.fail("unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) P.fail("expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (section.empty()) P.fail("key '" + key + "' appears before any section");

        if (section == "scenario") {
            if (key == "name") cfg.scenario.name = val;
            else if (key == "k_min") cfg.scenario.k_min = P.num(key, val);
            else if (key == "k_max") cfg.scenario.k_max = P.num(key, val);
            else if (key == "diameter") cfg.scenario.diameter = P.num(key, val);
            else if (key == "inlet_length") cfg.scenario.inlet_length = P.num(key, val);
            else if (key == "junction_height") cfg.scenario.junction_height = P.num(key, val);
            else if (key == "definition") cfg.scenario.definition_path = resolve(val);
            else P.fail("unknown key 'scenario." + key + "'");
        } else if (section == "network") {
            if (key == "n_sd") cfg.n_sd = P.integer(key, val);
            else if (key == "hidden_layers") cfg.hidden_layers = P.integer(key, val);
            else if (key == "width") cfg.width = P.integer(key, val);
            else if (key == "mode") {
                try {
                    cfg.mode = output_mode_from_name(val);
                } catch (const std::invalid_argument& e) {
                    P.fail(e.what());
                }
            } else if (key == "seed") cfg.seed = P.u64(key, val);
            else P.fail("unknown key 'network." + key + "'");
        } else if (section == "scales") {
            if (key == "L_ref") cfg.scales.L_ref = P.num(key, val);
            else if (key == "V_ref") cfg.scales.V_ref = P.num(key, val);
            else if (key == "rho") cfg.scales.rho = P.num(key, val);
            else if (key == "mu") cfg.scales.mu = P.num(key, val);
            else P.fail("unknown key 'scales." + key + "'");
        } else if (section == "loss") {
            if (key == "f_bc") cfg.weights.f_bc = P.num(key, val);
            else if (key == "f_sigma") cfg.weights.f_sigma = P.num(key, val);
            else P.fail("unknown key 'loss." + key + "'");
        } else if (section == "optim") {
            if (key == "adam_iters") cfg.controls.adam_iters = P.integer(key, val);
            else if (key == "adam_lr") cfg.controls.adam_lr = P.num(key, val);
            else if (key == "lbfgs_max_epochs") cfg.controls.lbfgs_max_epochs = P.integer(key, val);
            else if (key == "lbfgs_inner") cfg.controls.lbfgs_inner = P.integer(key, val);
            else if (key == "lbfgs_history") cfg.controls.lbfgs_history = P.integer(key, val);
            else if (key == "lbfgs_max_evals") cfg.controls.lbfgs_max_evals = P.integer(key, val);
            else if (key == "test_interval") cfg.controls.test_interval = P.integer(key, val);
            else P.fail("unknown key 'optim." + key + "'");
        } else if (section == "data") {
            if (key == "points") cfg.points_path = resolve(val);
            else if (key == "reference") cfg.reference_path = resolve(val);
            else if (key == "test_fraction") cfg.controls.test_fraction = P.num(key, val);
            else if (key == "max_batch") cfg.controls.max_batch = P.integer(key, val);
            else P.fail("unknown key 'data." + key + "'");
        } else { // output
            if (key == "dir") cfg.out_dir = resolve(val);
            else if (key == "checkpoint_format") {
                if (val == "text") cfg.controls.checkpoint_format = CheckpointFormat::Text;
                else if (val == "binary") cfg.controls.checkpoint_format = CheckpointFormat::Binary;
                else P.fail("key 'output.checkpoint_format' must be 'text' or 'binary'");
            } else P.fail("unknown key 'output." + key + "'");
        }
    }
    return cfg;
}

TrainSetup make_train_setup(const RunConfig& cfg) {
    TrainSetup setup;
    setup.scenario = make_scenario(cfg.scenario, cfg.n_sd);
    setup.hidden_layers = cfg.hidden_layers;
    setup.width = cfg.width;
    setup.n_sd = cfg.n_sd;
    setup.mode = cfg.mode;
    setup.scales = cfg.scales;
    setup.weights = cfg.weights;
    setup.controls = cfg.controls;
    setup.seed = cfg.seed;
    setup.out_dir = cfg.out_dir;
    return setup;
}

} // namespace pinnflow
