#include "pinnflow/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pinnflow {

OutputLayout make_layout(int n_sd, OutputMode mode) {
    if (n_sd != 2 && n_sd != 3) throw std::invalid_argument("n_sd must be 2 or 3");
    OutputLayout lay;
    lay.n_sd = n_sd;
    lay.mode = mode;
    switch (mode) {
        case OutputMode::Mixed:
            lay.n_psi = n_sd == 3 ? 3 : 1;
            lay.n_vel = 0;
            lay.n_outputs = lay.n_psi + 1 + lay.n_stress();
            break;
        case OutputMode::NoStreamFunction:
            lay.n_psi = 0;
            lay.n_vel = n_sd;
            lay.n_outputs = n_sd + 1 + lay.n_stress();
            break;
        case OutputMode::NoStress:
            lay.n_psi = 0;
            lay.n_vel = n_sd;
            lay.n_outputs = n_sd + 1;
            break;
    }
    return lay;
}

NetworkParams init_params(int n_sd, bool parametric, int n_hidden, int width, Rng& rng,
                          OutputMode mode) {
    if (n_hidden < 0 || width <= 0)
        throw std::invalid_argument("network size must have n_hidden >= 0 and width > 0");
    const OutputLayout lay = make_layout(n_sd, mode);
    NetworkParams p;
    p.n_sd = n_sd;
    p.parametric = parametric;
    p.mode = mode;
    p.activation = Activation::Tanh;
    p.layer_widths.push_back(n_sd + (parametric ? 1 : 0));
    for (int l = 0; l < n_hidden; ++l) p.layer_widths.push_back(width);
    p.layer_widths.push_back(lay.n_outputs);
    p.values.assign(p.param_count(), 0.0);
    for (int l = 0; l + 1 < static_cast<int>(p.layer_widths.size()); ++l) {
        const int fan_in = p.layer_widths[l];
        const int fan_out = p.layer_widths[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        double* W = p.values.data() + p.weight_offset(l);
        for (int k = 0; k < fan_in * fan_out; ++k) W[k] = rng.uniform(-limit, limit);
        // biases stay zero
    }
    return p;
}

NetworkParams init_params(int n_sd, bool parametric, int n_hidden, int width,
                          std::uint64_t seed, OutputMode mode) {
    Rng rng(seed);
    NetworkParams p = init_params(n_sd, parametric, n_hidden, width, rng, mode);
    p.seed = seed;
    return p;
}

KinematicState kinematics_from_bundle(const DerivativeBundle& bundle, const OutputLayout& lay) {
    if (bundle.order < 2)
        throw std::invalid_argument("kinematics_from_bundle requires a second-order bundle");
    if (bundle.n_out != lay.n_outputs)
        throw std::invalid_argument("bundle output count does not match the layout");
    return kinematics_at(BundleAccess{bundle}, 0, lay);
}

std::string checkpoint_id(const NetworkParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (int w : params.layer_widths) mix(&w, sizeof w);
    mix(params.values.data(), params.values.size() * sizeof(double));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr char kTextMagic[] = "pinnflow checkpoint";
constexpr char kBinaryMagic[8] = {'P', 'I', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("checkpoint: bad numeric value for " + what + ": '" + s + "'");
    return v;
}

void save_text(const std::string& path, const NetworkParams& p, const ReferenceScales& sc) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
    out << kTextMagic << ' ' << kFormatVersion << '\n';
    out << "n_sd " << p.n_sd << '\n';
    out << "parametric " << (p.parametric ? 1 : 0) << '\n';
    out << "mode " << output_mode_name(p.mode) << '\n';
    out << "activation " << activation_name(p.activation) << '\n';
    out << "widths";
    for (int w : p.layer_widths) out << ' ' << w;
    out << '\n';
    out << "L_ref " << hexfloat(sc.L_ref) << '\n';
    out << "V_ref " << hexfloat(sc.V_ref) << '\n';
    out << "rho " << hexfloat(sc.rho) << '\n';
    out << "mu " << hexfloat(sc.mu) << '\n';
    out << "seed " << p.seed << '\n';
    out << "params " << p.values.size() << '\n';
    for (double v : p.values) out << hexfloat(v) << '\n';
    if (!out) throw ConfigError("failed while writing checkpoint: " + path);
}

void save_binary(const std::string& path, const NetworkParams& p, const ReferenceScales& sc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
    auto put = [&out](const void* data, std::size_t n) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    };
    put(kBinaryMagic, sizeof kBinaryMagic);
    const std::uint32_t ver = kFormatVersion, nsd = static_cast<std::uint32_t>(p.n_sd);
    const std::uint8_t para = p.parametric ? 1 : 0;
    const std::uint8_t mode = static_cast<std::uint8_t>(p.mode);
    const std::uint8_t act = static_cast<std::uint8_t>(p.activation);
    put(&ver, 4);
    put(&nsd, 4);
    put(&para, 1);
    put(&mode, 1);
    put(&act, 1);
    const std::uint32_t nw = static_cast<std::uint32_t>(p.layer_widths.size());
    put(&nw, 4);
    for (int w : p.layer_widths) {
        const std::uint32_t w32 = static_cast<std::uint32_t>(w);
        put(&w32, 4);
    }
    const double scales[4] = {sc.L_ref, sc.V_ref, sc.rho, sc.mu};
    put(scales, sizeof scales);
    const std::uint64_t seed = p.seed;
    put(&seed, 8);
    const std::uint64_t count = p.values.size();
    put(&count, 8);
    put(p.values.data(), p.values.size() * sizeof(double));
    if (!out) throw ConfigError("failed while writing checkpoint: " + path);
}

Checkpoint load_text(std::ifstream& in, const std::string& path) {
    Checkpoint ck;
    std::string line;
    std::getline(in, line); // magic line, already validated
    {
        std::istringstream ss(line.substr(std::strlen(kTextMagic)));
        ss >> ck.format_version;
        if (ck.format_version != kFormatVersion)
            throw ConfigError("checkpoint: unsupported format version in " + path);
    }
    NetworkParams& p = ck.params;
    std::size_t expected = 0;
    bool have_count = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key.empty()) continue;
        if (key == "n_sd") ss >> p.n_sd;
        else if (key == "parametric") { int b = 0; ss >> b; p.parametric = b != 0; }
        else if (key == "mode") { std::string m; ss >> m; p.mode = output_mode_from_name(m); }
        else if (key == "activation") { std::string a; ss >> a; p.activation = activation_from_name(a); }
        else if (key == "widths") { int w; while (ss >> w) p.layer_widths.push_back(w); }
        else if (key == "L_ref") { std::string v; ss >> v; ck.scales.L_ref = parse_double(v, key); }
        else if (key == "V_ref") { std::string v; ss >> v; ck.scales.V_ref = parse_double(v, key); }
        else if (key == "rho") { std::string v; ss >> v; ck.scales.rho = parse_double(v, key); }
        else if (key == "mu") { std::string v; ss >> v; ck.scales.mu = parse_double(v, key); }
        else if (key == "seed") ss >> p.seed;
        else if (key == "params") { ss >> expected; have_count = true; break; }
        else throw ConfigError("checkpoint: unknown header key '" + key + "' in " + path);
    }
    if (!have_count) throw ConfigError("checkpoint: missing parameter count in " + path);
    p.values.reserve(expected);
    while (p.values.size() < expected && std::getline(in, line)) {
        if (line.empty()) continue;
        p.values.push_back(parse_double(line, "parameter"));
    }
    if (p.values.size() != expected)
        throw ConfigError("checkpoint: truncated parameter list in " + path);
    p.validate();
    return ck;
}

Checkpoint load_binary(std::ifstream& in, const std::string& path) {
    auto get = [&in, &path](void* data, std::size_t n) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw ConfigError("checkpoint: truncated file " + path);
    };
    char magic[8];
    get(magic, 8);
    Checkpoint ck;
    std::uint32_t ver = 0, nsd = 0, nw = 0;
    std::uint8_t para = 0, mode = 0, act = 0;
    get(&ver, 4);
    if (ver != kFormatVersion)
        throw ConfigError("checkpoint: unsupported format version in " + path);
    ck.format_version = static_cast<int>(ver);
    get(&nsd, 4);
    get(&para, 1);
    get(&mode, 1);
    get(&act, 1);
    get(&nw, 4);
    if (nw < 2 || nw > 1024) throw ConfigError("checkpoint: implausible layer count in " + path);
    NetworkParams& p = ck.params;
    p.n_sd = static_cast<int>(nsd);
    p.parametric = para != 0;
    p.mode = static_cast<OutputMode>(mode);
    p.activation = static_cast<Activation>(act);
    for (std::uint32_t i = 0; i < nw; ++i) {
        std::uint32_t w = 0;
        get(&w, 4);
        p.layer_widths.push_back(static_cast<int>(w));
    }
    double scales[4];
    get(scales, sizeof scales);
    ck.scales = {scales[0], scales[1], scales[2], scales[3]};
    std::uint64_t seed = 0, count = 0;
    get(&seed, 8);
    get(&count, 8);
    p.seed = seed;
    if (count != p.param_count())
        throw ConfigError("checkpoint: parameter count does not match layer widths in " + path);
    p.values.resize(count);
    get(p.values.data(), count * sizeof(double));
    p.validate();
    return ck;
}

} // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const ReferenceScales& scales, CheckpointFormat format) {
    params.validate();
    if (format == CheckpointFormat::Text)
        save_text(path, params, scales);
    else
        save_binary(path, params, scales);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint file: " + path);
    char head[8] = {};
    in.read(head, 8);
    if (in.gcount() >= 8 && std::memcmp(head, kBinaryMagic, 8) == 0) {
        in.seekg(0);
        return load_binary(in, path);
    }
    in.close();
    std::ifstream tin(path);
    std::string first;
    std::getline(tin, first);
    if (first.rfind(kTextMagic, 0) != 0)
        throw ConfigError("not a checkpoint file (bad magic): " + path);
    tin.seekg(0);
    return load_text(tin, path);
}

} // namespace pinnflow
