#include "pinnflow/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pinnflow {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& msg) {
    throw ConfigError(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_cell(const std::string& path, int line, const std::string& cell, const char* what,
                  bool required) {
    if (cell.empty()) {
        if (required) fail_at(path, line, std::string("missing required ") + what);
        return std::numeric_limits<double>::quiet_NaN();
    }
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size())
        fail_at(path, line, std::string("cannot parse ") + what + " value '" + cell + "'");
    if (!std::isfinite(v))
        fail_at(path, line, std::string(what) + " value '" + cell + "' is not finite");
    return v;
}

bool header_matches(const std::vector<std::string>& got, const std::vector<std::string>& want) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i] != want[i]) return false;
    return true;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

// Reads the first non-comment, non-blank line; false at EOF.
bool next_content_line(std::istream& in, std::string& line, int& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        line = t;
        return true;
    }
    return false;
}

void append_row(std::vector<double>& dst, const double* src, int n) {
    dst.insert(dst.end(), src, src + n);
}

} // namespace

CollocationSet load_point_sets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open point file '" + path + "'");
    CollocationSet set;
    std::string line;
    int lineno = 0;
    if (!next_content_line(in, line, lineno)) return set; // header-less empty file
    const auto header = split_csv(line);
    const std::vector<std::string> h2 = {"x", "y", "set", "vx", "vy", "p", "area"};
    const std::vector<std::string> h3 = {"x", "y", "z", "set", "vx", "vy", "vz", "p", "area"};
    int nd = 0;
    if (header_matches(header, h2)) nd = 2;
    else if (header_matches(header, h3)) nd = 3;
    else fail_at(path, lineno, "bad header '" + join(header) + "' (expected '" + join(h2) +
                                   "' or '" + join(h3) + "')");
    set.n_sd = nd;
    const int ncol = nd == 2 ? 7 : 9;
    while (next_content_line(in, line, lineno)) {
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != ncol)
            fail_at(path, lineno, "expected " + std::to_string(ncol) + " columns, got " +
                                      std::to_string(cells.size()));
        double x[3] = {0, 0, 0};
        for (int c = 0; c < nd; ++c) x[c] = parse_cell(path, lineno, cells[c], "coordinate", true);
        const std::string& tag = cells[nd];
        const int vcol = nd + 1, pcol = nd + 1 + nd, acol = pcol + 1;
        if (tag == "f") {
            append_row(set.volume_x, x, nd);
        } else if (tag == "D" || tag == "M") {
            double v[3] = {0, 0, 0};
            for (int c = 0; c < nd; ++c)
                v[c] = parse_cell(path, lineno, cells[vcol + c], "velocity label", true);
            const double area = parse_cell(path, lineno, cells[acol], "area", false);
            if (tag == "D") {
                append_row(set.dirichlet_x, x, nd);
                append_row(set.dirichlet_v, v, nd);
                set.dirichlet_area.push_back(area);
            } else {
                append_row(set.moving_x, x, nd);
                append_row(set.moving_v, v, nd);
                set.moving_area.push_back(area);
            }
        } else if (tag == "N") {
            const double p = parse_cell(path, lineno, cells[pcol], "pressure label", true);
            const double area = parse_cell(path, lineno, cells[acol], "area", false);
            append_row(set.neumann_x, x, nd);
            set.neumann_p.push_back(p);
            set.neumann_area.push_back(area);
        } else {
            fail_at(path, lineno, "unknown set tag '" + tag + "' (expected f, D, N or M)");
        }
    }
    return set;
}

ReferenceCloud load_reference_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open point file '" + path + "'");
    ReferenceCloud cloud;
    std::string line;
    int lineno = 0;
    if (!next_content_line(in, line, lineno)) return cloud;
    // columns located by name so field exports (extra k/extrapolated
    // columns) are accepted as references
    const auto header = split_csv(line);
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int nd = col("z") >= 0 ? 3 : 2;
    int xcol[3] = {col("x"), col("y"), col("z")};
    int vcol[3] = {col("vx"), col("vy"), col("vz")};
    const int pcol = col("p");
    for (int c = 0; c < nd; ++c)
        if (xcol[c] < 0)
            fail_at(path, lineno, std::string("header misses coordinate column '") + "xyz"[c] +
                                      "' (got '" + join(header) + "')");
    bool fields = pcol >= 0;
    for (int c = 0; c < nd; ++c) fields = fields && vcol[c] >= 0;
    if (!fields && (pcol >= 0 || vcol[0] >= 0 || vcol[1] >= 0 || vcol[2] >= 0))
        fail_at(path, lineno,
                "header has some field columns but not all of vx,vy" +
                    std::string(nd == 3 ? ",vz" : "") + ",p");
    cloud.n_sd = nd;
    const int ncol = static_cast<int>(header.size());
    while (next_content_line(in, line, lineno)) {
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != ncol)
            fail_at(path, lineno, "expected " + std::to_string(ncol) + " columns, got " +
                                      std::to_string(cells.size()));
        for (int c = 0; c < nd; ++c)
            cloud.x.push_back(parse_cell(path, lineno, cells[xcol[c]], "coordinate", true));
        if (fields) {
            for (int c = 0; c < nd; ++c)
                cloud.v.push_back(parse_cell(path, lineno, cells[vcol[c]], "velocity", true));
            cloud.p.push_back(parse_cell(path, lineno, cells[pcol], "pressure", true));
        }
    }
    return cloud;
}

std::pair<CollocationSet, CollocationSet> split_test_set(const CollocationSet& set,
                                                         double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("test fraction must lie in (0,1)");
    const int n = set.n_volume();
    const int n_test = static_cast<int>(fraction * n);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    std::vector<char> is_test(n, 0);
    for (int i = 0; i < n_test; ++i) is_test[idx[i]] = 1;

    CollocationSet train = set, test;
    test.n_sd = set.n_sd;
    train.volume_x.clear();
    for (int i = 0; i < n; ++i) {
        auto& dst = is_test[i] ? test.volume_x : train.volume_x;
        append_row(dst, set.volume_x.data() + static_cast<std::size_t>(i) * set.n_sd, set.n_sd);
    }
    return {std::move(train), std::move(test)};
}

namespace {

using json = nlohmann::json;

std::array<double, 3> parse_vec(const json& j, int n_sd, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != n_sd)
        throw ConfigError("scenario " + what + " must be an array of " + std::to_string(n_sd) +
                          " numbers");
    std::array<double, 3> v{0.0, 0.0, 0.0};
    for (int i = 0; i < n_sd; ++i) v[i] = j[i].get<double>();
    return v;
}

using Predicate = std::function<bool(const double*, double)>;

Predicate parse_predicate(const json& j, int n_sd) {
    if (!j.is_object() || !j.contains("op"))
        throw ConfigError("scenario predicate node needs an 'op' field");
    const std::string op = j.at("op").get<std::string>();
    if (op == "true") return [](const double*, double) { return true; };
    if (op == "false") return [](const double*, double) { return false; };
    if (op == "not") {
        Predicate inner = parse_predicate(j.at("arg"), n_sd);
        return [inner](const double* x, double k) { return !inner(x, k); };
    }
    if (op == "and" || op == "or") {
        const json& args = j.at("args");
        if (!args.is_array() || args.empty())
            throw ConfigError("scenario '" + op + "' needs a non-empty 'args' array");
        std::vector<Predicate> inner;
        for (const auto& a : args) inner.push_back(parse_predicate(a, n_sd));
        const bool conj = op == "and";
        return [inner, conj](const double* x, double k) {
            for (const auto& p : inner)
                if (p(x, k) != conj) return !conj;
            return conj;
        };
    }
    if (op == "halfspace") {
        // normal . x + offset + k_coeff * k <= 0
        const auto n = parse_vec(j.at("normal"), n_sd, "halfspace normal");
        const double c = j.value("offset", 0.0);
        const double q = j.value("k_coeff", 0.0);
        return [n, c, q, n_sd](const double* x, double k) {
            double s = c + q * k;
            for (int i = 0; i < n_sd; ++i) s += n[i] * x[i];
            return s <= 0.0;
        };
    }
    if (op == "ball_outside") {
        // || mask o (x - center - k * k_dir) || >= radius
        const auto c = parse_vec(j.at("center"), n_sd, "ball center");
        const double r = j.at("radius").get<double>();
        std::array<double, 3> d{0.0, 0.0, 0.0}, m{1.0, 1.0, 1.0};
        if (j.contains("k_dir")) d = parse_vec(j.at("k_dir"), n_sd, "ball k_dir");
        if (j.contains("mask")) m = parse_vec(j.at("mask"), n_sd, "ball mask");
        return [c, r, d, m, n_sd](const double* x, double k) {
            double s = 0.0;
            for (int i = 0; i < n_sd; ++i) {
                const double e = m[i] * (x[i] - c[i] - k * d[i]);
                s += e * e;
            }
            return s >= r * r;
        };
    }
    throw ConfigError("unknown scenario predicate op '" + op + "'");
}

Scenario scenario_from_json(const std::string& path, int n_sd) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario definition '" + path + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, true); // allow comments
    } catch (const json::parse_error& e) {
        throw ConfigError("scenario definition '" + path + "': " + e.what());
    }
    Scenario s;
    s.n_sd = n_sd;
    s.name = j.value("name", std::string("file"));
    if (!j.contains("k_range")) throw ConfigError("scenario definition needs 'k_range'");
    const auto kr = j.at("k_range");
    if (!kr.is_array() || kr.size() != 2)
        throw ConfigError("scenario 'k_range' must be [min, max]");
    s.k_min = kr[0].get<double>();
    s.k_max = kr[1].get<double>();
    s.k_ref = j.value("k_reference", s.k_min);
    s.inside_fdn = j.contains("inside_fdn") ? parse_predicate(j.at("inside_fdn"), n_sd)
                                            : Predicate([](const double*, double) { return true; });
    s.inside_m = j.contains("inside_m") ? parse_predicate(j.at("inside_m"), n_sd)
                                        : Predicate([](const double*, double) { return true; });
    std::array<double, 3> a{0.0, 0.0, 0.0}, b{0.0, 0.0, 0.0};
    if (j.contains("transform")) {
        const auto& t = j.at("transform");
        if (t.contains("a")) a = parse_vec(t.at("a"), n_sd, "transform a");
        if (t.contains("b")) b = parse_vec(t.at("b"), n_sd, "transform b");
    }
    s.transform = [a, b, n_sd](const double* x, double k, double* out) {
        for (int i = 0; i < n_sd; ++i) out[i] = x[i] + k * a[i] + b[i];
    };
    // the reference configuration must map to itself
    for (int i = 0; i < n_sd; ++i)
        if (std::abs(s.k_ref * a[i] + b[i]) > 1e-12)
            throw ConfigError("scenario transform is not the identity at k_reference");
    return s;
}

} // namespace

Scenario make_scenario(const ScenarioConfig& cfg, int n_sd) {
    if (n_sd != 2 && n_sd != 3) throw ConfigError("scenario needs n_sd of 2 or 3");
    Scenario s;
    s.n_sd = n_sd;
    s.name = cfg.name;
    s.k_min = cfg.k_min;
    s.k_max = cfg.k_max;
    auto identity = [n_sd](const double* x, double, double* out) {
        for (int i = 0; i < n_sd; ++i) out[i] = x[i];
    };
    if (cfg.name == "static") {
        s.inside_fdn = [](const double*, double) { return true; };
        s.inside_m = [](const double*, double) { return true; };
        s.transform = identity;
    } else if (cfg.name == "cylinder-translate") {
        // cylinder of diameter D on the z-axis, shifted to y = k
        if (!(cfg.diameter > 0.0)) throw ConfigError("scenario key 'diameter' must be > 0");
        const double half = 0.5 * cfg.diameter;
        s.k_ref = 0.0;
        s.inside_fdn = [half](const double* x, double k) {
            const double dy = x[1] - k;
            return x[0] * x[0] + dy * dy >= half * half;
        };
        s.inside_m = [](const double*, double) { return true; };
        s.transform = [n_sd](const double* x, double k, double* out) {
            for (int i = 0; i < n_sd; ++i) out[i] = x[i];
            out[1] += k;
        };
    } else if (cfg.name == "tjunction-height") {
        // left junction arm opened to height k; as-built height is k_min
        if (!(cfg.inlet_length > 0.0)) throw ConfigError("scenario key 'inlet_length' must be > 0");
        if (!(cfg.junction_height > 0.0))
            throw ConfigError("scenario key 'junction_height' must be > 0");
        const double xin = -0.5 * cfg.inlet_length;
        const double H = cfg.junction_height;
        s.k_ref = cfg.k_min;
        const double kref = s.k_ref;
        s.inside_fdn = [xin](const double* x, double k) { return x[1] <= k || x[0] >= xin; };
        s.inside_m = [H](const double* x, double) { return x[1] <= H; };
        s.transform = [n_sd, kref](const double* x, double k, double* out) {
            for (int i = 0; i < n_sd; ++i) out[i] = x[i];
            out[1] += k - kref;
        };
    } else if (cfg.name == "file") {
        if (cfg.definition_path.empty())
            throw ConfigError("scenario 'file' needs a definition path");
        s = scenario_from_json(cfg.definition_path, n_sd);
        s.k_min = cfg.k_min == cfg.k_max && cfg.k_min == 0.0 ? s.k_min : cfg.k_min;
        s.k_max = cfg.k_min == cfg.k_max && cfg.k_min == 0.0 ? s.k_max : cfg.k_max;
    } else {
        throw ConfigError("unknown scenario '" + cfg.name +
                          "' (expected static, cylinder-translate, tjunction-height or file)");
    }
    if (s.k_min > s.k_max) throw ConfigError("scenario k range is empty (k_min > k_max)");
    s.parametric = s.k_max > s.k_min;
    return s;
}

ParameterSample sample_parameters(const CollocationSet& set, const Scenario& scenario, Rng& rng) {
    ParameterSample ks;
    auto fill = [&](std::vector<double>& dst, int n) {
        dst.resize(n);
        if (!scenario.parametric) {
            std::fill(dst.begin(), dst.end(), scenario.static_k());
        } else {
            for (int i = 0; i < n; ++i) dst[i] = rng.uniform(scenario.k_min, scenario.k_max);
        }
    };
    fill(ks.volume_k, set.n_volume());
    fill(ks.dirichlet_k, set.n_dirichlet());
    fill(ks.neumann_k, set.n_neumann());
    fill(ks.moving_k, set.n_moving());
    return ks;
}

FilteredSet apply_parametric_pipeline(const CollocationSet& set, const ParameterSample& ks,
                                      const Scenario& scenario) {
    const int nd = set.n_sd;
    if (static_cast<int>(ks.volume_k.size()) != set.n_volume() ||
        static_cast<int>(ks.dirichlet_k.size()) != set.n_dirichlet() ||
        static_cast<int>(ks.neumann_k.size()) != set.n_neumann() ||
        static_cast<int>(ks.moving_k.size()) != set.n_moving())
        throw std::invalid_argument("parameter sample does not match the point set");
    auto check = [nd](const char* pop, int i, const double* x, double k) {
        for (int c = 0; c < nd; ++c)
            if (!std::isfinite(x[c]))
                throw std::invalid_argument(std::string("non-finite position (") + pop +
                                            " point " + std::to_string(i) + ")");
        if (!std::isfinite(k))
            throw std::invalid_argument(std::string("non-finite parameter (") + pop + " point " +
                                        std::to_string(i) + ")");
    };

    FilteredSet out;
    out.n_sd = nd;
    for (int i = 0; i < set.n_volume(); ++i) {
        const double* x = set.volume_x.data() + static_cast<std::size_t>(i) * nd;
        check("volume", i, x, ks.volume_k[i]);
        if (!scenario.inside_fdn(x, ks.volume_k[i])) continue;
        append_row(out.volume_x, x, nd);
        out.volume_k.push_back(ks.volume_k[i]);
        out.volume_src.push_back(i);
    }
    for (int i = 0; i < set.n_dirichlet(); ++i) {
        const double* x = set.dirichlet_x.data() + static_cast<std::size_t>(i) * nd;
        check("dirichlet", i, x, ks.dirichlet_k[i]);
        if (!scenario.inside_fdn(x, ks.dirichlet_k[i])) continue;
        append_row(out.dirichlet_x, x, nd);
        append_row(out.dirichlet_v, set.dirichlet_v.data() + static_cast<std::size_t>(i) * nd, nd);
        out.dirichlet_k.push_back(ks.dirichlet_k[i]);
        out.dirichlet_src.push_back(i);
    }
    const int nD = set.n_dirichlet();
    for (int i = 0; i < set.n_moving(); ++i) {
        const double* x = set.moving_x.data() + static_cast<std::size_t>(i) * nd;
        const double k = ks.moving_k[i];
        check("moving", i, x, k);
        double moved[3];
        scenario.transform(x, k, moved);
        if (!scenario.inside_m(moved, k)) continue;
        append_row(out.dirichlet_x, moved, nd);
        append_row(out.dirichlet_v, set.moving_v.data() + static_cast<std::size_t>(i) * nd, nd);
        out.dirichlet_k.push_back(k);
        out.dirichlet_src.push_back(nD + i);
    }
    for (int i = 0; i < set.n_neumann(); ++i) {
        const double* x = set.neumann_x.data() + static_cast<std::size_t>(i) * nd;
        check("neumann", i, x, ks.neumann_k[i]);
        if (!scenario.inside_fdn(x, ks.neumann_k[i])) continue;
        append_row(out.neumann_x, x, nd);
        out.neumann_p.push_back(set.neumann_p[i]);
        out.neumann_k.push_back(ks.neumann_k[i]);
        out.neumann_src.push_back(i);
    }
    return out;
}

std::vector<BatchIndices> make_batches(const FilteredSet& set, int max_batch, Rng& rng) {
    if (max_batch < 1) throw std::invalid_argument("max batch size must be >= 1");
    const int counts[3] = {set.n_volume(), set.n_dirichlet(), set.n_neumann()};
    int B = 0;
    for (int n : counts) B = std::max(B, (n + max_batch - 1) / max_batch);
    std::vector<BatchIndices> batches(B);
    if (B == 0) return batches;
    // shuffle order: volume, dirichlet, neumann
    for (int pop = 0; pop < 3; ++pop) {
        std::vector<int> idx(counts[pop]);
        for (int i = 0; i < counts[pop]; ++i) idx[i] = i;
        rng.shuffle(idx);
        const int base = counts[pop] / B, rem = counts[pop] % B;
        int at = 0;
        for (int b = 0; b < B; ++b) {
            const int take = base + (b < rem ? 1 : 0);
            auto& dst = pop == 0   ? batches[b].volume
                        : pop == 1 ? batches[b].dirichlet
                                   : batches[b].neumann;
            dst.assign(idx.begin() + at, idx.begin() + at + take);
            at += take;
        }
    }
    return batches;
}

EvalBatch assemble_batch(const FilteredSet& set, const BatchIndices* indices,
                         const ReferenceScales& scales, bool parametric) {
    const int nd = set.n_sd;
    const int iw = nd + (parametric ? 1 : 0);
    EvalBatch batch;
    batch.input_width = iw;
    const double xs = 1.0 / scales.L_ref;
    const double vs = 1.0 / scales.V_ref;
    const double ps = 1.0 / scales.pressure_scale();

    auto add_point = [&](std::vector<double>& dst, const std::vector<double>& x,
                         const std::vector<double>& k, int i) {
        for (int c = 0; c < nd; ++c) dst.push_back(x[static_cast<std::size_t>(i) * nd + c] * xs);
        if (parametric) dst.push_back(k[i] * xs);
    };
    auto take = [&](const std::vector<int>* list, int n, auto&& fn) {
        if (list) {
            for (int i : *list) fn(i);
        } else {
            for (int i = 0; i < n; ++i) fn(i);
        }
    };
    take(indices ? &indices->volume : nullptr, set.n_volume(),
         [&](int i) { add_point(batch.volume_x, set.volume_x, set.volume_k, i); });
    take(indices ? &indices->dirichlet : nullptr, set.n_dirichlet(), [&](int i) {
        add_point(batch.dirichlet_x, set.dirichlet_x, set.dirichlet_k, i);
        for (int c = 0; c < nd; ++c)
            batch.dirichlet_v.push_back(set.dirichlet_v[static_cast<std::size_t>(i) * nd + c] * vs);
    });
    take(indices ? &indices->neumann : nullptr, set.n_neumann(), [&](int i) {
        add_point(batch.neumann_x, set.neumann_x, set.neumann_k, i);
        batch.neumann_p.push_back(set.neumann_p[i] * ps);
    });
    return batch;
}

} // namespace pinnflow
