#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pinnflow/geometry.hpp"
#include "pinnflow/sampler.hpp"

using namespace pinnflow;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

CollocationSet tiny_set_2d() {
    CollocationSet s;
    s.n_sd = 2;
    s.volume_x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    s.dirichlet_x = {0.0, 0.0, 1.0, 0.0};
    s.dirichlet_v = {1.0, 0.0, 0.5, -0.25};
    s.dirichlet_area = {0.01, 0.01};
    s.neumann_x = {2.0, 0.0};
    s.neumann_p = {101325.0};
    s.neumann_area = {0.02};
    return s;
}

} // namespace

TEST_CASE("point CSV files round-trip through the loader") {
    CollocationSet s = tiny_set_2d();
    s.moving_x = {0.5, 0.5};
    s.moving_v = {0.0, 0.0};
    s.moving_area = {0.005};
    const std::string path = temp_path("pf_points_roundtrip.csv");
    write_point_csv(path, s);
    CollocationSet r = load_point_sets(path);
    CHECK(r.n_sd == 2);
    CHECK(r.volume_x == s.volume_x);
    CHECK(r.dirichlet_x == s.dirichlet_x);
    CHECK(r.dirichlet_v == s.dirichlet_v);
    CHECK(r.dirichlet_area == s.dirichlet_area);
    CHECK(r.neumann_x == s.neumann_x);
    CHECK(r.neumann_p == s.neumann_p);
    CHECK(r.moving_x == s.moving_x);
    CHECK(r.moving_v == s.moving_v);
    std::remove(path.c_str());
}

TEST_CASE("loader errors carry file name and line number") {
    const std::string path = temp_path("pf_points_bad.csv");

    SUBCASE("unknown set label") {
        std::ofstream f(path);
        f << "x,y,set,vx,vy,p,area\n";
        f << "0.1,0.2,f,,,,\n";
        f << "0.3,0.4,Q,1,0,,\n";
        f.close();
        try {
            (void)load_point_sets(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            CHECK(msg.find(path) != std::string::npos);
            CHECK(msg.find(":3") != std::string::npos);
        }
    }

    SUBCASE("dirichlet row without velocity labels") {
        std::ofstream f(path);
        f << "x,y,set,vx,vy,p,area\n";
        f << "0.3,0.4,D,,,,\n";
        f.close();
        try {
            (void)load_point_sets(path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }

    SUBCASE("neumann row without pressure label") {
        std::ofstream f(path);
        f << "x,y,set,vx,vy,p,area\n";
        f << "0.3,0.4,N,,,,\n";
        f.close();
        CHECK_THROWS_AS((void)load_point_sets(path), ConfigError);
    }

    SUBCASE("unparseable number") {
        std::ofstream f(path);
        f << "x,y,set,vx,vy,p,area\n";
        f << "0.1,zap,f,,,,\n";
        f.close();
        CHECK_THROWS_AS((void)load_point_sets(path), ConfigError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)load_point_sets(temp_path("pf_no_points.csv")), ConfigError);
    }

    std::remove(path.c_str());
}

TEST_CASE("test split takes floor(fraction*n) volume points and is deterministic") {
    CollocationSet s;
    s.n_sd = 2;
    const int n = 57813;
    s.volume_x.resize(static_cast<std::size_t>(n) * 2);
    for (int i = 0; i < n; ++i) {
        s.volume_x[2 * i] = i;
        s.volume_x[2 * i + 1] = -i;
    }
    s.dirichlet_x = {0.0, 0.0};
    s.dirichlet_v = {1.0, 0.0};
    s.dirichlet_area = {1.0};

    Rng rng(5);
    auto [train, test] = split_test_set(s, 0.01, rng);
    CHECK(test.n_volume() == 578); // floor(0.01 * 57813)
    CHECK(train.n_volume() == n - 578);
    CHECK(test.n_dirichlet() == 0);
    CHECK(train.n_dirichlet() == 1);

    // union is exact: recover the encoded index from the x coordinate
    std::vector<char> seen(n, 0);
    for (int i = 0; i < train.n_volume(); ++i) seen[(int)train.volume_x[2 * i]]++;
    for (int i = 0; i < test.n_volume(); ++i) seen[(int)test.volume_x[2 * i]]++;
    CHECK(std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; }));

    Rng rng2(5);
    auto [train2, test2] = split_test_set(s, 0.01, rng2);
    CHECK(test2.volume_x == test.volume_x);
    CHECK(train2.volume_x == train.volume_x);

    CHECK_THROWS_AS((void)split_test_set(s, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS((void)split_test_set(s, 1.0, rng), std::invalid_argument);
}

TEST_CASE("built-in scenario predicates match their definitions") {
    SUBCASE("cylinder-translate") {
        ScenarioConfig cfg;
        cfg.name = "cylinder-translate";
        cfg.k_min = -0.05;
        cfg.k_max = 0.05;
        cfg.diameter = 0.1;
        Scenario sc = make_scenario(cfg, 3);
        CHECK(sc.parametric);
        CHECK(sc.k_ref == 0.0);

        // point at distance 0.04 < R from the k=0 cylinder axis: excluded at
        // k=0, retained once the cylinder moves to k=-0.05
        const double p[3] = {0.0, 0.04, 0.2};
        CHECK_FALSE(sc.inside_fdn(p, 0.0));
        CHECK(sc.inside_fdn(p, -0.05));
        // boundary case: exactly on the shifted cylinder surface counts inside
        const double q[3] = {0.05, 0.0, 0.1};
        CHECK(sc.inside_fdn(q, 0.0));
        // moving points are never filtered
        CHECK(sc.inside_m(p, 0.0));

        // transform shifts by (0, k, 0) and is the identity at k_ref
        double out[3];
        sc.transform(p, 0.03, out);
        CHECK(out[0] == p[0]);
        CHECK(out[1] == doctest::Approx(p[1] + 0.03).epsilon(1e-15));
        CHECK(out[2] == p[2]);
        sc.transform(p, sc.k_ref, out);
        CHECK(std::abs(out[0] - p[0]) <= 1e-12);
        CHECK(std::abs(out[1] - p[1]) <= 1e-12);
        CHECK(std::abs(out[2] - p[2]) <= 1e-12);
    }

    SUBCASE("tjunction-height") {
        ScenarioConfig cfg;
        cfg.name = "tjunction-height";
        cfg.k_min = 0.03;
        cfg.k_max = 0.09;
        Scenario sc = make_scenario(cfg, 3);
        CHECK(sc.parametric);
        CHECK(sc.k_ref == 0.03);

        // junction-arm point above the arm ceiling at k=0.03, below at k=0.07
        const double p[3] = {-0.1, 0.05, 0.02};
        CHECK_FALSE(sc.inside_fdn(p, 0.03));
        CHECK(sc.inside_fdn(p, 0.07));
        // right of the inlet opening (x >= -L_IN/2 = -0.045): always inside
        const double q[3] = {-0.02, 0.15, 0.02};
        CHECK(sc.inside_fdn(q, 0.03));
        // moving filter keeps y <= H = 0.2 regardless of k
        const double m1[3] = {-0.1, 0.19, 0.02};
        const double m2[3] = {-0.1, 0.21, 0.02};
        CHECK(sc.inside_m(m1, 0.03));
        CHECK_FALSE(sc.inside_m(m2, 0.03));

        // transform lifts the arm ceiling from the reference height
        double out[3];
        sc.transform(m1, 0.07, out);
        CHECK(out[0] == m1[0]);
        CHECK(out[1] == doctest::Approx(m1[1] + 0.04).epsilon(1e-12));
        CHECK(out[2] == m1[2]);
        sc.transform(m1, sc.k_ref, out);
        CHECK(std::abs(out[1] - m1[1]) <= 1e-12);
    }

    SUBCASE("degenerate interval disables the parameter input") {
        ScenarioConfig cfg;
        cfg.name = "cylinder-translate";
        cfg.k_min = 0.02;
        cfg.k_max = 0.02;
        Scenario sc = make_scenario(cfg, 3);
        CHECK_FALSE(sc.parametric);
        CHECK(sc.static_k() == 0.02);
    }

    SUBCASE("bad ranges and names are rejected") {
        ScenarioConfig cfg;
        cfg.name = "cylinder-translate";
        cfg.k_min = 0.1;
        cfg.k_max = -0.1;
        CHECK_THROWS_AS((void)make_scenario(cfg, 3), ConfigError);
        cfg.k_max = 0.1;
        cfg.name = "warp-drive";
        CHECK_THROWS_AS((void)make_scenario(cfg, 3), ConfigError);
    }
}

TEST_CASE("static scenario pipeline is the identity") {
    CollocationSet s = tiny_set_2d();
    ScenarioConfig cfg; // name == "static"
    Scenario sc = make_scenario(cfg, 2);
    CHECK_FALSE(sc.parametric);
    Rng rng(3);
    ParameterSample ks = sample_parameters(s, sc, rng);
    CHECK(std::all_of(ks.volume_k.begin(), ks.volume_k.end(),
                      [](double k) { return k == 0.0; }));
    FilteredSet f = apply_parametric_pipeline(s, ks, sc);
    CHECK(f.volume_x == s.volume_x);
    CHECK(f.dirichlet_x == s.dirichlet_x);
    CHECK(f.dirichlet_v == s.dirichlet_v);
    CHECK(f.neumann_x == s.neumann_x);
    CHECK(f.neumann_p == s.neumann_p);
    // static scenarios consume no random draws
    Rng a(3), b(3);
    (void)sample_parameters(s, sc, a);
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("parametric pipeline filters, transforms and relabels") {
    ScenarioConfig cfg;
    cfg.name = "cylinder-translate";
    cfg.k_min = -0.05;
    cfg.k_max = 0.05;
    Scenario sc = make_scenario(cfg, 3);

    CollocationSet s;
    s.n_sd = 3;
    // volume points: one safely outside every cylinder position, one inside
    // the cylinder whenever |k| is small
    s.volume_x = {0.5, 0.0, 0.2, /**/ 0.0, 0.0, 0.2};
    s.dirichlet_x = {0.5, 0.1, 0.2};
    s.dirichlet_v = {1.0, 0.0, 0.0};
    s.neumann_x = {0.9, 0.0, 0.2, /**/ 0.01, 0.0, 0.2};
    s.neumann_p = {0.0, 7.0};
    s.moving_x = {0.05, 0.0, 0.2};
    s.moving_v = {0.0, 0.0, 0.0};

    ParameterSample ks;
    ks.volume_k = {0.01, 0.01};
    ks.dirichlet_k = {-0.02};
    ks.neumann_k = {0.0, 0.0};
    ks.moving_k = {0.04};

    FilteredSet f = apply_parametric_pipeline(s, ks, sc);

    // second volume point sits inside the cylinder at k=0.01 -> dropped
    REQUIRE(f.n_volume() == 1);
    CHECK(f.volume_x[0] == 0.5);
    CHECK(f.volume_src == std::vector<int>{0});

    // second neumann point is inside at k=0 -> dropped, label follows
    REQUIRE(f.n_neumann() == 1);
    CHECK(f.neumann_p == std::vector<double>{0.0});
    CHECK(f.neumann_src == std::vector<int>{0});

    // dirichlet: static survivor first, then the transformed moving point
    REQUIRE(f.n_dirichlet() == 2);
    CHECK(f.dirichlet_x[0] == 0.5);
    CHECK(f.dirichlet_x[3] == 0.05);
    CHECK(f.dirichlet_x[4] == doctest::Approx(0.04).epsilon(1e-15)); // shifted by k
    CHECK(f.dirichlet_k == std::vector<double>{-0.02, 0.04});
    CHECK(f.dirichlet_src == std::vector<int>{0, 1}); // moving src offset by nD

    SUBCASE("filtering only ever shrinks populations") {
        CHECK(f.n_volume() <= s.n_volume());
        CHECK(f.n_neumann() <= s.n_neumann());
        CHECK(f.n_dirichlet() <= s.n_dirichlet() + s.n_moving());
    }

    SUBCASE("non-finite parameters are rejected") {
        ks.volume_k[0] = std::nan("");
        CHECK_THROWS_AS((void)apply_parametric_pipeline(s, ks, sc), std::invalid_argument);
    }
}

TEST_CASE("parameter samples stay inside the interval and follow the draw order") {
    ScenarioConfig cfg;
    cfg.name = "cylinder-translate";
    cfg.k_min = -0.05;
    cfg.k_max = 0.05;
    Scenario sc = make_scenario(cfg, 3);
    CollocationSet s;
    s.n_sd = 3;
    s.volume_x.resize(3 * 7);
    s.dirichlet_x.resize(3 * 3);
    s.dirichlet_v.resize(3 * 3);
    s.neumann_x.resize(3 * 2);
    s.neumann_p.resize(2);
    s.moving_x.resize(3 * 4);
    s.moving_v.resize(3 * 4);

    Rng rng(11);
    ParameterSample ks = sample_parameters(s, sc, rng);
    CHECK(ks.volume_k.size() == 7);
    CHECK(ks.dirichlet_k.size() == 3);
    CHECK(ks.neumann_k.size() == 2);
    CHECK(ks.moving_k.size() == 4);
    for (const auto* v : {&ks.volume_k, &ks.dirichlet_k, &ks.neumann_k, &ks.moving_k})
        for (double k : *v) {
            CHECK(k >= -0.05);
            CHECK(k < 0.05);
        }

    // population order: volume draws come first, then dirichlet, ...
    Rng ref(11);
    std::vector<double> expect(16);
    for (double& k : expect) k = ref.uniform(-0.05, 0.05);
    std::vector<double> got;
    for (const auto* v : {&ks.volume_k, &ks.dirichlet_k, &ks.neumann_k, &ks.moving_k})
        got.insert(got.end(), v->begin(), v->end());
    CHECK(got == expect);
}

TEST_CASE("batch partition covers every index exactly once with near-equal sizes") {
    FilteredSet f;
    f.n_sd = 2;
    const int nf = 103, nD = 17, nN = 5;
    f.volume_x.resize(2 * nf);
    f.volume_k.resize(nf);
    f.dirichlet_x.resize(2 * nD);
    f.dirichlet_v.resize(2 * nD);
    f.dirichlet_k.resize(nD);
    f.neumann_x.resize(2 * nN);
    f.neumann_p.resize(nN);
    f.neumann_k.resize(nN);

    Rng rng(21);
    auto batches = make_batches(f, 25, rng);
    // B = ceil(103/25) = 5
    REQUIRE(batches.size() == 5);

    auto check_cover = [](const std::vector<BatchIndices>& bs, int n,
                          std::vector<int> BatchIndices::*member) {
        std::vector<char> seen(n, 0);
        std::size_t mx = 0, mn = static_cast<std::size_t>(n) + 1;
        for (const auto& b : bs) {
            const auto& idx = b.*member;
            mx = std::max(mx, idx.size());
            mn = std::min(mn, idx.size());
            for (int i : idx) {
                REQUIRE(i >= 0);
                REQUIRE(i < n);
                seen[i]++;
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; }));
        CHECK(mx - mn <= 1);
    };
    check_cover(batches, nf, &BatchIndices::volume);
    check_cover(batches, nD, &BatchIndices::dirichlet);
    check_cover(batches, nN, &BatchIndices::neumann);

    SUBCASE("max_batch >= n gives a single full batch") {
        Rng r2(22);
        auto one = make_batches(f, 1000, r2);
        REQUIRE(one.size() == 1);
        CHECK(one[0].volume.size() == static_cast<std::size_t>(nf));
        CHECK(one[0].dirichlet.size() == static_cast<std::size_t>(nD));
        CHECK(one[0].neumann.size() == static_cast<std::size_t>(nN));
    }

    SUBCASE("nonpositive max_batch is rejected") {
        Rng r3(23);
        CHECK_THROWS_AS((void)make_batches(f, 0, r3), std::invalid_argument);
    }
}

TEST_CASE("batch assembly nondimensionalizes positions and labels") {
    FilteredSet f;
    f.n_sd = 2;
    f.volume_x = {2.2, 1.1};
    f.volume_k = {0.05};
    f.volume_src = {0};
    f.dirichlet_x = {1.1, 0.0};
    f.dirichlet_v = {2.8, -1.4};
    f.dirichlet_k = {0.02};
    f.dirichlet_src = {0};
    f.neumann_x = {0.0, 1.1};
    f.neumann_p = {3.92};
    f.neumann_k = {0.0};
    f.neumann_src = {0};

    ReferenceScales sc;
    sc.L_ref = 1.1;
    sc.V_ref = 1.4;
    sc.rho = 1.0;
    sc.mu = 0.02;

    SUBCASE("parametric appends k over L_ref") {
        EvalBatch b = assemble_batch(f, nullptr, sc, true);
        CHECK(b.input_width == 3);
        REQUIRE(b.volume_x.size() == 3);
        CHECK(b.volume_x[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(b.volume_x[1] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(b.volume_x[2] == doctest::Approx(0.05 / 1.1).epsilon(1e-15));
        CHECK(b.dirichlet_v[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(b.dirichlet_v[1] == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(b.neumann_p[0] == doctest::Approx(2.0).epsilon(1e-15));
    }

    SUBCASE("non-parametric keeps the spatial width") {
        EvalBatch b = assemble_batch(f, nullptr, sc, false);
        CHECK(b.input_width == 2);
        CHECK(b.volume_x.size() == 2);
    }

    SUBCASE("explicit index selection picks the named points") {
        BatchIndices idx;
        idx.volume = {0};
        EvalBatch b = assemble_batch(f, &idx, sc, false);
        CHECK(b.n_volume() == 1);
        CHECK(b.n_dirichlet() == 0);
        CHECK(b.n_neumann() == 0);
    }
}

TEST_CASE("json scenario definitions build working predicates") {
    const std::string path = temp_path("pf_scenario.json");
    std::ofstream f(path);
    // masked ball reproduces the translating cylinder, a halfspace keeps the
    // far field, the moving filter caps y, the transform shifts y by k
    f << R"({
  "k_range": [-0.05, 0.05],
  "k_reference": 0.0,
  "inside_fdn": {"op": "or", "args": [
      {"op": "ball_outside", "center": [0.0, 0.0, 0.0], "radius": 0.05,
       "k_dir": [0, 1, 0], "mask": [1, 1, 0]},
      {"op": "halfspace", "normal": [-1, 0, 0], "offset": 0.5}]},
  "inside_m": {"op": "halfspace", "normal": [0, 1, 0], "offset": -0.2},
  "transform": {"a": [0.0, 1.0, 0.0]}
})";
    f.close();

    ScenarioConfig cfg;
    cfg.name = "file";
    cfg.definition_path = path;
    cfg.k_min = -0.05;
    cfg.k_max = 0.05;
    Scenario sc = make_scenario(cfg, 3);
    CHECK(sc.parametric);
    CHECK(sc.k_ref == 0.0);

    const double inside_cyl[3] = {0.0, 0.01, 0.2};
    CHECK_FALSE(sc.inside_fdn(inside_cyl, 0.0));
    CHECK(sc.inside_fdn(inside_cyl, -0.05));
    const double far_x[3] = {0.9, 0.0, 0.2}; // halfspace x >= 0.5 keeps it
    CHECK(sc.inside_fdn(far_x, 0.0));
    const double low[3] = {0.0, 0.1, 0.0};
    const double high[3] = {0.0, 0.3, 0.0};
    CHECK(sc.inside_m(low, 0.0));
    CHECK_FALSE(sc.inside_m(high, 0.0));

    double out[3];
    sc.transform(inside_cyl, 0.03, out);
    CHECK(out[1] == doctest::Approx(0.04).epsilon(1e-12));
    sc.transform(inside_cyl, 0.0, out);
    CHECK(std::abs(out[1] - inside_cyl[1]) <= 1e-12);

    SUBCASE("the json k range applies when the config leaves it open") {
        ScenarioConfig open = cfg;
        open.k_min = open.k_max = 0.0;
        Scenario so = make_scenario(open, 3);
        CHECK(so.k_min == -0.05);
        CHECK(so.k_max == 0.05);
        CHECK(so.parametric);
    }

    SUBCASE("unknown predicate ops are rejected") {
        std::ofstream g(path);
        g << R"({"k_range": [0, 1], "inside_fdn": {"op": "frobnicate"}})";
        g.close();
        CHECK_THROWS_AS((void)make_scenario(cfg, 3), ConfigError);
    }

    SUBCASE("a transform that moves the reference configuration is rejected") {
        std::ofstream g(path);
        g << R"({"k_range": [0, 1], "transform": {"b": [0.1, 0.0, 0.0]}})";
        g.close();
        CHECK_THROWS_AS((void)make_scenario(cfg, 3), ConfigError);
    }

    SUBCASE("a missing k range is rejected") {
        std::ofstream g(path);
        g << R"({"inside_m": {"op": "true"}})";
        g.close();
        CHECK_THROWS_AS((void)make_scenario(cfg, 3), ConfigError);
    }

    std::remove(path.c_str());
}
