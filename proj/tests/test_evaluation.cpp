#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pinnflow/autodiff.hpp"
#include "pinnflow/evaluation.hpp"

using namespace pinnflow;

namespace {

ReferenceScales make_scales(double L, double V, double rho, double mu) {
    ReferenceScales s;
    s.L_ref = L;
    s.V_ref = V;
    s.rho = rho;
    s.mu = mu;
    return s;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("test_loss identities") {
    std::vector<double> vr = {0.3, -1.2, 0.8, 2.0}, pr = {0.5, -0.25};

    SUBCASE("exact prediction scores zero") {
        CHECK(test_loss(vr, pr, vr, pr) == 0.0);
    }

    SUBCASE("zero prediction scores one") {
        std::vector<double> vz(vr.size(), 0.0), pz(pr.size(), 0.0);
        CHECK(test_loss(vz, pz, vr, pr) == 1.0);
    }

    SUBCASE("ten percent off everywhere scores 0.1") {
        std::vector<double> vp = vr, pp = pr;
        for (double& v : vp) v *= 1.1;
        for (double& p : pp) p *= 1.1;
        CHECK(test_loss(vp, pp, vr, pr) == doctest::Approx(0.1).epsilon(1e-12));
    }

    SUBCASE("velocity and pressure pool into one norm") {
        // |diff| = (0,0,0,0 | 5), |ref| = (3,4,0,0 | 0) -> ratio exactly 1
        std::vector<double> vref = {3.0, 4.0, 0.0, 0.0}, pref = {0.0};
        std::vector<double> vpred = vref, ppred = {5.0};
        CHECK(test_loss(vpred, ppred, vref, pref) == 1.0);
    }

    SUBCASE("invariant under a common power-of-two scaling") {
        std::vector<double> vp = {1.0, -0.5, 0.25, 2.0}, pp = {0.125, 3.0};
        const double base = test_loss(vp, pp, vr, pr);
        std::vector<double> vp2 = vp, pp2 = pp, vr2 = vr, pr2 = pr;
        for (double* arr : {vp2.data(), vr2.data()})
            for (int i = 0; i < 4; ++i) arr[i] *= 2.0;
        for (double* arr : {pp2.data(), pr2.data()})
            for (int i = 0; i < 2; ++i) arr[i] *= 2.0;
        CHECK(test_loss(vp2, pp2, vr2, pr2) == base);
    }

    SUBCASE("rejects a zero reference and mismatched lengths") {
        std::vector<double> z4(4, 0.0), z2(2, 0.0);
        CHECK_THROWS_AS(test_loss(z4, z2, z4, z2), std::invalid_argument);
        std::vector<double> v3(3, 1.0);
        CHECK_THROWS_AS(test_loss(v3, pr, vr, pr), std::invalid_argument);
        CHECK_THROWS_AS(test_loss(vr, z4, vr, pr), std::invalid_argument);
    }
}

TEST_CASE("evaluate_vp returns the network velocity and pressure") {
    SUBCASE("direct velocity head") {
        NetworkParams params = init_params(2, false, 2, 6, 21, OutputMode::NoStreamFunction);
        const OutputLayout lay = layout_of(params);
        std::vector<double> q = {0.2, -0.4, 1.0, 0.3, -0.7, 0.9};
        std::vector<double> v, p;
        evaluate_vp(params, q, v, p);
        REQUIRE(v.size() == 6);
        REQUIRE(p.size() == 3);
        for (int i = 0; i < 3; ++i) {
            DerivativeBundle b = reference::forward_point(params, q.data() + 2 * i, 0);
            CHECK(v[2 * i] == doctest::Approx(b.value[lay.velocity(0)]).epsilon(1e-13));
            CHECK(v[2 * i + 1] == doctest::Approx(b.value[lay.velocity(1)]).epsilon(1e-13));
            CHECK(p[i] == doctest::Approx(b.value[lay.pressure()]).epsilon(1e-13));
        }
    }

    SUBCASE("stream-function head differentiates the potential") {
        NetworkParams params = init_params(2, false, 2, 6, 22, OutputMode::Mixed);
        const OutputLayout lay = layout_of(params);
        std::vector<double> q = {0.1, 0.6};
        std::vector<double> v, p;
        evaluate_vp(params, q, v, p);
        // v = (dPsi/dy, -dPsi/dx), central differences on the raw net
        const double h = 1e-5;
        auto psi = [&](double x, double y) {
            const double xy[2] = {x, y};
            return reference::forward_point(params, xy, 0).value[lay.psi(0)];
        };
        const double vx = (psi(q[0], q[1] + h) - psi(q[0], q[1] - h)) / (2 * h);
        const double vy = -(psi(q[0] + h, q[1]) - psi(q[0] - h, q[1])) / (2 * h);
        CHECK(v[0] == doctest::Approx(vx).epsilon(1e-7));
        CHECK(v[1] == doctest::Approx(vy).epsilon(1e-7));
    }

    SUBCASE("rejects misaligned input lengths") {
        NetworkParams params = init_params(2, false, 1, 4, 23, OutputMode::Mixed);
        std::vector<double> bad = {0.1, 0.2, 0.3}, v, p;
        CHECK_THROWS_AS(evaluate_vp(params, bad, v, p), std::invalid_argument);
    }
}

TEST_CASE("predict_field redimensionalizes and flags extrapolation") {
    ReferenceScales scales = make_scales(1.1, 1.4, 1000.0, 20.0);

    SUBCASE("static checkpoint") {
        Checkpoint ckpt{init_params(2, false, 2, 6, 31, OutputMode::Mixed), scales};
        std::vector<double> xq = {0.22, -0.11, 0.9, 0.3};
        FieldPrediction pred = predict_field(ckpt, xq, /*k=*/123.0);
        CHECK(pred.n_sd == 2);
        CHECK_FALSE(pred.parametric);
        CHECK(pred.n_points() == 2);
        CHECK(pred.k.empty());
        CHECK(pred.x == xq);
        CHECK(pred.checkpoint_id == checkpoint_id(ckpt.params));
        for (char e : pred.extrapolated) CHECK(e == 0);

        // same evaluation by hand: nondimensional inputs, rescaled outputs
        std::vector<double> in(4), v, p;
        for (int i = 0; i < 4; ++i) in[i] = xq[i] / scales.L_ref;
        evaluate_vp(ckpt.params, in, v, p);
        for (int i = 0; i < 4; ++i) CHECK(pred.v[i] == v[i] * scales.V_ref);
        for (int i = 0; i < 2; ++i) CHECK(pred.p[i] == p[i] * scales.pressure_scale());
    }

    SUBCASE("parametric checkpoint records k and the extrapolation flag") {
        Checkpoint ckpt{init_params(2, true, 2, 6, 32, OutputMode::Mixed), scales};
        std::vector<double> xq = {0.1, 0.2};
        std::array<double, 2> range = {-0.05, 0.05};
        FieldPrediction in_range = predict_field(ckpt, xq, 0.03, range);
        CHECK(in_range.parametric);
        REQUIRE(in_range.k.size() == 1);
        CHECK(in_range.k[0] == 0.03);
        CHECK(in_range.extrapolated[0] == 0);
        FieldPrediction out_of_range = predict_field(ckpt, xq, 0.08, range);
        CHECK(out_of_range.extrapolated[0] == 1);
        FieldPrediction unchecked = predict_field(ckpt, xq, 0.08);
        CHECK(unchecked.extrapolated[0] == 0); // no range given
        // k enters the network: different k, different prediction
        CHECK(in_range.v[0] != out_of_range.v[0]);
    }

    SUBCASE("empty query and duplicate points") {
        Checkpoint ckpt{init_params(2, false, 1, 4, 33, OutputMode::Mixed), scales};
        FieldPrediction empty = predict_field(ckpt, std::vector<double>{});
        CHECK(empty.n_points() == 0);
        CHECK(empty.v.empty());
        CHECK(empty.p.empty());

        std::vector<double> twice = {0.4, 0.5, 0.4, 0.5};
        FieldPrediction dup = predict_field(ckpt, twice);
        CHECK(dup.v[0] == dup.v[2]);
        CHECK(dup.v[1] == dup.v[3]);
        CHECK(dup.p[0] == dup.p[1]);

        std::vector<double> bad = {0.1, 0.2, 0.3};
        CHECK_THROWS_AS(predict_field(ckpt, bad), std::invalid_argument);
    }
}

TEST_CASE("field csv carries metadata, k and the extrapolation column") {
    ReferenceScales scales = make_scales(1.1, 1.4, 1000.0, 20.0);
    Checkpoint ckpt{init_params(2, false, 1, 4, 41, OutputMode::Mixed), scales};
    std::vector<double> xq = {0.25, -0.5, 1.0, 0.75};
    FieldPrediction pred = predict_field(ckpt, xq);

    const std::string path =
        (std::filesystem::temp_directory_path() / "pinnflow_field_test.csv").string();
    write_field_csv(path, pred, scales);
    auto lines = lines_of(slurp(path));
    std::filesystem::remove(path);

    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "# checkpoint " + pred.checkpoint_id);
    CHECK(lines[1].find("# L_ref 1.1") == 0);
    CHECK(lines[1].find("V_ref 1.3999999999999999") != std::string::npos);
    CHECK(lines[1].find("rho 1000") != std::string::npos);
    CHECK(lines[1].find("mu 20") != std::string::npos);
    CHECK(lines[2] == "x,y,k,vx,vy,p,extrapolated");
    // row: x,y,k,vx,vy,p,extrapolated with k = 0 for a static checkpoint
    std::istringstream row(lines[3]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    CHECK(std::stod(cells[0]) == 0.25);
    CHECK(std::stod(cells[1]) == -0.5);
    CHECK(std::stod(cells[2]) == 0.0);
    CHECK(std::stod(cells[3]) == pred.v[0]);
    CHECK(std::stod(cells[5]) == pred.p[0]);
    CHECK(cells[6] == "0");
}

TEST_CASE("nearest reference interpolation") {
    Rng rng(77);
    ReferenceCloud ref;
    ref.n_sd = 2;
    const int m = 40;
    for (int j = 0; j < m; ++j) {
        ref.x.push_back(rng.uniform(-1.0, 1.0));
        ref.x.push_back(rng.uniform(-1.0, 1.0));
        ref.v.push_back(rng.uniform(-2.0, 2.0));
        ref.v.push_back(rng.uniform(-2.0, 2.0));
        ref.p.push_back(rng.uniform(-1.0, 1.0));
    }

    SUBCASE("matches an independent scan") {
        std::vector<double> q;
        for (int i = 0; i < 25; ++i) {
            q.push_back(rng.uniform(-1.2, 1.2));
            q.push_back(rng.uniform(-1.2, 1.2));
        }
        InterpolationResult res = nearest_reference_interpolation(ref, q, 2);
        for (int i = 0; i < 25; ++i) {
            double best = 1e300;
            int bj = -1;
            for (int j = 0; j < m; ++j) {
                const double dx = q[2 * i] - ref.x[2 * j];
                const double dy = q[2 * i + 1] - ref.x[2 * j + 1];
                if (dx * dx + dy * dy < best) {
                    best = dx * dx + dy * dy;
                    bj = j;
                }
            }
            CHECK(res.index[i] == bj);
            CHECK(res.v[2 * i] == ref.v[2 * bj]);
            CHECK(res.v[2 * i + 1] == ref.v[2 * bj + 1]);
            CHECK(res.p[i] == ref.p[bj]);
        }
        CHECK(res.max_distance >= res.mean_distance);
    }

    SUBCASE("querying the cloud itself matches exactly") {
        InterpolationResult res = nearest_reference_interpolation(ref, ref.x, 2);
        for (int j = 0; j < m; ++j) CHECK(res.index[j] == j);
        CHECK(res.mean_distance == 0.0);
        CHECK(res.max_distance == 0.0);
    }

    SUBCASE("ties resolve to the first point") {
        ReferenceCloud two;
        two.n_sd = 2;
        two.x = {-1.0, 0.0, 1.0, 0.0};
        two.v = {1.0, 0.0, 2.0, 0.0};
        two.p = {10.0, 20.0};
        std::vector<double> origin = {0.0, 0.0};
        InterpolationResult res = nearest_reference_interpolation(two, origin, 2);
        CHECK(res.index[0] == 0);
        CHECK(res.p[0] == 10.0);
        CHECK(res.max_distance == 1.0);
    }

    SUBCASE("rejects unusable references") {
        ReferenceCloud empty;
        empty.n_sd = 2;
        std::vector<double> q = {0.0, 0.0};
        CHECK_THROWS_AS(nearest_reference_interpolation(empty, q, 2), std::invalid_argument);
        ReferenceCloud unlabeled;
        unlabeled.n_sd = 2;
        unlabeled.x = {0.0, 0.0};
        CHECK_THROWS_AS(nearest_reference_interpolation(unlabeled, q, 2), std::invalid_argument);
        CHECK_THROWS_AS(nearest_reference_interpolation(ref, q, 3), std::invalid_argument);
        std::vector<double> odd = {0.0, 0.0, 1.0};
        CHECK_THROWS_AS(nearest_reference_interpolation(ref, odd, 2), std::invalid_argument);
    }
}

TEST_CASE("error reports locate and scale the worst deviations") {
    ReferenceScales scales = make_scales(1.0, 2.0, 1.0, 0.05); // pressure scale 4
    FieldPrediction pred;
    pred.n_sd = 2;
    pred.x = {0.0, 0.0, 1.0, 0.0, 2.0, 0.0};
    pred.v = {1.0, 0.0, 1.0, 0.0, 1.0, 0.0};
    pred.p = {0.0, 0.0, 0.0};
    std::vector<double> v_ref = {1.0, 0.0, 1.0, -0.3, 0.6, 0.0}; // worst |dv|=0.4 at x=2
    std::vector<double> p_ref = {0.0, -1.0, 0.25};               // worst |dp|=1 at x=1

    ErrorReport rep = make_error_report(pred, v_ref, p_ref, scales);
    CHECK(rep.n_points == 3);
    CHECK(rep.max_dv == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(rep.max_dv_x[0] == 2.0);
    CHECK(rep.max_dp == 1.0);
    CHECK(rep.max_dp_x[0] == 1.0);
    REQUIRE(rep.rms.size() == 3);
    CHECK(rep.rms[0] == doctest::Approx(std::sqrt(0.16 / 3)).epsilon(1e-14)); // dvx = 0.4
    CHECK(rep.rms[1] == doctest::Approx(std::sqrt(0.09 / 3)).epsilon(1e-14)); // dvy = 0.3
    CHECK(rep.rms[2] == doctest::Approx(std::sqrt(1.0625 / 3)).epsilon(1e-14));

    // L_test recomputed from scratch on nondimensional values
    std::vector<double> vp(6), vr(6), pp(3), pr(3);
    for (int i = 0; i < 6; ++i) {
        vp[i] = pred.v[i] / 2.0;
        vr[i] = v_ref[i] / 2.0;
    }
    for (int i = 0; i < 3; ++i) {
        pp[i] = pred.p[i] / 4.0;
        pr[i] = p_ref[i] / 4.0;
    }
    CHECK(rep.L_test == test_loss(vp, pp, vr, pr));

    const std::string text = error_report_text(rep);
    CHECK(text.find("L_test") != std::string::npos);
    CHECK(text.find("max |dv|") != std::string::npos);
    const std::string csv = error_report_csv(rep);
    auto lines = lines_of(csv);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "L_test,n_points,max_dv,max_dp,rms_vx,rms_vy,rms_p,mean_match_distance,max_match_distance");

    CHECK_THROWS_AS(make_error_report(FieldPrediction{}, {}, {}, scales), std::invalid_argument);
    std::vector<double> short_ref(4, 0.0);
    CHECK_THROWS_AS(make_error_report(pred, short_ref, p_ref, scales), std::invalid_argument);
}

TEST_CASE("mass flow ratio") {
    auto outlet = [](std::vector<double> v, std::vector<double> area,
                     std::array<double, 3> normal) {
        OutletFlow o;
        o.v = std::move(v);
        o.area = std::move(area);
        o.normal = normal;
        return o;
    };

    SUBCASE("identical outlets give exactly one") {
        OutletFlow left = outlet({-1.0, 0.0, -0.5, 0.0}, {0.25, 0.5}, {-1.0, 0.0, 0.0});
        OutletFlow right = outlet({1.0, 0.0, 0.5, 0.0}, {0.25, 0.5}, {1.0, 0.0, 0.0});
        CHECK(mass_flow_ratio(left, right, 1000.0, 2) == 1.0);
    }

    SUBCASE("ratio is linear in the left flow and independent of rho") {
        OutletFlow left = outlet({-1.0, 0.0, -0.5, 0.0}, {0.25, 0.5}, {-1.0, 0.0, 0.0});
        OutletFlow right = outlet({1.0, 0.0, 0.5, 0.0}, {0.25, 0.5}, {1.0, 0.0, 0.0});
        for (double& v : left.v) v *= 0.5;
        CHECK(mass_flow_ratio(left, right, 1000.0, 2) == 0.5);
        CHECK(mass_flow_ratio(left, right, 3.0, 2) == 0.5);
    }

    SUBCASE("summation order does not matter for exact inputs") {
        OutletFlow left = outlet({-2.0, 0.0, -0.5, 0.0, -1.0, 0.0}, {0.25, 0.5, 1.0},
                                 {-1.0, 0.0, 0.0});
        OutletFlow perm = outlet({-1.0, 0.0, -2.0, 0.0, -0.5, 0.0}, {1.0, 0.25, 0.5},
                                 {-1.0, 0.0, 0.0});
        OutletFlow right = outlet({1.0, 0.0}, {2.0}, {1.0, 0.0, 0.0});
        CHECK(mass_flow_ratio(left, right, 1.0, 2) == mass_flow_ratio(perm, right, 1.0, 2));
    }

    SUBCASE("3d outlet with an axis normal") {
        OutletFlow left = outlet({0.0, 0.0, 2.0}, {0.5}, {0.0, 0.0, 1.0});
        OutletFlow right = outlet({0.0, 0.0, 1.0}, {2.0}, {0.0, 0.0, 1.0});
        CHECK(mass_flow_ratio(left, right, 1.0, 3) == 0.5);
    }

    SUBCASE("reverse flow on the right is rejected") {
        OutletFlow left = outlet({-1.0, 0.0}, {1.0}, {-1.0, 0.0, 0.0});
        OutletFlow right = outlet({-1.0, 0.0}, {1.0}, {1.0, 0.0, 0.0});
        CHECK_THROWS_AS(mass_flow_ratio(left, right, 1.0, 2), NumericError);
    }

    SUBCASE("bad inputs are rejected") {
        OutletFlow good = outlet({1.0, 0.0}, {1.0}, {1.0, 0.0, 0.0});
        OutletFlow bad_area = outlet({1.0, 0.0}, {0.0}, {1.0, 0.0, 0.0});
        CHECK_THROWS_AS(mass_flow_ratio(bad_area, good, 1.0, 2), std::invalid_argument);
        OutletFlow bad_normal = outlet({1.0, 0.0}, {1.0}, {1.0, 1.0, 0.0});
        CHECK_THROWS_AS(mass_flow_ratio(bad_normal, good, 1.0, 2), std::invalid_argument);
        OutletFlow mismatch = outlet({1.0, 0.0, 1.0}, {1.0}, {1.0, 0.0, 0.0});
        CHECK_THROWS_AS(mass_flow_ratio(mismatch, good, 1.0, 2), std::invalid_argument);
        CHECK_THROWS_AS(mass_flow_ratio(good, good, 1.0, 4), std::invalid_argument);
    }
}
