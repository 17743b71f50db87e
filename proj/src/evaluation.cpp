#include "pinnflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pinnflow/autodiff.hpp"

namespace pinnflow {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

double test_loss(std::span<const double> v_pred, std::span<const double> p_pred,
                 std::span<const double> v_ref, std::span<const double> p_ref) {
    if (v_pred.size() != v_ref.size() || p_pred.size() != p_ref.size())
        throw std::invalid_argument("test_loss: prediction/reference length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v_pred.size(); ++i) {
        const double d = v_pred[i] - v_ref[i];
        num += d * d;
        den += v_ref[i] * v_ref[i];
    }
    for (std::size_t i = 0; i < p_pred.size(); ++i) {
        const double d = p_pred[i] - p_ref[i];
        num += d * d;
        den += p_ref[i] * p_ref[i];
    }
    if (den == 0.0) throw std::invalid_argument("test_loss: reference norm is zero");
    return std::sqrt(num) / std::sqrt(den);
}

void evaluate_vp(const NetworkParams& params, std::span<const double> inputs,
                 std::vector<double>& v, std::vector<double>& p) {
    const int iw = params.input_width();
    if (inputs.size() % iw != 0)
        throw std::invalid_argument("evaluate_vp: input length is not a multiple of input width");
    const int n = static_cast<int>(inputs.size()) / iw;
    const OutputLayout lay = layout_of(params);
    const int nd = params.n_sd;
    v.assign(static_cast<std::size_t>(n) * nd, 0.0);
    p.assign(n, 0.0);
    if (n == 0) return;
    BatchEval be(params, 1, nd);
    be.forward(inputs);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double vi[3];
        velocity_at(be, i, lay, vi);
        for (int c = 0; c < nd; ++c) v[static_cast<std::size_t>(i) * nd + c] = vi[c];
        p[i] = be.value(i, lay.pressure());
    }
}

FieldPrediction predict_field(const Checkpoint& ckpt, std::span<const double> x_meters,
                              double k_meters, std::optional<std::array<double, 2>> k_range) {
    ckpt.params.validate();
    ckpt.scales.validate();
    const int nd = ckpt.params.n_sd;
    if (x_meters.size() % nd != 0)
        throw std::invalid_argument("predict_field: query length is not a multiple of n_sd");
    const int n = static_cast<int>(x_meters.size()) / nd;
    FieldPrediction pred;
    pred.n_sd = nd;
    pred.parametric = ckpt.params.parametric;
    pred.checkpoint_id = checkpoint_id(ckpt.params);
    pred.x.assign(x_meters.begin(), x_meters.end());
    const bool extrap =
        pred.parametric && k_range && (k_meters < (*k_range)[0] || k_meters > (*k_range)[1]);
    pred.extrapolated.assign(n, extrap ? 1 : 0);
    if (pred.parametric) pred.k.assign(n, k_meters);

    const int iw = ckpt.params.input_width();
    std::vector<double> inputs(static_cast<std::size_t>(n) * iw);
    const double xs = 1.0 / ckpt.scales.L_ref;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < nd; ++c)
            inputs[static_cast<std::size_t>(i) * iw + c] = x_meters[static_cast<std::size_t>(i) * nd + c] * xs;
        if (pred.parametric) inputs[static_cast<std::size_t>(i) * iw + nd] = k_meters * xs;
    }
    evaluate_vp(ckpt.params, inputs, pred.v, pred.p);
    const double vs = ckpt.scales.V_ref;
    const double ps = ckpt.scales.pressure_scale();
    for (double& vi : pred.v) vi *= vs;
    for (double& pi : pred.p) pi *= ps;
    return pred;
}

void write_field_csv(const std::string& path, const FieldPrediction& pred,
                     const ReferenceScales& scales) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write field file '" + path + "'");
    out << "# checkpoint " << pred.checkpoint_id << "\n";
    out << "# L_ref " << g17(scales.L_ref) << " V_ref " << g17(scales.V_ref) << " rho "
        << g17(scales.rho) << " mu " << g17(scales.mu) << "\n";
    const int nd = pred.n_sd;
    out << (nd == 2 ? "x,y" : "x,y,z") << ",k," << (nd == 2 ? "vx,vy" : "vx,vy,vz")
        << ",p,extrapolated\n";
    const int n = pred.n_points();
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < nd; ++c) out << g17(pred.x[static_cast<std::size_t>(i) * nd + c]) << ',';
        out << g17(pred.parametric ? pred.k[i] : 0.0) << ',';
        for (int c = 0; c < nd; ++c) out << g17(pred.v[static_cast<std::size_t>(i) * nd + c]) << ',';
        out << g17(pred.p[i]) << ',' << int(pred.extrapolated.empty() ? 0 : pred.extrapolated[i])
            << "\n";
    }
    if (!out) throw ConfigError("failed writing field file '" + path + "'");
}

InterpolationResult nearest_reference_interpolation(const ReferenceCloud& reference,
                                                    std::span<const double> query_x, int n_sd) {
    if (reference.n_points() == 0)
        throw std::invalid_argument("nearest_reference_interpolation: empty reference");
    if (!reference.has_fields())
        throw std::invalid_argument("nearest_reference_interpolation: reference has no fields");
    if (reference.n_sd != n_sd)
        throw std::invalid_argument("nearest_reference_interpolation: dimension mismatch");
    if (query_x.size() % n_sd != 0)
        throw std::invalid_argument("nearest_reference_interpolation: bad query length");
    const int n = static_cast<int>(query_x.size()) / n_sd;
    const int m = reference.n_points();
    InterpolationResult res;
    res.v.assign(static_cast<std::size_t>(n) * n_sd, 0.0);
    res.p.assign(n, 0.0);
    res.index.assign(n, 0);
    std::vector<double> dist(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* q = query_x.data() + static_cast<std::size_t>(i) * n_sd;
        double best = std::numeric_limits<double>::infinity();
        int bj = 0;
        for (int j = 0; j < m; ++j) {
            const double* r = reference.x.data() + static_cast<std::size_t>(j) * n_sd;
            double d2 = 0.0;
            for (int c = 0; c < n_sd; ++c) {
                const double e = q[c] - r[c];
                d2 += e * e;
            }
            if (d2 < best) {
                best = d2;
                bj = j;
            }
        }
        res.index[i] = bj;
        dist[i] = std::sqrt(best);
        for (int c = 0; c < n_sd; ++c)
            res.v[static_cast<std::size_t>(i) * n_sd + c] =
                reference.v[static_cast<std::size_t>(bj) * n_sd + c];
        res.p[i] = reference.p[bj];
    }
    double sum = 0.0, mx = 0.0;
    for (double d : dist) {
        sum += d;
        mx = std::max(mx, d);
    }
    res.mean_distance = n ? sum / n : 0.0;
    res.max_distance = mx;
    return res;
}

ErrorReport make_error_report(const FieldPrediction& pred, std::span<const double> v_ref,
                              std::span<const double> p_ref, const ReferenceScales& scales) {
    const int nd = pred.n_sd;
    const int n = pred.n_points();
    if (n == 0) throw std::invalid_argument("make_error_report: empty prediction");
    if (v_ref.size() != pred.v.size() || p_ref.size() != pred.p.size())
        throw std::invalid_argument("make_error_report: prediction/reference length mismatch");
    scales.validate();
    ErrorReport rep;
    rep.n_points = n;
    rep.rms.assign(nd + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        double dv2 = 0.0;
        for (int c = 0; c < nd; ++c) {
            const double d = pred.v[static_cast<std::size_t>(i) * nd + c] -
                             v_ref[static_cast<std::size_t>(i) * nd + c];
            dv2 += d * d;
            rep.rms[c] += d * d;
        }
        const double dp = std::abs(pred.p[i] - p_ref[i]);
        rep.rms[nd] += dp * dp;
        if (std::sqrt(dv2) > rep.max_dv) {
            rep.max_dv = std::sqrt(dv2);
            for (int c = 0; c < nd; ++c) rep.max_dv_x[c] = pred.x[static_cast<std::size_t>(i) * nd + c];
        }
        if (dp > rep.max_dp) {
            rep.max_dp = dp;
            for (int c = 0; c < nd; ++c) rep.max_dp_x[c] = pred.x[static_cast<std::size_t>(i) * nd + c];
        }
    }
    for (double& r : rep.rms) r = std::sqrt(r / n);
    // Eq-12 pooled relative L2 on nondimensional values
    std::vector<double> vp(pred.v.size()), pp(pred.p.size()), vr(v_ref.size()), pr(p_ref.size());
    const double vs = 1.0 / scales.V_ref, ps = 1.0 / scales.pressure_scale();
    for (std::size_t i = 0; i < vp.size(); ++i) {
        vp[i] = pred.v[i] * vs;
        vr[i] = v_ref[i] * vs;
    }
    for (std::size_t i = 0; i < pp.size(); ++i) {
        pp[i] = pred.p[i] * ps;
        pr[i] = p_ref[i] * ps;
    }
    rep.L_test = test_loss(vp, pp, vr, pr);
    return rep;
}

std::string error_report_text(const ErrorReport& rep) {
    std::ostringstream out;
    const int nd = static_cast<int>(rep.rms.size()) - 1;
    out << "test points:        " << rep.n_points << "\n";
    out << "L_test (rel L2):    " << g17(rep.L_test) << "\n";
    out << "max |dv| (m/s):     " << g17(rep.max_dv) << " at (";
    for (int c = 0; c < nd; ++c) out << (c ? ", " : "") << g17(rep.max_dv_x[c]);
    out << ")\n";
    out << "max |dp| (Pa):      " << g17(rep.max_dp) << " at (";
    for (int c = 0; c < nd; ++c) out << (c ? ", " : "") << g17(rep.max_dp_x[c]);
    out << ")\n";
    for (int c = 0; c < nd; ++c)
        out << "rms dv" << "xyz"[c] << " (m/s):      " << g17(rep.rms[c]) << "\n";
    out << "rms dp (Pa):        " << g17(rep.rms[nd]) << "\n";
    out << "match distance (m): mean " << g17(rep.mean_match_distance) << ", max "
        << g17(rep.max_match_distance) << "\n";
    return out.str();
}

std::string error_report_csv(const ErrorReport& rep) {
    const int nd = static_cast<int>(rep.rms.size()) - 1;
    std::ostringstream h, r;
    h << "L_test,n_points,max_dv,max_dp";
    r << g17(rep.L_test) << ',' << rep.n_points << ',' << g17(rep.max_dv) << ',' << g17(rep.max_dp);
    for (int c = 0; c < nd; ++c) {
        h << ",rms_v" << "xyz"[c];
        r << ',' << g17(rep.rms[c]);
    }
    h << ",rms_p,mean_match_distance,max_match_distance";
    r << ',' << g17(rep.rms[nd]) << ',' << g17(rep.mean_match_distance) << ','
      << g17(rep.max_match_distance);
    return h.str() + "\n" + r.str() + "\n";
}

double mass_flow_ratio(const OutletFlow& left, const OutletFlow& right, double rho, int n_sd) {
    if (n_sd != 2 && n_sd != 3) throw std::invalid_argument("mass_flow_ratio: n_sd must be 2 or 3");
    auto mdot = [&](const OutletFlow& o, const char* side) {
        const int n = static_cast<int>(o.area.size());
        if (static_cast<int>(o.v.size()) != n * n_sd)
            throw std::invalid_argument(std::string("mass_flow_ratio: ") + side +
                                        " velocity/area length mismatch");
        double nn = 0.0;
        for (int c = 0; c < n_sd; ++c) nn += o.normal[c] * o.normal[c];
        if (std::abs(std::sqrt(nn) - 1.0) > 1e-9)
            throw std::invalid_argument(std::string("mass_flow_ratio: ") + side +
                                        " normal is not unit length");
        double flow = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!(o.area[i] > 0.0))
                throw std::invalid_argument(std::string("mass_flow_ratio: ") + side +
                                            " area weight " + std::to_string(i) +
                                            " is not positive");
            double vn = 0.0;
            for (int c = 0; c < n_sd; ++c)
                vn += o.v[static_cast<std::size_t>(i) * n_sd + c] * o.normal[c];
            flow += o.area[i] * vn;
        }
        return rho * flow;
    };
    const double ml = mdot(left, "left");
    const double mr = mdot(right, "right");
    if (!(mr > 0.0))
        throw NumericError("right outlet mass flow is " + std::to_string(mr) +
                           " kg/s (reverse flow dominates); ratio undefined");
    return ml / mr;
}

} // namespace pinnflow
