#include "pinnflow/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pinnflow {

void adam_step(AdamState& state, std::span<const double> grad, std::span<double> params) {
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_step: length mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericError("non-finite gradient at parameter index " + std::to_string(i));
    const AdamConfig& c = state.cfg;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

const char* line_search_status_name(LineSearchStatus s) {
    switch (s) {
        case LineSearchStatus::Success: return "success";
        case LineSearchStatus::NotDescent: return "not-descent";
        case LineSearchStatus::ExhaustedEvals: return "exhausted-evals";
        case LineSearchStatus::StepUnderflow: return "step-underflow";
    }
    return "?";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

LineSearchResult wolfe_line_search(const LossGradFn& fg, std::span<const double> x0, double f0,
                                   std::span<const double> g0, std::span<const double> dir,
                                   const WolfeConfig& cfg, std::vector<double>& x_out,
                                   std::vector<double>& g_out) {
    LineSearchResult res;
    const double d0 = dot(g0, dir);
    if (!(d0 < 0.0)) {
        res.status = LineSearchStatus::NotDescent;
        return res;
    }
    const std::size_t n = x0.size();
    x_out.assign(n, 0.0);
    g_out.assign(n, 0.0);
    // phi(a) = f(x0 + a dir); evaluates loss+gradient and phi'(a)
    auto phi = [&](double a, double& slope) {
        for (std::size_t i = 0; i < n; ++i) x_out[i] = x0[i] + a * dir[i];
        const double f = fg(x_out, g_out);
        slope = dot(g_out, dir);
        ++res.evals;
        return f;
    };
    auto accept = [&](double a, double f) {
        res.status = LineSearchStatus::Success;
        res.alpha = a;
        res.f = f;
    };
    const double min_alpha = 1e-20;

    // zoom on a bracket [lo, hi] with phi(lo) the lowest value seen
    auto zoom = [&](double alo, double flo, double slo, double ahi, double fhi) {
        for (; res.evals < cfg.max_evals;) {
            // quadratic interpolation from (flo, slo, fhi), bisection safeguard
            double a = alo - 0.5 * slo * (ahi - alo) * (ahi - alo) /
                                 (fhi - flo - slo * (ahi - alo));
            const double lob = std::min(alo, ahi), hib = std::max(alo, ahi);
            const double margin = 0.1 * (hib - lob);
            if (!std::isfinite(a) || a < lob + margin || a > hib - margin)
                a = 0.5 * (alo + ahi);
            if (std::abs(ahi - alo) < 1e-16 * std::max(1.0, std::abs(a)) || a < min_alpha) {
                res.status = LineSearchStatus::StepUnderflow;
                return;
            }
            double s = 0.0;
            const double f = phi(a, s);
            if (f > f0 + cfg.c1 * a * d0 || f >= flo) {
                ahi = a;
                fhi = f;
            } else {
                if (std::abs(s) <= -cfg.c2 * d0) {
                    accept(a, f);
                    return;
                }
                if (s * (ahi - alo) >= 0.0) {
                    ahi = alo;
                    fhi = flo;
                }
                alo = a;
                flo = f;
                slo = s;
            }
        }
        res.status = LineSearchStatus::ExhaustedEvals;
    };

    double aprev = 0.0, fprev = f0, sprev = d0;
    double a = cfg.alpha0;
    while (res.evals < cfg.max_evals) {
        double s = 0.0;
        const double f = phi(a, s);
        if (f > f0 + cfg.c1 * a * d0 || (res.evals > 1 && f >= fprev)) {
            zoom(aprev, fprev, sprev, a, f);
            return res;
        }
        if (std::abs(s) <= -cfg.c2 * d0) {
            accept(a, f);
            return res;
        }
        if (s >= 0.0) {
            zoom(a, f, s, aprev, fprev);
            return res;
        }
        aprev = a;
        fprev = f;
        sprev = s;
        a *= 2.0;
        if (!std::isfinite(a) || a > 1e12) {
            res.status = LineSearchStatus::ExhaustedEvals;
            return res;
        }
    }
    res.status = LineSearchStatus::ExhaustedEvals;
    return res;
}

LbfgsState::LbfgsState(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("history capacity must be >= 1");
}

void LbfgsState::clear() {
    s_.clear();
    y_.clear();
    rho_.clear();
}

bool LbfgsState::push(std::span<const double> s, std::span<const double> y) {
    if (s.size() != y.size()) throw std::invalid_argument("curvature pair length mismatch");
    const double ys = dot(y, s);
    const double sn = std::sqrt(dot(s, s)), yn = std::sqrt(dot(y, y));
    if (!(ys > 1e-10 * sn * yn)) return false;
    s_.emplace_back(s.begin(), s.end());
    y_.emplace_back(y.begin(), y.end());
    rho_.push_back(1.0 / ys);
    if (static_cast<int>(rho_.size()) > capacity_) {
        s_.erase(s_.begin());
        y_.erase(y_.begin());
        rho_.erase(rho_.begin());
    }
    return true;
}

void LbfgsState::direction(std::span<const double> grad, std::vector<double>& dir) const {
    const std::size_t n = grad.size();
    dir.assign(grad.begin(), grad.end());
    const int h = size();
    if (h == 0) {
        for (std::size_t i = 0; i < n; ++i) dir[i] = -dir[i];
        return;
    }
    std::vector<double> alpha(h, 0.0);
    for (int j = h - 1; j >= 0; --j) {
        alpha[j] = rho_[j] * dot(s_[j], dir);
        for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[j] * y_[j][i];
    }
    const double gamma = dot(s_[h - 1], y_[h - 1]) / dot(y_[h - 1], y_[h - 1]);
    for (std::size_t i = 0; i < n; ++i) dir[i] *= gamma;
    for (int j = 0; j < h; ++j) {
        const double beta = rho_[j] * dot(y_[j], dir);
        for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[j] - beta) * s_[j][i];
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] = -dir[i];
}

} // namespace pinnflow
