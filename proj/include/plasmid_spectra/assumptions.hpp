#pragma once

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "flow.hpp"
#include "params.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace plasmid {

enum class A5Verdict { Finite, LikelyDivergent, Inconclusive };

inline const char* to_string(A5Verdict v) {
    switch (v) {
    case A5Verdict::Finite: return "Finite";
    case A5Verdict::LikelyDivergent: return "LikelyDivergent";
    default: return "Inconclusive";
    }
}

struct A5Report {
    double value_flow_form = 0.0;
    double value_cov_form = 0.0;
    double truncation_T = 0.0;
    double truncation_error_bound = 0.0;
    double margin = 0.0;  // lower bound of the exponent on [m, z0]
    A5Verdict verdict = A5Verdict::Inconclusive;
    std::string note;
};

struct A5Options {
    std::size_t nodes = 64;  // Gauss-Legendre nodes per panel
    int levels = 36;         // panels halve this many times toward each end
};

namespace detail {

struct Panels {
    std::vector<std::pair<double, double>> list;
    std::vector<double> z, w;      // all quadrature nodes, ascending
    std::vector<std::size_t> owner; // panel index of each node
};

inline Panels a5_panels(double z0, const std::vector<double>& breaks, const A5Options& opt) {
    Panels P;
    const double h = 0.5 * z0;
    std::vector<double> cuts;
    for (int k = opt.levels; k >= 1; --k) cuts.push_back(h * std::ldexp(1.0, -k));
    cuts.push_back(h);
    for (int k = 1; k <= opt.levels; ++k) cuts.push_back(z0 - h * std::ldexp(1.0, -k));
    for (double b : breaks)
        if (b > cuts.front() && b < cuts.back()) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const GaussRule& rule = gauss_legendre(opt.nodes);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        P.list.emplace_back(a, b);
        for (std::size_t j = 0; j < rule.size(); ++j) {
            P.z.push_back(0.5 * (a + b) + 0.5 * (b - a) * rule.x[j]);
            P.w.push_back(0.5 * (b - a) * rule.w[j]);
            P.owner.push_back(i);
        }
    }
    return P;
}

}  // namespace detail

// Both forms of  int_0^z0 int_z'^z0 exp(-int_z'^z q/b) dz/b(z) dz'  for an
// exponent q with lower bound `margin` on the divisible range. `breaks` lists
// points where q may jump.
inline A5Report a5_evaluate(const FlowMap& flow, const std::function<double(double)>& q, double margin,
                            const std::vector<double>& breaks = {}, A5Options opt = {}) {
    const double z0 = flow.z0();
    const RateFunction& b = flow.b();
    A5Report rep;
    rep.margin = margin;
    const detail::Panels P = detail::a5_panels(z0, breaks, opt);
    const GaussRule& g16 = gauss_legendre(16);
    auto qb = [&](double y) { return q(y) / b(y); };
    const std::size_t np = P.list.size(), nn = P.z.size();

    // P(z) = int_{z_first}^{z} q/b at panel edges and nodes.
    std::vector<double> edgeP(np + 1, 0.0);
    for (std::size_t i = 0; i < np; ++i)
        edgeP[i + 1] = edgeP[i] + integrate_gl(qb, P.list[i].first, P.list[i].second, gauss_legendre(opt.nodes));
    std::vector<double> nodeP(nn), inv_b(nn);
    parallel_for(nn, [&](std::size_t k) {
        const std::size_t p = P.owner[k];
        nodeP[k] = edgeP[p] + integrate_gl(qb, P.list[p].first, P.z[k], g16);
        inv_b[k] = 1.0 / b(P.z[k]);
    });

    // Cov form. Beyond the last panel the exponent is frozen at q(z0).
    const double q0 = q(z0);
    const double tail = q0 > 0.0 ? 1.0 / q0 : std::numeric_limits<double>::infinity();
    std::vector<double> inner(nn);
    parallel_for(nn, [&](std::size_t k) {
        const double zp = P.z[k];
        const std::size_t p = P.owner[k];
        const double hi = P.list[p].second;
        double s = integrate_gl(
            [&](double z) { return std::exp(-integrate_gl(qb, zp, z, g16)) / b(z); }, zp, hi, gauss_legendre(opt.nodes));
        const double base = nodeP[k];
        for (std::size_t j = (p + 1) * opt.nodes; j < nn; ++j) s += P.w[j] * std::exp(base - nodeP[j]) * inv_b[j];
        s += std::exp(base - edgeP[np]) * tail;
        inner[k] = s;
    });
    double cov = 0.0;
    for (std::size_t k = 0; k < nn; ++k) cov += P.w[k] * inner[k];
    rep.value_cov_form = cov;

    // Flow form, truncated in time.
    const double T = margin > 0.0 ? std::log(z0 * 1e10) / margin : 1e3;
    rep.truncation_T = T;
    rep.truncation_error_bound =
        margin > 0.0 ? z0 * std::exp(-margin * T) / margin : std::numeric_limits<double>::infinity();

    using State = std::array<double, 3>;  // Z, int q, int exp(-int q)
    auto solve_time = [&](double zp, const std::vector<double>& stops, std::vector<double>& out) {
        using namespace boost::numeric::odeint;
        State y{zp, 0.0, 0.0};
        auto rhs = [&](const State& s, State& d, double) {
            const double Z = std::clamp(s[0], 0.0, z0);
            d[0] = b(Z);
            d[1] = q(Z);
            d[2] = std::exp(-s[1]);
        };
        double t = 0.0;
        out.clear();
        for (double ts : stops) {
            try {
                integrate_adaptive(make_controlled(1e-12, 1e-10, runge_kutta_dopri5<State>()), rhs, y, t, ts, 1e-3);
            } catch (const std::exception& e) {
                fail(ErrorKind::IntegratorFailure, e.what());
            }
            t = ts;
            out.push_back(y[2]);
        }
    };

    std::vector<double> flow_inner(nn);
    parallel_for(nn, [&](std::size_t k) {
        std::vector<double> out;
        solve_time(P.z[k], {T}, out);
        flow_inner[k] = out[0];
    }, 4);
    double fl = 0.0;
    for (std::size_t k = 0; k < nn; ++k) fl += P.w[k] * flow_inner[k];
    rep.value_flow_form = fl;

    const double value = std::max(std::abs(cov), std::abs(fl));
    const bool agree = std::isfinite(cov) && std::abs(fl - cov) <= 1e-3 * (1.0 + value);
    if (margin > 0.0 && agree && rep.truncation_error_bound <= 1e-6 * std::max(value, 1e-300)) {
        rep.verdict = A5Verdict::Finite;
        rep.note = "certified bound: value <= " + std::to_string(value + rep.truncation_error_bound);
        return rep;
    }

    // Growth test on truncated time integrals over a coarse set of starting points.
    const std::vector<double> stops{125.0, 250.0, 500.0, 1000.0};
    std::vector<double> totals(stops.size(), 0.0);
    const GaussRule& g8 = gauss_legendre(8);
    std::vector<double> out;
    for (auto [a, c] : P.list) {
        for (std::size_t j = 0; j < g8.size(); ++j) {
            const double zp = 0.5 * (a + c) + 0.5 * (c - a) * g8.x[j];
            solve_time(zp, stops, out);
            for (std::size_t s = 0; s < stops.size(); ++s) totals[s] += 0.5 * (c - a) * g8.w[j] * out[s];
        }
    }
    bool growing = true;
    for (std::size_t s = 2; s < stops.size(); ++s)
        growing = growing && (totals[s] - totals[s - 1]) >= (totals[s - 1] - totals[s - 2]) &&
                  totals[s] - totals[s - 1] > 0.0;
    if (growing) {
        rep.verdict = A5Verdict::LikelyDivergent;
        rep.note = "truncated integrals grow without settling: " + std::to_string(totals.back());
    } else {
        rep.verdict = A5Verdict::Inconclusive;
        rep.note = "no decay margin could be certified";
    }
    return rep;
}

inline A5Report check_a5(const ModelParameters& p, const FlowMap& flow, A5Options opt = {}) {
    const double shift = p.mu_lo() - p.mu_hi();
    auto q = [&p, shift](double y) { return shift + p.beta_m(y); };
    return a5_evaluate(flow, q, shift + p.beta_m_lo(), {p.m()}, opt);
}

struct A5Sufficient {
    bool margin_positive = false;
    double margin = 0.0;
    bool growth_condition = false;
    double fitted_a = 0.0;
    double fitted_eps = 0.0;
    bool passed() const { return margin_positive && growth_condition; }
};

// Fits b(z) ~ a z^{1+eps} near 0 by log-log least squares on [1e-6, 1e-3] z0.
inline A5Sufficient check_a5_sufficient(const ModelParameters& p) {
    A5Sufficient r;
    r.margin = p.mu_lo() - p.mu_hi() + p.beta_m_lo();
    r.margin_positive = r.margin > 0.0;
    const int n = 25;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (int i = 0; i < n; ++i) {
        const double z = p.z0() * std::pow(10.0, -6.0 + 3.0 * i / (n - 1));
        const double v = p.b()(z);
        if (!(v > 0.0)) continue;
        const double x = std::log(z), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used >= 2) {
        const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
        r.fitted_eps = slope - 1.0;
        r.fitted_a = std::exp((sy - slope * sx) / used);
        r.growth_condition = r.fitted_eps > 0.01;
    }
    return r;
}

}  // namespace plasmid
