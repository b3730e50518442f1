#pragma once

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace plasmid {

// Marching Banach iteration for the boundary-layer factor g of the
// eigenprofile in the constant-rate, logistic-growth regime:
//   g' + (alpha/z) g = alpha z0 / (z0 - z)^alpha * int_z^z0 Phi(z/y) y^-2 (z0 - y)^(alpha-1) g(y) dy,
//   g(z0) = 1,
// with v = (z0 - z)^alpha g and U = v / b.
struct FixedPointConfig {
    double alpha = 0.0;  // <= 0: take 2 beta / b0
    double inner_tol = 1e-6;
    std::size_t inner_max_iter = 100;
    std::size_t outer_max_steps = 1000;
    double normalization_lower = 0.005;
    std::size_t min_samples = 16;
    double sample_spacing = 0.05;  // relative to z0
    double guard = 1e-5;
    double stall_fraction = 1e-4;  // delta below this share of a - m counts as a stall
    std::size_t residual_points = 100;
};

// Sup-norm bound of the local Volterra operator on [a - delta, a].
inline double contraction_bound(double a, double delta, double alpha, double phi_sup, double z0) {
    const double u = std::log(a / (a - delta));  // log r
    const double r = std::exp(u);
    double c;
    if (std::abs(alpha - 1.0) < 1e-12)
        c = r * u;
    else
        c = r * std::abs(std::expm1((alpha - 1.0) * u)) / std::abs(alpha - 1.0);
    return z0 * phi_sup * c / a;
}

struct DeltaChoice {
    double a = 0.0;
    double delta = 0.0;
    double root = 0.0;   // delta where the bound equals 1
    double bound = 0.0;  // bound at the returned delta
    bool shrunk = false;
    bool landed_on_m = false;
    bool stalled = false;
};

namespace detail {

// delta with contraction_bound(a, delta) == target, via r = e^u.
inline double delta_for_bound(double a, double alpha, double phi_sup, double z0, double target) {
    auto f = [&](double u) { return contraction_bound(a, a * -std::expm1(-u), alpha, phi_sup, z0) - target; };
    double hi = 1e-3;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 700.0) fail(ErrorKind::StepUnderflow, "contraction bound never reaches the target");
    }
    std::uintmax_t it = 200;
    auto [l, h] = boost::math::tools::toms748_solve(f, 0.0, hi, -target, f(hi), boost::math::tools::eps_tolerance<double>(52), it);
    return a * -std::expm1(-0.5 * (l + h));
}

}  // namespace detail

inline DeltaChoice delta_step(double a, double alpha, double phi_sup, double z0, double m, double guard = 1e-5,
                              double stall_fraction = 0.0) {
    if (!(a > m) || a > z0) fail(ErrorKind::DomainError, "delta_step needs a in (m, z0]");
    if (!(alpha > 0.0) || !(phi_sup > 0.0)) fail(ErrorKind::DomainError, "delta_step needs alpha > 0 and |Phi| > 0");
    DeltaChoice d;
    d.a = a;
    d.root = detail::delta_for_bound(a, alpha, phi_sup, z0, 1.0);
    d.delta = d.root + guard;
    if (!(d.delta < a) || contraction_bound(a, d.delta, alpha, phi_sup, z0) > 1.0 - guard) {
        d.delta = detail::delta_for_bound(a, alpha, phi_sup, z0, 1.0 - guard);
        d.shrunk = true;
    }
    if (d.delta < 1e-12) fail(ErrorKind::StepUnderflow, "step " + std::to_string(d.delta) + " at a=" + std::to_string(a));
    if (stall_fraction > 0.0 && d.delta < stall_fraction * (a - m)) {
        d.delta = 0.5 * (a - m);
        d.stalled = true;
    }
    if (a - d.delta <= m) {
        d.delta = a - m;
        d.landed_on_m = true;
    }
    d.bound = contraction_bound(a, d.delta, alpha, phi_sup, z0);
    return d;
}

struct IntervalRecord {
    double lo = 0.0, hi = 0.0;
    std::vector<double> x, g;
    std::size_t iterations = 0;
    double last_difference = 0.0;
    bool converged = false;
    double max_ratio = 0.0;     // largest ratio of successive sup-differences
    double matrix_norm = 0.0;   // row-sum norm of the linear part of the update
    DeltaChoice delta;
};

struct PiecewiseSolution {
    double alpha = 0.0, z0 = 1.0, b0 = 1.0;
    std::vector<IntervalRecord> intervals;  // from z0 downwards
    double norm_constant = 1.0;             // integral of the raw U over [lower, z0]
    double lower = 0.0;

    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (auto it = intervals.rbegin(); it != intervals.rend(); ++it) b.push_back(it->lo);
        if (!intervals.empty()) b.push_back(intervals.front().hi);
        return b;
    }

    double bottom() const { return intervals.empty() ? z0 : intervals.back().lo; }

    double g(double z) const;
    double v(double z) const { return std::pow(z0 - z, alpha) * g(z); }
    // Normalized eigenprofile; zero below the computed range.
    double U(double z) const {
        if (z < bottom() || z >= z0) return 0.0;
        return z0 / b0 * std::pow(z0 - z, alpha - 1.0) * g(z) / z / norm_constant;
    }
    // Holds its own copy, so it may outlive this object.
    Profile profile() const {
        auto self = std::make_shared<const PiecewiseSolution>(*this);
        return Profile::function([self](double z) { return self->U(z); });
    }
};

namespace detail {

struct Cubic {
    std::array<std::size_t, 4> idx{};
    std::array<double, 4> w{};
};

// Lagrange weights on four neighbouring equidistant samples.
inline Cubic cubic_weights(double x0, double h, std::size_t n, double z) {
    Cubic c;
    const double t = (z - x0) / h;
    const double jf = std::floor(t);
    std::size_t j = jf < 0.0 ? 0 : std::min(static_cast<std::size_t>(jf), n - 2);
    std::size_t s = j == 0 ? 0 : std::min(j - 1, n - 4);
    const double u = t - static_cast<double>(s);
    for (std::size_t k = 0; k < 4; ++k) {
        double w = 1.0;
        for (std::size_t l = 0; l < 4; ++l)
            if (l != k) w *= (u - static_cast<double>(l)) / (static_cast<double>(k) - static_cast<double>(l));
        c.idx[k] = s + k;
        c.w[k] = w;
    }
    return c;
}

inline double interp(const std::vector<double>& x, const std::vector<double>& g, double z) {
    const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    const Cubic c = cubic_weights(x.front(), h, x.size(), z);
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += c.w[k] * g[c.idx[k]];
    return s;
}

}  // namespace detail

inline double PiecewiseSolution::g(double z) const {
    if (intervals.empty()) fail(ErrorKind::DomainError, "empty solution");
    if (z >= z0) return intervals.front().g.back();
    // intervals are ordered by decreasing lo
    auto it = std::lower_bound(intervals.begin(), intervals.end(), z,
                               [](const IntervalRecord& r, double v) { return r.lo > v; });
    if (it == intervals.end()) it = std::prev(intervals.end());
    return detail::interp(it->x, it->g, z);
}

struct FixedPointResidual {
    double max_relative_v = 0.0;  // max |residual of the v equation| / |alpha z0 v / (z (z0 - z))|
    double max_abs_g = 0.0;
    double max_jump = 0.0;        // g mismatch across breakpoints
    std::size_t points = 0;
};

struct FixedPointResult {
    double lambda = 0.0;
    double alpha = 0.0;
    PiecewiseSolution solution;
    bool reached_m = false;
    bool stalled = false;
    std::size_t steps = 0;
    std::size_t unconverged_intervals = 0;
    std::size_t shrunk_steps = 0;
    FixedPointResidual residual;

    Profile profile() const { return solution.profile(); }
};

class FixedPointSolver {
public:
    FixedPointSolver(const ModelParameters& p, FixedPointConfig cfg = {}) : p_(p), cfg_(cfg), phi_(p.kernel().phi()) {
        if (!p.beta().is_constant() || !p.mu().is_constant())
            fail(ErrorKind::RegimeError, "the fixed-point construction needs constant beta and mu");
        if (!p.b().is_logistic()) fail(ErrorKind::RegimeError, "the fixed-point construction needs logistic growth");
        z0_ = p.z0();
        b0_ = p.b().logistic_data().b0;
        beta_ = p.beta().constant_value();
        mu_ = p.mu().constant_value();
        alpha_ = cfg.alpha > 0.0 ? cfg.alpha : 2.0 * beta_ / b0_;
        jacobi_ = gauss_jacobi(8, alpha_ - 1.0, 0.0);
    }

    double alpha() const { return alpha_; }

    // Quadrature for int_p^q (z0 - y)^(alpha-1) f(y) dy.
    void weighted_nodes(double p, double q, std::vector<double>& y, std::vector<double>& w) const {
        y.clear();
        w.clear();
        if (q >= z0_) {
            const double half = 0.5 * (z0_ - p), mid = 0.5 * (z0_ + p);
            const double scale = std::pow(half, alpha_);
            for (std::size_t k = 0; k < jacobi_.x.size(); ++k) {
                y.push_back(mid + half * jacobi_.x[k]);
                w.push_back(scale * jacobi_.w[k]);
            }
            return;
        }
        const GaussRule& gl = gauss_legendre(8);
        const double slo = std::pow(z0_ - q, alpha_), shi = std::pow(z0_ - p, alpha_);
        const double hs = 0.5 * (shi - slo), ms = 0.5 * (shi + slo);
        for (std::size_t k = 0; k < gl.x.size(); ++k) {
            const double s = ms + hs * gl.x[k];
            y.push_back(z0_ - std::pow(s, 1.0 / alpha_));
            w.push_back(gl.w[k] * hs / alpha_);
        }
    }

    std::size_t sample_count(double delta) const {
        return std::max(cfg_.min_samples,
                        static_cast<std::size_t>(std::ceil(8.0 * delta / (cfg_.sample_spacing * z0_))));
    }

    double tail_at(double z) const {
        double s = 0.0;
        for (std::size_t k = 0; k < charge_y_.size(); ++k) {
            const double y = charge_y_[k];
            s += charge_w_[k] * phi_.eval(z / y, (y - z) / y);
        }
        return s;
    }

    // One interval [a - delta, a]; g(a) is taken from the previous interval.
    IntervalRecord iterate_interval(double a, const DeltaChoice& d, double ga) const {
        IntervalRecord rec;
        rec.delta = d;
        rec.hi = a;
        rec.lo = a - d.delta;
        const std::size_t n = sample_count(d.delta);
        const double h = d.delta / static_cast<double>(n - 1);
        rec.x.resize(n);
        for (std::size_t i = 0; i < n; ++i) rec.x[i] = rec.lo + h * static_cast<double>(i);
        rec.x.back() = a;

        std::vector<double> tail(n, 0.0);
        if (!charge_y_.empty()) parallel_for(n, [&](std::size_t i) { tail[i] = tail_at(rec.x[i]); }, 4);

        // Linear update g_new = c + B g, assembled subinterval by subinterval from the top.
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::VectorXd c(static_cast<Eigen::Index>(n));
        Eigen::RowVectorXd cum = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
        double cum_tail = 0.0;
        const GaussRule& gl = gauss_legendre(8);
        std::vector<double> y, w;
        const double az0 = alpha_ * z0_;
        for (std::size_t jj = n - 1; jj-- > 0;) {
            const double p = rec.x[jj], q = rec.x[jj + 1];
            for (std::size_t k = 0; k < gl.x.size(); ++k) {
                const double z = 0.5 * (p + q) + 0.5 * (q - p) * gl.x[k];
                const double om = 0.5 * (q - p) * gl.w[k] * std::pow(z / (z0_ - z), alpha_);
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
                for (std::size_t piece = jj; piece + 1 < n; ++piece) {
                    const double lo = piece == jj ? z : rec.x[piece];
                    weighted_nodes(lo, rec.x[piece + 1], y, w);
                    for (std::size_t t = 0; t < y.size(); ++t) {
                        const double coef = w[t] * phi_.eval(z / y[t], (y[t] - z) / y[t]) / (y[t] * y[t]);
                        const auto cw = detail::cubic_weights(rec.lo, h, n, y[t]);
                        for (std::size_t l = 0; l < 4; ++l) row(static_cast<Eigen::Index>(cw.idx[l])) += coef * cw.w[l];
                    }
                }
                cum += om * row;
                if (!charge_y_.empty()) cum_tail += om * detail::interp(rec.x, tail, z);
            }
            const double f = az0 / std::pow(p, alpha_);
            B.row(static_cast<Eigen::Index>(jj)) = -f * cum;
            c(static_cast<Eigen::Index>(jj)) = std::pow(a / p, alpha_) * ga - f * cum_tail;
        }
        c(static_cast<Eigen::Index>(n - 1)) = ga;
        rec.matrix_norm = B.cwiseAbs().rowwise().sum().maxCoeff();

        Eigen::VectorXd g = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), ga);
        double prev = std::numeric_limits<double>::infinity();
        std::size_t rising = 0;
        for (std::size_t it = 1; it <= cfg_.inner_max_iter; ++it) {
            Eigen::VectorXd gn = c + B * g;
            const double diff = (gn - g).cwiseAbs().maxCoeff();
            if (!std::isfinite(diff)) fail(ErrorKind::NoContraction, "non-finite iterate at a=" + std::to_string(a));
            if (std::isfinite(prev) && prev > 0.0) rec.max_ratio = std::max(rec.max_ratio, diff / prev);
            rising = std::isfinite(prev) && diff >= prev ? rising + 1 : 0;
            g = gn;
            rec.iterations = it;
            rec.last_difference = diff;
            if (diff < cfg_.inner_tol) {
                rec.converged = true;
                break;
            }
            if (rising >= 5)
                fail(ErrorKind::NoContraction, "differences grew five times in a row at a=" + std::to_string(a));
            prev = diff;
        }
        rec.g.assign(g.data(), g.data() + g.size());
        return rec;
    }

    void add_charges(const IntervalRecord& rec) {
        std::vector<double> y, w;
        for (std::size_t j = 0; j + 1 < rec.x.size(); ++j) {
            weighted_nodes(rec.x[j], rec.x[j + 1], y, w);
            for (std::size_t t = 0; t < y.size(); ++t) {
                charge_y_.push_back(y[t]);
                charge_w_.push_back(w[t] * detail::interp(rec.x, rec.g, y[t]) / (y[t] * y[t]));
            }
        }
    }

    FixedPointResult solve() {
        FixedPointResult res;
        res.alpha = alpha_;
        res.lambda = beta_ - mu_;
        auto& sol = res.solution;
        sol.alpha = alpha_;
        sol.z0 = z0_;
        sol.b0 = b0_;
        charge_y_.clear();
        charge_w_.clear();
        const double m = p_.m(), phi_sup = phi_.sup_norm();
        double a = z0_, ga = 1.0;
        while (res.steps < cfg_.outer_max_steps) {
            const DeltaChoice d = delta_step(a, alpha_, phi_sup, z0_, m, cfg_.guard, cfg_.stall_fraction);
            IntervalRecord rec = iterate_interval(a, d, ga);
            ++res.steps;
            if (!rec.converged) ++res.unconverged_intervals;
            if (d.shrunk) ++res.shrunk_steps;
            res.stalled = res.stalled || d.stalled;
            add_charges(rec);
            a = rec.lo;
            ga = rec.g.front();
            sol.intervals.push_back(std::move(rec));
            if (d.landed_on_m) {
                res.reached_m = true;
                break;
            }
        }
        sol.lower = std::max(cfg_.normalization_lower, sol.bottom());
        sol.norm_constant = 1.0;
        sol.norm_constant = raw_integral(sol, sol.lower);
        if (!(sol.norm_constant > 0.0)) fail(ErrorKind::NotConverged, "profile integrates to zero");
        res.residual = residual(sol);
        return res;
    }

    // Integral of (z0/b0) (z0-z)^(alpha-1) g / z over [lower, z0].
    double raw_integral(const PiecewiseSolution& sol, double lower) const {
        std::vector<double> y, w;
        double s = 0.0;
        for (const auto& rec : sol.intervals) {
            for (std::size_t j = 0; j + 1 < rec.x.size(); ++j) {
                const double p = std::max(rec.x[j], lower), q = rec.x[j + 1];
                if (q <= p) continue;
                weighted_nodes(p, q, y, w);
                for (std::size_t t = 0; t < y.size(); ++t) s += w[t] * detail::interp(rec.x, rec.g, y[t]) / y[t];
            }
        }
        return s * z0_ / b0_;
    }

    // Residual of the v-equation at subinterval midpoints, with the integral
    // recomputed by a 12-point rule in s = (z0 - y)^alpha between samples.
    FixedPointResidual residual(const PiecewiseSolution& sol) const {
        FixedPointResidual r;
        std::vector<double> pts;
        for (const auto& rec : sol.intervals) {
            const std::size_t j = rec.x.size() / 2;
            const double z = 0.5 * (rec.x[j - 1] + rec.x[j]);
            if (z < z0_ - 0.01 * z0_) pts.push_back(z);
        }
        if (pts.size() > cfg_.residual_points) {
            std::vector<double> thin;
            const double stride = static_cast<double>(pts.size()) / static_cast<double>(cfg_.residual_points);
            for (std::size_t i = 0; i < cfg_.residual_points; ++i)
                thin.push_back(pts[static_cast<std::size_t>(static_cast<double>(i) * stride)]);
            pts.swap(thin);
        }
        std::vector<double> rel(pts.size()), absg(pts.size());
        const GaussRule& check_rule = gauss_legendre(12);
        parallel_for(pts.size(), [&](std::size_t i) {
            const double x = pts[i];
            auto it = std::lower_bound(sol.intervals.begin(), sol.intervals.end(), x,
                                       [](const IntervalRecord& rc, double v) { return rc.lo > v; });
            const auto& rec = *it;
            const double h = (rec.x.back() - rec.x.front()) / static_cast<double>(rec.x.size() - 1);
            const double e = 0.25 * h;
            const double dg = (detail::interp(rec.x, rec.g, x + e) - detail::interp(rec.x, rec.g, x - e)) / (2.0 * e);
            const double gx = sol.g(x);
            const double smax = std::pow(z0_ - x, alpha_);
            auto f = [&](double s) {
                const double y = z0_ - std::pow(s, 1.0 / alpha_);
                if (y <= x) return 0.0;
                return phi_.eval(x / y, (y - x) / y) * sol.g(y) / (y * y);
            };
            // cut at every sample so each piece of the interpolant is smooth
            std::vector<double> cuts{0.0};
            for (const auto& rc : sol.intervals) {
                if (rc.hi <= x) break;
                for (double xs : rc.x)
                    if (xs > x && xs < z0_) cuts.push_back(std::pow(z0_ - xs, alpha_));
            }
            cuts.push_back(smax);
            std::sort(cuts.begin(), cuts.end());
            double S = 0.0;
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k) S += integrate_gl(f, cuts[k], cuts[k + 1], check_rule);
            S /= alpha_;
            const double rg = dg + alpha_ * gx / x - alpha_ * z0_ * S / smax;
            const double rv = smax * rg;
            const double scale = alpha_ * z0_ * smax * gx / (x * (z0_ - x));
            rel[i] = std::abs(rv) / std::abs(scale);
            absg[i] = std::abs(rg);
        }, 1);
        r.points = pts.size();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r.max_relative_v = std::max(r.max_relative_v, rel[i]);
            r.max_abs_g = std::max(r.max_abs_g, absg[i]);
        }
        for (std::size_t k = 0; k + 1 < sol.intervals.size(); ++k) {
            const auto& up = sol.intervals[k];
            const auto& dn = sol.intervals[k + 1];
            r.max_jump = std::max(r.max_jump, std::abs(detail::interp(up.x, up.g, up.lo) - detail::interp(dn.x, dn.g, up.lo)));
        }
        return r;
    }

private:
    ModelParameters p_;
    FixedPointConfig cfg_;
    Phi phi_;
    double z0_ = 1.0, b0_ = 1.0, beta_ = 0.0, mu_ = 0.0, alpha_ = 1.0;
    GaussRule jacobi_;
    std::vector<double> charge_y_, charge_w_;
};

inline FixedPointResult solve_fixedpoint(const ModelParameters& p, const FixedPointConfig& cfg = {}) {
    FixedPointSolver s(p, cfg);
    return s.solve();
}

}  // namespace plasmid
