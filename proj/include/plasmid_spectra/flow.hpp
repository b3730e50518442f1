#pragma once

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "error.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace plasmid {

// Characteristics dZ/dt = b(Z) and the weight W(x, z) = int_x^z dy / b(y).
class FlowMap {
public:
    enum class Mode { ClosedFormLogistic, NumericODE };

    FlowMap(RateFunction b, double z0) : FlowMap(b, z0, b.is_logistic() ? Mode::ClosedFormLogistic : Mode::NumericODE) {}

    FlowMap(RateFunction b, double z0, Mode mode) : b_(std::move(b)), z0_(z0), mode_(mode) {
        if (mode_ == Mode::ClosedFormLogistic) {
            if (!b_.is_logistic()) fail(ErrorKind::DomainError, "closed-form flow needs a logistic growth rate");
            b0_ = b_.logistic_data().b0;
            if (std::abs(b_.logistic_data().z0 - z0_) > 1e-12 * z0_)
                fail(ErrorKind::DomainError, "logistic cap differs from z0");
            if (!(b0_ > 0.0)) fail(ErrorKind::DomainError, "logistic rate needs b0 > 0");
        } else {
            build_table();
        }
    }

    Mode mode() const { return mode_; }
    double z0() const { return z0_; }
    const RateFunction& b() const { return b_; }

    double flow(double t, double z) const {
        if (t < 0.0) fail(ErrorKind::DomainError, "flow needs t >= 0");
        if (z < 0.0 || z > z0_) fail(ErrorKind::DomainError, "flow needs z in [0, z0]");
        if (t == 0.0 || z == 0.0 || z == z0_) return z;
        if (mode_ == Mode::ClosedFormLogistic) {
            const double e = std::exp(-b0_ * t);
            return std::clamp(z0_ * z / (z + (z0_ - z) * e), z, z0_);
        }
        using namespace boost::numeric::odeint;
        using State = std::array<double, 1>;
        State y{z};
        auto rhs = [this](const State& s, State& d, double) { d[0] = b_(std::clamp(s[0], 0.0, z0_)); };
        try {
            integrate_adaptive(make_controlled(1e-12, 1e-10, runge_kutta_dopri5<State>()), rhs, y, 0.0, t,
                               std::min(t, 1e-3));
        } catch (const std::exception& e) {
            fail(ErrorKind::IntegratorFailure, e.what());
        }
        if (!std::isfinite(y[0])) fail(ErrorKind::IntegratorFailure, "non-finite flow value");
        return std::clamp(y[0], z, z0_);
    }

    // W(x, z) for 0 < x <= z < z0.
    double weight(double x, double z) const {
        if (!(x > 0.0)) fail(ErrorKind::SingularEndpoint, "weight: lower limit at 0");
        if (!(z < z0_)) fail(ErrorKind::SingularEndpoint, "weight: upper limit at z0");
        if (x > z) fail(ErrorKind::DomainError, "weight needs x <= z");
        if (x == z) return 0.0;
        if (mode_ == Mode::ClosedFormLogistic)
            return (std::log(z / x) + std::log1p((z - x) / (z0_ - z))) / b0_;
        return std::max(0.0, potential(z) - potential(x));
    }

    // exp(-int_x^z c/b) with 0 < x <= z <= z0. The z0 limit is 0 when c(z0) > 0.
    template <class C>
    double exp_weighted(double x, double z, C&& c) const {
        if (!(x > 0.0) || x > z || z > z0_) fail(ErrorKind::DomainError, "exp_weighted needs 0 < x <= z <= z0");
        if (x == z) return 1.0;
        if (z >= z0_) {
            const double cz = c(z0_);
            if (cz > 0.0) return 0.0;
            if (cz < 0.0) return HUGE_VAL;
        }
        const double log_val = -integrate_graded([&](double y) { return c(y) / b_(y); }, x, z, z0_, 20);
        if (log_val < -745.0) return 0.0;
        return std::exp(log_val);
    }

    double exp_weighted_const(double x, double z, double c) const {
        if (x == z) return 1.0;
        if (z >= z0_) return c > 0.0 ? 0.0 : (c == 0.0 ? 1.0 : HUGE_VAL);
        const double lv = -c * weight(x, z);
        return lv < -745.0 ? 0.0 : std::exp(lv);
    }

private:
    // Antiderivative of 1/b anchored at z0/2, tabulated on nodes z0/2 * 2^-k
    // and z0 - z0/2 * 2^-k.
    void build_table() {
        const double h = 0.5 * z0_;
        const GaussRule& rule = gauss_legendre(20);
        auto inv_b = [this](double y) { return 1.0 / b_(y); };
        left_nodes_.assign(1, h);
        left_vals_.assign(1, 0.0);
        right_gaps_.assign(1, h);
        right_vals_.assign(1, 0.0);
        for (int k = 1; k <= kLevels; ++k) {
            const double a = h * std::ldexp(1.0, -k), b = left_nodes_.back();
            left_vals_.push_back(left_vals_.back() - integrate_gl(inv_b, a, b, rule));
            left_nodes_.push_back(a);
            const double sa = right_gaps_.back(), sb = h * std::ldexp(1.0, -k);
            right_vals_.push_back(right_vals_.back() + integrate_gl(inv_b, z0_ - sa, z0_ - sb, rule));
            right_gaps_.push_back(sb);
        }
    }

    double potential(double y) const {
        const GaussRule& rule = gauss_legendre(20);
        auto inv_b = [this](double s) { return 1.0 / b_(s); };
        const double h = 0.5 * z0_;
        if (y <= h) {
            // left_nodes_ decrease: find first node <= y
            std::size_t k = 0;
            while (k + 1 < left_nodes_.size() && left_nodes_[k + 1] > y) ++k;
            if (k + 1 < left_nodes_.size()) {
                // y in [left_nodes_[k+1], left_nodes_[k]]
                return left_vals_[k] - integrate_gl(inv_b, y, left_nodes_[k], rule);
            }
            return left_vals_.back() - integrate_graded(inv_b, y, left_nodes_.back(), z0_, 20);
        }
        const double s = z0_ - y;
        std::size_t k = 0;
        while (k + 1 < right_gaps_.size() && right_gaps_[k + 1] > s) ++k;
        if (k + 1 < right_gaps_.size()) return right_vals_[k] + integrate_gl(inv_b, z0_ - right_gaps_[k], y, rule);
        return right_vals_.back() + integrate_graded(inv_b, z0_ - right_gaps_.back(), y, z0_, 20);
    }

    static constexpr int kLevels = 60;
    RateFunction b_;
    double z0_;
    Mode mode_;
    double b0_ = 0.0;
    std::vector<double> left_nodes_, left_vals_, right_gaps_, right_vals_;
};

}  // namespace plasmid
