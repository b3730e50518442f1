#pragma once

#include <math.h>  // pchip.hpp calls isnan unqualified

#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "error.hpp"
#include "quadrature.hpp"

namespace plasmid {

namespace detail {

// Two-column table with monotone cubic interpolation (linear below four
// points) and constant extension outside the table range.
class Table {
public:
    Table() = default;
    Table(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() != y_.size() || x_.size() < 2) fail(ErrorKind::DomainError, "table needs >= 2 (x, y) pairs");
        for (std::size_t i = 0; i + 1 < x_.size(); ++i)
            if (!(x_[i + 1] > x_[i])) fail(ErrorKind::DomainError, "table abscissas must be strictly increasing");
        for (double v : y_)
            if (!std::isfinite(v)) fail(ErrorKind::NonFiniteEvaluation, "table contains a non-finite value");
        if (x_.size() >= 4) {
            auto xs = x_;
            auto ys = y_;
            pchip_ = std::make_shared<const boost::math::interpolators::pchip<std::vector<double>>>(std::move(xs),
                                                                                                  std::move(ys));
        }
    }
    double operator()(double t) const {
        if (t <= x_.front()) return y_.front();
        if (t >= x_.back()) return y_.back();
        if (pchip_) return (*pchip_)(t);
        auto it = std::upper_bound(x_.begin(), x_.end(), t);
        std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double s = (t - x_[k]) / (x_[k + 1] - x_[k]);
        return (1.0 - s) * y_[k] + s * y_[k + 1];
    }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }

private:
    std::vector<double> x_, y_;
    std::shared_ptr<const boost::math::interpolators::pchip<std::vector<double>>> pchip_;
};

inline double ipow(double x, int n) {
    double r = 1.0;
    while (n > 0) {
        if (n & 1) r *= x;
        x *= x;
        n >>= 1;
    }
    return r;
}

}  // namespace detail

class RateFunction {
public:
    struct Constant {
        double value;
    };
    // b(z) = (b0/z0) z (z0 - z)
    struct Logistic {
        double b0, z0;
    };
    // c0 + c1 z + c2 z^2 + ...
    struct Polynomial {
        std::vector<double> coeffs;
    };
    struct Tabulated {
        detail::Table table;
    };

    RateFunction() : data_(Constant{0.0}) {}

    static RateFunction constant(double v) { return RateFunction(Constant{v}); }
    static RateFunction logistic(double b0, double z0) {
        if (!(z0 > 0.0)) fail(ErrorKind::DomainError, "logistic rate needs z0 > 0");
        return RateFunction(Logistic{b0, z0});
    }
    static RateFunction polynomial(std::vector<double> c) {
        if (c.empty()) c.push_back(0.0);
        return RateFunction(Polynomial{std::move(c)});
    }
    static RateFunction tabulated(std::vector<double> z, std::vector<double> v) {
        return RateFunction(Tabulated{detail::Table(std::move(z), std::move(v))});
    }

    double operator()(double z) const {
        return std::visit(
            [z](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    return d.value;
                } else if constexpr (std::is_same_v<T, Logistic>) {
                    return d.b0 / d.z0 * z * (d.z0 - z);
                } else if constexpr (std::is_same_v<T, Polynomial>) {
                    double s = 0.0;
                    for (auto it = d.coeffs.rbegin(); it != d.coeffs.rend(); ++it) s = s * z + *it;
                    return s;
                } else {
                    return d.table(z);
                }
            },
            data_);
    }

    bool is_constant() const { return std::holds_alternative<Constant>(data_); }
    bool is_logistic() const { return std::holds_alternative<Logistic>(data_); }
    double constant_value() const { return std::get<Constant>(data_).value; }
    const Logistic& logistic_data() const { return std::get<Logistic>(data_); }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        std::visit(
            [&os](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    os << "constant(" << d.value << ")";
                } else if constexpr (std::is_same_v<T, Logistic>) {
                    os << "logistic(b0=" << d.b0 << ",z0=" << d.z0 << ")";
                } else if constexpr (std::is_same_v<T, Polynomial>) {
                    os << "polynomial(";
                    for (std::size_t i = 0; i < d.coeffs.size(); ++i) os << (i ? "," : "") << d.coeffs[i];
                    os << ")";
                } else {
                    os << "tabulated(" << d.table.x().size() << " points)";
                }
            },
            data_);
        return os.str();
    }

private:
    template <class T>
    explicit RateFunction(T d) : data_(std::move(d)) {}
    std::variant<Constant, Logistic, Polynomial, Tabulated> data_;
};

// Density on [0, 1] defining a scalable kernel k(z, z') = (2/z') Phi(z/z').
class Phi {
public:
    struct Uniform {};
    struct SymmetricBeta {
        double a;
    };
    // Two biweight bumps of half-width w centred at p and 1 - p.
    struct Bimodal {
        double p, w;
    };
    struct Tabulated {
        detail::Table table;
    };

    Phi() : Phi(Uniform{}) {}

    static Phi uniform() { return Phi(Uniform{}); }
    static Phi symmetric_beta(double a) {
        if (!(a >= 1.0)) fail(ErrorKind::DomainError, "SymmetricBeta needs shape a >= 1");
        return Phi(SymmetricBeta{a});
    }
    static Phi bimodal(double p, double w) {
        if (!(w > 0.0) || !(p - w >= 0.0) || !(p + w <= 1.0))
            fail(ErrorKind::DomainError, "bimodal bumps must lie inside [0, 1]");
        return Phi(Bimodal{p, w});
    }
    static Phi tabulated(std::vector<double> xi, std::vector<double> v) {
        return Phi(Tabulated{detail::Table(std::move(xi), std::move(v))});
    }

    double operator()(double xi) const { return eval(xi, 1.0 - xi); }

    // Phi at xi with eta = 1 - xi supplied by the caller, so that swapping the
    // roles of xi and eta gives a bitwise symmetric result for symmetric families.
    double eval(double xi, double eta) const {
        if (xi < 0.0 || xi > 1.0) return 0.0;
        switch (data_.index()) {
        case 0: return 1.0;
        case 1: {
            const double t = xi * eta;
            return (int_exp_ >= 0 ? detail::ipow(t, int_exp_) : std::pow(t, beta_exp_)) * scale_;
        }
        case 2: {
            const auto& d = std::get<Bimodal>(data_);
            auto bump = [&](double x) {
                const double s = (x - d.p) / d.w;
                if (std::abs(s) >= 1.0) return 0.0;
                const double q = 1.0 - s * s;
                return q * q;
            };
            const double a = bump(xi), b = bump(eta);
            return (a + b) * scale_;
        }
        default: return std::max(0.0, std::get<Tabulated>(data_).table(xi));
        }
    }

    bool is_uniform() const { return data_.index() == 0; }
    double sup_norm() const { return sup_; }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (data_.index()) {
        case 0: os << "uniform"; break;
        case 1: os << "symmetric_beta(a=" << std::get<SymmetricBeta>(data_).a << ")"; break;
        case 2:
            os << "bimodal(p=" << std::get<Bimodal>(data_).p << ",w=" << std::get<Bimodal>(data_).w << ")";
            break;
        default: os << "tabulated(" << std::get<Tabulated>(data_).table.x().size() << " points)";
        }
        return os.str();
    }

private:
    template <class T>
    explicit Phi(T d) : data_(std::move(d)) {
        if constexpr (std::is_same_v<T, SymmetricBeta>) {
            beta_exp_ = d.a - 1.0;
            if (std::abs(beta_exp_ - std::round(beta_exp_)) < 1e-14) int_exp_ = static_cast<int>(std::round(beta_exp_));
            scale_ = std::exp(std::lgamma(2.0 * d.a) - 2.0 * std::lgamma(d.a));
        } else if constexpr (std::is_same_v<T, Bimodal>) {
            scale_ = 15.0 / (32.0 * d.w);
        }
        double s = 0.0;
        for (int i = 0; i <= 4096; ++i) s = std::max(s, (*this)(i / 4096.0));
        sup_ = s;
    }

    std::variant<Uniform, SymmetricBeta, Bimodal, Tabulated> data_;
    double beta_exp_ = 0.0;
    int int_exp_ = -1;
    double scale_ = 1.0;
    double sup_ = 1.0;
};

class SegregationKernel {
public:
    SegregationKernel() = default;
    SegregationKernel(Phi phi, double m, double z0, bool allow_oracle_kernel = false)
        : phi_(std::move(phi)), m_(m), z0_(z0), allow_oracle_(allow_oracle_kernel) {}

    // k(z, z') on 0 <= z <= z' <= z0; zero for z' < m.
    double operator()(double z, double zp) const {
        const double tol = 1e-12 * z0_;
        if (z < -tol || zp > z0_ + tol || z > zp + tol)
            fail(ErrorKind::DomainError, "kernel evaluated outside 0 <= z <= z' <= z0");
        if (zp < m_) return 0.0;
        const double zc = std::clamp(z, 0.0, zp);
        return 2.0 / zp * phi_.eval(zc / zp, (zp - zc) / zp);
    }

    double mass(double zp) const {
        if (zp < m_) return 0.0;
        return integrate_adaptive([&](double z) { return (*this)(z, zp); }, 0.0, zp, 1e-13);
    }

    const Phi& phi() const { return phi_; }
    double m() const { return m_; }
    double z0() const { return z0_; }
    bool allow_oracle_kernel() const { return allow_oracle_; }

private:
    Phi phi_;
    double m_ = 0.0;
    double z0_ = 1.0;
    bool allow_oracle_ = false;
};

struct Bounds {
    double lo, hi, argmin, argmax;
};

namespace detail {

template <class F>
double golden_min(F&& f, double a, double b) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Extremes of f on [lo, hi] from 4096 samples plus golden-section refinement.
template <class F>
Bounds extract_bounds(F&& f, double lo, double hi, const char* what = "rate") {
    constexpr int n = 4096;
    std::vector<double> xs(n + 1), fs(n + 1);
    for (int i = 0; i <= n; ++i) {
        xs[i] = i == n ? hi : lo + (hi - lo) * i / n;
        fs[i] = f(xs[i]);
        if (!std::isfinite(fs[i]))
            fail(ErrorKind::NonFiniteEvaluation, std::string(what) + " is not finite at z=" + std::to_string(xs[i]));
    }
    std::size_t imin = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    std::size_t imax = static_cast<std::size_t>(std::max_element(fs.begin(), fs.end()) - fs.begin());
    Bounds b{fs[imin], fs[imax], xs[imin], xs[imax]};
    auto refine = [&](std::size_t i, double sign, double& best, double& arg) {
        const double a = xs[i == 0 ? 0 : i - 1], c = xs[std::min<std::size_t>(n, i + 1)];
        if (!(c > a)) return;
        const double x = detail::golden_min([&](double t) { return sign * f(t); }, a, c);
        const double v = f(x);
        if (std::isfinite(v) && sign * v < sign * best) {
            best = v;
            arg = x;
        }
    };
    refine(imin, 1.0, b.lo, b.argmin);
    refine(imax, -1.0, b.hi, b.argmax);
    return b;
}

class ModelParameters {
public:
    ModelParameters(RateFunction b, RateFunction beta, RateFunction mu, SegregationKernel kernel, double epsilon = 0.0)
        : b_(std::move(b)), beta_(std::move(beta)), mu_(std::move(mu)), kernel_(std::move(kernel)), epsilon_(epsilon) {
        const double m = kernel_.m(), z0 = kernel_.z0();
        if (!(z0 > 0.0) || !std::isfinite(z0)) fail(ErrorKind::DomainError, "z0 must be positive");
        if (!(m > 0.0)) fail(ErrorKind::DomainError, "cutoff m must be positive");
        if (!(m < z0)) fail(ErrorKind::DomainError, "cutoff m must be below z0");
        if (!(epsilon >= 0.0)) fail(ErrorKind::DomainError, "epsilon must be >= 0");
        beta_m_bounds_ = extract_bounds(beta_, m, z0, "beta");
        mu_bounds_ = extract_bounds(mu_, 0.0, z0, "mu");
        b_bounds_ = extract_bounds(b_, 0.0, z0, "b");
    }

    const RateFunction& b() const { return b_; }
    const RateFunction& beta() const { return beta_; }
    const RateFunction& mu() const { return mu_; }
    const SegregationKernel& kernel() const { return kernel_; }
    double m() const { return kernel_.m(); }
    double z0() const { return kernel_.z0(); }
    double epsilon() const { return epsilon_; }

    double beta_m(double z) const { return z >= m() ? beta_(z) : 0.0; }

    double beta_m_lo() const { return beta_m_bounds_.lo; }
    double beta_m_hi() const { return beta_m_bounds_.hi; }
    double mu_lo() const { return mu_bounds_.lo; }
    double mu_hi() const { return mu_bounds_.hi; }
    double b_max() const { return b_bounds_.hi; }

    ModelParameters with_epsilon(double eps) const {
        ModelParameters p = *this;
        if (!(eps >= 0.0)) fail(ErrorKind::DomainError, "epsilon must be >= 0");
        p.epsilon_ = eps;
        return p;
    }
    ModelParameters with_mu(RateFunction mu) const {
        return ModelParameters(b_, beta_, std::move(mu), kernel_, epsilon_);
    }
    ModelParameters with_beta(RateFunction beta) const {
        return ModelParameters(b_, std::move(beta), mu_, kernel_, epsilon_);
    }
    ModelParameters with_kernel(SegregationKernel k) const {
        return ModelParameters(b_, beta_, mu_, std::move(k), epsilon_);
    }

    // Interval known to contain the eigenvalue: [-mu_hi, 2 beta_hi + 2 - beta_lo - mu_lo].
    double lambda_lower() const { return -mu_hi(); }
    double lambda_upper() const { return 2.0 * beta_m_hi() + 2.0 - beta_m_lo() - mu_lo(); }

private:
    RateFunction b_, beta_, mu_;
    SegregationKernel kernel_;
    double epsilon_;
    Bounds beta_m_bounds_{}, mu_bounds_{}, b_bounds_{};
};

inline double beta_m(const ModelParameters& p, double z) { return p.beta_m(z); }
inline double kernel_eval(const SegregationKernel& k, double z, double zp) { return k(z, zp); }
inline double kernel_mass(const SegregationKernel& k, double zp) { return k.mass(zp); }

struct AssumptionCheck {
    std::string assumption;  // A1 .. A6
    std::string name;
    bool passed;
    bool hard;  // a hard failure makes the parameter set unusable
    double measured;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    std::vector<std::pair<double, double>> kernel_mass;  // (z', mass)
    double b_at_0 = 0.0, b_at_z0 = 0.0;

    bool hard_failure() const {
        return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.hard && !c.passed; });
    }
    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
};

inline ValidationReport validate(const ModelParameters& p) {
    ValidationReport rep;
    const double z0 = p.z0(), m = p.m();
    auto add = [&](std::string a, std::string name, bool ok, bool hard, double v, std::string d = {}) {
        rep.checks.push_back({std::move(a), std::move(name), ok, hard, v, std::move(d)});
    };

    rep.b_at_0 = p.b()(0.0);
    rep.b_at_z0 = p.b()(z0);
    const double bscale = std::max(1.0, p.b_max());
    add("A1", "b(0) = 0", std::abs(rep.b_at_0) <= 1e-12 * bscale, true, rep.b_at_0);
    add("A1", "b(z0) = 0", std::abs(rep.b_at_z0) <= 1e-12 * bscale, true, rep.b_at_z0);
    const Bounds bint = extract_bounds(p.b(), 1e-6 * z0, (1.0 - 1e-6) * z0, "b");
    add("A1", "b > 0 on (0, z0)", bint.lo > 0.0, true, bint.lo);
    add("A1", "z0 >= 1", z0 >= 1.0, false, z0);

    add("A2", "beta_m lower bound > 0 on [m, z0]", p.beta_m_lo() > 0.0, true, p.beta_m_lo());
    add("A3", "mu lower bound >= 0", p.mu_lo() >= 0.0, true, p.mu_lo());

    const auto& k = p.kernel();
    const Phi& phi = k.phi();
    const bool oracle = phi.is_uniform();
    const double end_val = std::max(std::abs(phi(0.0)), std::abs(phi(1.0)));
    add("A4", "Phi(0) = Phi(1) = 0", end_val <= 1e-12, !(oracle && k.allow_oracle_kernel()), end_val,
        oracle ? (k.allow_oracle_kernel() ? "uniform oracle kernel admitted by allow_oracle_kernel"
                                          : "uniform kernel needs allow_oracle_kernel")
               : "");

    double sym = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double xi = i / 1000.0;
        sym = std::max(sym, std::abs(phi(xi) - phi(1.0 - xi)));
    }
    add("A4", "Phi symmetric", sym <= 1e-12, true, sym);

    const double phi_mass = integrate_adaptive([&](double x) { return phi(x); }, 0.0, 1.0, 1e-13);
    add("A4", "integral of Phi = 1", std::abs(phi_mass - 1.0) <= 1e-8, true, phi_mass - 1.0);

    double worst_mass = 0.0, worst_ksym = 0.0;
    for (int i = 0; i <= 32; ++i) {
        const double zp = m + (z0 - m) * i / 32.0;
        const double mass = k.mass(zp);
        rep.kernel_mass.emplace_back(zp, mass);
        worst_mass = std::max(worst_mass, std::abs(mass - 2.0));
        for (int j = 0; j <= 20; ++j) {
            const double z = zp * j / 20.0;
            worst_ksym = std::max(worst_ksym, std::abs(k(z, zp) - k(zp - z, zp)));
        }
    }
    add("A4", "kernel mass = 2 on [m, z0]", worst_mass <= 1e-8, true, worst_mass);
    add("A4", "kernel symmetry", worst_ksym <= 1e-12, true, worst_ksym);

    double phi_min = 1e300;
    for (int i = 1; i < 1000; ++i) phi_min = std::min(phi_min, phi(i / 1000.0));
    add("A6", "Phi > 0 on (0, 1)", phi_min > 0.0, false, phi_min, "needed only for the dominance checks");
    return rep;
}

}  // namespace plasmid
