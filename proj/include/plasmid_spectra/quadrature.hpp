#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "error.hpp"

namespace plasmid {

// Nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

// Golub-Welsch for the weight (1-x)^a (1+x)^b.
inline GaussRule gauss_jacobi(std::size_t n, double a, double b) {
    if (n == 0 || a <= -1.0 || b <= -1.0) fail(ErrorKind::DomainError, "gauss_jacobi: bad parameters");
    Eigen::VectorXd diag(n), off(n > 1 ? n - 1 : 1);
    const double ab = a + b;
    diag(0) = (b - a) / (ab + 2.0);
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        const double s = 2.0 * kk + ab;
        diag(k) = (b * b - a * a) / (s * (s + 2.0));
        double beta2;
        if (k == 1) {
            beta2 = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
        } else {
            beta2 = 4.0 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1.0) * (s - 1.0));
        }
        off(k - 1) = std::sqrt(beta2);
    }
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    if (n == 1) {
        r.x[0] = diag(0);
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
        const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                                    std::lgamma(ab + 2.0));
        for (std::size_t i = 0; i < n; ++i) {
            r.x[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
            const double v0 = es.eigenvectors()(0, static_cast<Eigen::Index>(i));
            r.w[i] = mu0 * v0 * v0;
        }
        return r;
    }
    r.w[0] = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) - std::lgamma(ab + 2.0));
    return r;
}

inline const GaussRule& gauss_legendre(std::size_t n) {
    static std::mutex mtx;
    static std::map<std::size_t, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_jacobi(n, 0.0, 0.0)).first;
    return it->second;
}

template <class F>
double integrate_gl(F&& f, double lo, double hi, const GaussRule& rule) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) s += rule.w[i] * f(c + h * rule.x[i]);
    return s * h;
}

// Integral over [lo, hi] of f(y) (hi - y)^p, p > -1, with f smooth.
template <class F>
double integrate_right_power(F&& f, double lo, double hi, double p, const GaussRule& jacobi_rule) {
    const double h = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t i = 0; i < jacobi_rule.size(); ++i) s += jacobi_rule.w[i] * f(lo + h * (1.0 + jacobi_rule.x[i]));
    return s * std::pow(h, p + 1.0);
}

// Panels of [lo, hi] ⊂ (0, z0) that halve in width toward 0 and toward z0.
// The split point is z0/2; panels are listed left to right.
inline std::vector<std::pair<double, double>> graded_panels(double lo, double hi, double z0) {
    std::vector<std::pair<double, double>> out;
    if (!(hi > lo)) return out;
    const double mid = 0.5 * z0;
    if (lo < mid) {
        const double end = std::min(hi, mid);
        std::vector<std::pair<double, double>> left;
        double p = end;
        while (p > lo) {
            const double q = std::max(lo, 0.5 * p);
            left.emplace_back(q, p);
            if (q == lo) break;
            p = q;
        }
        out.insert(out.end(), left.rbegin(), left.rend());
    }
    if (hi > mid) {
        double s = z0 - std::max(lo, mid);
        const double s_end = z0 - hi;
        while (s > s_end) {
            const double t = std::max(s_end, 0.5 * s);
            out.emplace_back(z0 - s, z0 - t);
            if (t == s_end) break;
            s = t;
        }
    }
    return out;
}

template <class F>
double integrate_graded(F&& f, double lo, double hi, double z0, std::size_t nodes = 16) {
    const GaussRule& rule = gauss_legendre(nodes);
    double s = 0.0;
    for (auto [a, b] : graded_panels(lo, hi, z0)) s += integrate_gl(f, a, b, rule);
    return s;
}

// Adaptive Gauss-Kronrod wrapper; throws QuadratureFailure on non-finite output.
template <class F>
double integrate_adaptive(F&& f, double lo, double hi, double tol = 1e-12, unsigned depth = 20) {
    if (hi <= lo) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, lo, hi, depth, tol, &err);
    if (!std::isfinite(v)) fail(ErrorKind::QuadratureFailure, "adaptive quadrature returned a non-finite value");
    return v;
}

// (1 - e^{-x}) / x, continuous at 0.
inline double phi1(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

}  // namespace plasmid
