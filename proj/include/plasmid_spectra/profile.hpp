#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "error.hpp"
#include "quadrature.hpp"

namespace plasmid {

// A density on [0, z0] given as cell averages, point samples (linear in
// between) or a callable.
class Profile {
public:
    static Profile cells(std::vector<double> edges, std::vector<double> values) {
        if (edges.size() != values.size() + 1) fail(ErrorKind::GridMismatch, "cell profile size mismatch");
        Profile p;
        p.kind_ = Kind::Cells;
        p.x_ = std::move(edges);
        p.y_ = std::move(values);
        return p;
    }
    static Profile points(std::vector<double> z, std::vector<double> values) {
        if (z.size() != values.size() || z.size() < 2) fail(ErrorKind::GridMismatch, "point profile size mismatch");
        Profile p;
        p.kind_ = Kind::Points;
        p.x_ = std::move(z);
        p.y_ = std::move(values);
        return p;
    }
    static Profile function(std::function<double(double)> f) {
        Profile p;
        p.kind_ = Kind::Function;
        p.f_ = std::move(f);
        return p;
    }

    double operator()(double z) const {
        switch (kind_) {
        case Kind::Cells: {
            auto it = std::upper_bound(x_.begin(), x_.end(), z);
            std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
            return y_[std::min(i, y_.size() - 1)];
        }
        case Kind::Points: {
            if (z <= x_.front()) return y_.front();
            if (z >= x_.back()) return y_.back();
            auto it = std::upper_bound(x_.begin(), x_.end(), z);
            const std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
            const double s = (z - x_[k]) / (x_[k + 1] - x_[k]);
            return (1.0 - s) * y_[k] + s * y_[k + 1];
        }
        default: return f_(z);
        }
    }

    const std::vector<double>& breakpoints() const { return x_; }

private:
    enum class Kind { Cells, Points, Function };
    Kind kind_ = Kind::Function;
    std::vector<double> x_, y_;
    std::function<double(double)> f_;
};

namespace detail {
inline std::vector<double> partition(const Profile& a, const Profile& b, double lo, double hi, int pieces = 4000) {
    std::vector<double> cuts;
    for (int i = 0; i <= pieces; ++i) cuts.push_back(lo + (hi - lo) * i / pieces);
    for (const Profile* p : {&a, &b})
        for (double x : p->breakpoints())
            if (x > lo && x < hi) cuts.push_back(x);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}
}  // namespace detail

template <class F>
double integrate_profile_expr(const Profile& a, const Profile& b, double lo, double hi, F&& f) {
    const auto cuts = detail::partition(a, b, lo, hi);
    const GaussRule& g = gauss_legendre(8);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        s += integrate_gl([&](double z) { return f(a(z), b(z)); }, cuts[i], cuts[i + 1], g);
    return s;
}

// int_lo^hi |a - ref| / int_lo^hi |ref|
inline double relative_l1(const Profile& a, const Profile& ref, double lo, double hi) {
    const double num = integrate_profile_expr(a, ref, lo, hi, [](double x, double y) { return std::abs(x - y); });
    const double den = integrate_profile_expr(a, ref, lo, hi, [](double, double y) { return std::abs(y); });
    return num / den;
}

}  // namespace plasmid
