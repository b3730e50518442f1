#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "error.hpp"
#include "fv.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace plasmid {

// Cell averages u, zero-plasmid count v0. The physical state is
// exp(log_scale) * (u, v0); rescaling keeps long runs in range.
struct PdeState {
    std::vector<double> u;
    double v0 = 0.0;
    double t = 0.0;
    double log_scale = 0.0;
};

// Mass changes over one step, split by process.
struct StepBudget {
    double reaction = 0.0;
    double fragmentation = 0.0;
    double transport = 0.0;
};

// v0' = r v0 + S(t) over dt with S linear between S0 and S1.
inline double step_v0(double v0, double S0, double S1, double r, double dt) {
    const double x = r * dt;
    // e1 = (e^x - 1)/x, e2 = (e^x - 1 - x)/x^2
    double e1, e2;
    if (std::abs(x) < 1e-4) {
        e1 = 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0;
        e2 = 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0;
    } else {
        e1 = std::expm1(x) / x;
        e2 = (std::expm1(x) - x) / (x * x);
    }
    // int_0^dt e^{r(dt-s)} (S0 + (S1-S0) s/dt) ds
    const double a = dt * e1;                     // int e^{r(dt-s)} ds
    const double b = dt * (e1 - e2);              // int (s/dt) e^{r(dt-s)} ds
    return v0 * std::exp(x) + S0 * a + (S1 - S0) * b;
}

class PdeSolver {
public:
    PdeSolver(const ModelParameters& p, Grid grid)
        : fv_(build_fv_operator(p, std::move(grid))), r0_(p.beta()(0.0) - p.mu()(0.0)) {
        const std::size_t J = fv_.cells();
        max_dt_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < J; ++i)
            if (fv_.b_edge[i + 1] > 0.0) max_dt_ = std::min(max_dt_, 0.9 * fv_.grid.width(i) / fv_.b_edge[i + 1]);
        loss_.resize(J);
        for (std::size_t i = 0; i < J; ++i) loss_[i] = fv_.beta_m[i] + fv_.mu[i];
        m_ = p.m();
    }

    const Grid& grid() const { return fv_.grid; }
    const FiniteVolumeOperator& fv() const { return fv_; }
    // Largest dt with dt * b(z_{i+1/2}) / dz_i <= 0.9 in every cell.
    double max_dt() const { return max_dt_; }

    PdeState project(const std::function<double(double)>& u0, double v0 = 0.0) const {
        PdeState s;
        s.u.resize(fv_.cells());
        const GaussRule& g = gauss_legendre(8);
        for (std::size_t i = 0; i < fv_.cells(); ++i)
            s.u[i] = integrate_gl(u0, fv_.grid.edges[i], fv_.grid.edges[i + 1], g) / fv_.grid.width(i);
        s.v0 = v0;
        return s;
    }

    double mass(const PdeState& s) const { return mass_of(s.u) * std::exp(s.log_scale); }
    double mass_of(const std::vector<double>& u) const {
        double m = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) m += u[i] * fv_.grid.width(i);
        return m;
    }
    // int_0^m beta u
    double v0_source(const std::vector<double>& u) const {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size() && fv_.grid.edges[i + 1] <= m_ + 1e-15; ++i)
            s += fv_.beta[i] * u[i] * fv_.grid.width(i);
        return s;
    }

    // Transport, then reaction, then fragmentation; v0 by its integrating factor.
    PdeState step(const PdeState& s, double dt, StepBudget* budget = nullptr) const {
        const std::size_t J = fv_.cells();
        if (s.u.size() != J) fail(ErrorKind::GridMismatch, "state does not match the grid");
        if (dt > max_dt_ * (1.0 + 1e-12)) fail(ErrorKind::CflViolation, "dt exceeds the CFL limit");
        PdeState out;
        out.t = s.t + dt;
        out.log_scale = s.log_scale;
        std::vector<double> u(J);
        for (std::size_t i = 0; i < J; ++i) {
            const double w = fv_.grid.width(i);
            const double in = i > 0 ? fv_.b_edge[i] * s.u[i - 1] : 0.0;
            u[i] = s.u[i] + dt / w * (in - fv_.b_edge[i + 1] * s.u[i]);
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double nu = u[i] * std::exp(-loss_[i] * dt);
            loss += (nu - u[i]) * fv_.grid.width(i);
            u[i] = nu;
        }
        Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(J));
        const Eigen::VectorXd gain = fv_.frag * uv;
        double gained = 0.0;
        out.u.resize(J);
        for (std::size_t i = 0; i < J; ++i) {
            out.u[i] = u[i] + dt * gain(static_cast<Eigen::Index>(i));
            gained += dt * gain(static_cast<Eigen::Index>(i)) * fv_.grid.width(i);
        }
        out.v0 = step_v0(s.v0, v0_source(s.u), v0_source(out.u), r0_, dt);
        if (budget) {
            budget->reaction = loss;
            budget->fragmentation = gained;
            budget->transport = 0.0;
        }
        return out;
    }

    // d/dt int u at state s: int (beta_m - mu) u
    double mass_rate(const std::vector<double>& u) const {
        double r = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) r += (fv_.beta_m[i] - fv_.mu[i]) * u[i] * fv_.grid.width(i);
        return r;
    }

private:
    FiniteVolumeOperator fv_;
    double r0_;
    double m_;
    double max_dt_;
    std::vector<double> loss_;
};

struct PdeTrajectory {
    std::vector<double> t;
    std::vector<double> log_mass;
    std::vector<double> v0;  // physical value
    std::vector<double> snapshot_t;
    std::vector<std::vector<double>> snapshots;  // physical cell averages
    PdeState final_state;
    Grid grid;
};

struct PdeRunOptions {
    double dt = 0.0;          // 0: use the CFL limit
    std::size_t stride = 0;   // snapshot every `stride` steps; 0: none
    bool rescale = true;      // keep max u near 1 by moving mass into log_scale
};

inline PdeTrajectory run_pde(const PdeSolver& solver, PdeState s, double t_end, PdeRunOptions opt = {}) {
    PdeTrajectory tr;
    tr.grid = solver.grid();
    const double dt_max = std::min(solver.max_dt(), 0.05);
    const double dt_req = opt.dt > 0.0 ? std::min(opt.dt, dt_max) : dt_max;
    const double span = t_end - s.t;
    const std::size_t steps = span > 0.0 ? static_cast<std::size_t>(std::ceil(span / dt_req - 1e-12)) : 0;
    const double dt = steps ? span / static_cast<double>(steps) : 0.0;
    const double t0 = s.t;
    auto record = [&](const PdeState& st, std::size_t k) {
        tr.t.push_back(st.t);
        tr.log_mass.push_back(std::log(solver.mass_of(st.u)) + st.log_scale);
        tr.v0.push_back(st.v0 * std::exp(st.log_scale));
        if (opt.stride && (k % opt.stride == 0 || k == steps)) {
            tr.snapshot_t.push_back(st.t);
            std::vector<double> u = st.u;
            const double f = std::exp(st.log_scale);
            for (double& x : u) x *= f;
            tr.snapshots.push_back(std::move(u));
        }
    };
    record(s, 0);
    for (std::size_t k = 1; k <= steps; ++k) {
        s = solver.step(s, dt);
        s.t = t0 + static_cast<double>(k) * dt;
        if (opt.rescale) {
            const double mx = *std::max_element(s.u.begin(), s.u.end());
            if (mx > 1e50 || (mx > 0.0 && mx < 1e-50)) {
                for (double& x : s.u) x /= mx;
                s.v0 /= mx;
                s.log_scale += std::log(mx);
            }
        }
        record(s, k);
    }
    tr.final_state = std::move(s);
    return tr;
}

struct LongtimeEstimate {
    double lambda = 0.0;
    double slope_variance = 0.0;
    Profile profile = Profile::function([](double) { return 0.0; });
    std::vector<double> normalized_u;  // cell averages, integral 1 on [cutoff, z0]
};

// Least-squares slope of log mass over the last `window` fraction of the run.
inline LongtimeEstimate longtime_eigen_estimate(const PdeTrajectory& tr, double window = 0.25, double cutoff = 0.005,
                                                double variance_tol = 1e-6) {
    if (tr.t.size() < 8) fail(ErrorKind::NotConverged, "trajectory too short");
    const double t_end = tr.t.back(), t_start = t_end - window * (t_end - tr.t.front());
    std::size_t k0 = 0;
    while (k0 < tr.t.size() && tr.t[k0] < t_start) ++k0;
    const std::size_t n = tr.t.size() - k0;
    if (n < 4) fail(ErrorKind::NotConverged, "window holds too few samples");
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = k0; k < tr.t.size(); ++k) {
        st += tr.t[k];
        sy += tr.log_mass[k];
        stt += tr.t[k] * tr.t[k];
        sty += tr.t[k] * tr.log_mass[k];
    }
    const double dn = static_cast<double>(n);
    LongtimeEstimate est;
    est.lambda = (dn * sty - st * sy) / (dn * stt - st * st);
    // spread of the local slopes over ten sub-windows
    const std::size_t parts = 10, len = n / parts;
    std::vector<double> slopes;
    for (std::size_t p = 0; p < parts && len >= 1; ++p) {
        const std::size_t a = k0 + p * len, b = std::min(k0 + (p + 1) * len, tr.t.size() - 1);
        if (b > a) slopes.push_back((tr.log_mass[b] - tr.log_mass[a]) / (tr.t[b] - tr.t[a]));
    }
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= static_cast<double>(slopes.size());
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    est.slope_variance = var / static_cast<double>(slopes.size());
    if (!(est.slope_variance < variance_tol))
        fail(ErrorKind::NotConverged, "log-mass slope not stationary, variance " + std::to_string(est.slope_variance));

    const Grid& g = tr.grid;
    std::vector<double> u = tr.final_state.u;
    double norm = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double lo = std::max(g.edges[i], cutoff), hi = g.edges[i + 1];
        if (hi > lo) norm += u[i] * (hi - lo);
    }
    for (double& x : u) x /= norm;
    est.normalized_u = u;
    est.profile = Profile::cells(g.edges, u);
    return est;
}

}  // namespace plasmid
