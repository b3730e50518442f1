#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace plasmid {

// Copy-number histogram. c[0..n-1] are the non-dividing classes v_i,
// c[n..N] the dividing classes w_i; w_{n-1} is c[n-1].
struct DiscreteState {
    std::size_t n = 2;
    double h = 1.0;
    std::vector<double> c;
    double t = 0.0;

    std::size_t N() const { return c.size() - 1; }
    double v(std::size_t i) const { return c.at(i); }
    double w(std::size_t i) const { return i + 1 >= n ? c.at(i) : 0.0; }
    double total() const {
        double s = 0.0;
        for (double x : c) s += x;
        return s;
    }
};

// Pair sums p(i,j) + p(j-i,j) for j >= n.
struct SegregationTable {
    std::size_t n = 0, N = 0;
    std::vector<std::vector<double>> rows;  // rows[j - n][i], i = 0..j

    bool has_row(std::size_t j) const { return j >= n && j <= N; }
    const std::vector<double>& row(std::size_t j) const {
        if (!has_row(j)) fail(ErrorKind::DomainError, "no segregation row for j < n");
        return rows[j - n];
    }
    double row_sum(std::size_t j) const {
        double s = 0.0;
        for (double x : row(j)) s += x;
        return s;
    }
};

inline SegregationTable build_segregation_table(const SegregationKernel& kernel, double h, std::size_t n,
                                                std::size_t N) {
    if (n < 2 || N < n) fail(ErrorKind::DomainError, "segregation table needs 2 <= n <= N");
    if (!(h > 0.0)) fail(ErrorKind::DomainError, "segregation table needs h > 0");
    SegregationTable t;
    t.n = n;
    t.N = N;
    t.rows.resize(N - n + 1);
    const Phi& phi = kernel.phi();
    for (std::size_t j = n; j <= N; ++j) {
        auto& r = t.rows[j - n];
        r.assign(j + 1, 0.0);
        const double dj = static_cast<double>(j);
        double s = 0.0;
        // k(ih, jh) h = (2/j) Phi(i/j)
        for (std::size_t i = 1; i < j; ++i) {
            r[i] = 2.0 / dj * phi.eval(static_cast<double>(i) / dj, static_cast<double>(j - i) / dj);
            s += r[i];
        }
        if (!(s > 0.0)) fail(ErrorKind::DomainError, "kernel has no mass on row j=" + std::to_string(j));
        for (std::size_t i = 1; i < j; ++i) r[i] *= 2.0 / s;
    }
    return t;
}

class DiscreteModel {
public:
    DiscreteModel(const ModelParameters& p, double h, std::size_t n) : h_(h), n_(n) {
        if (!(h > 0.0)) fail(ErrorKind::DomainError, "h must be positive");
        if (n < 2) fail(ErrorKind::DomainError, "threshold n must be >= 2");
        if (std::abs(static_cast<double>(n) * h - p.m()) > h) fail(ErrorKind::DomainError, "n*h must approximate m");
        N_ = static_cast<std::size_t>(std::floor(p.z0() / h + 1e-9));
        if (N_ < n) fail(ErrorKind::DomainError, "z0/h must exceed n");
        bt_.assign(N_ + 1, 0.0);
        beta_.assign(N_ + 1, 0.0);
        mu_.assign(N_ + 1, 0.0);
        for (std::size_t i = 0; i <= N_; ++i) {
            const double z = std::min(static_cast<double>(i) * h, p.z0());
            if (i > 0 && i < N_) bt_[i] = p.b()(z) / h;
            beta_[i] = p.beta()(z);
            mu_[i] = p.mu()(z);
        }
        table_ = build_segregation_table(p.kernel(), h, n, N_);
    }

    double h() const { return h_; }
    std::size_t n() const { return n_; }
    std::size_t N() const { return N_; }
    const SegregationTable& table() const { return table_; }
    double beta(std::size_t i) const { return beta_[i]; }
    double mu(std::size_t i) const { return mu_[i]; }
    double btilde(std::size_t i) const { return bt_[i]; }

    DiscreteState initial(std::vector<double> c) const {
        c.resize(N_ + 1, 0.0);  // mass past the cap is dropped
        for (double x : c)
            if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorKind::DomainError, "initial counts must be >= 0");
        return DiscreteState{n_, h_, std::move(c), 0.0};
    }

    void rhs(const std::vector<double>& c, std::vector<double>& d) const {
        d.assign(N_ + 1, 0.0);
        d[0] = (beta_[0] - mu_[0]) * c[0];
        for (std::size_t i = 1; i < n_; ++i) d[0] += beta_[i] * c[i];
        for (std::size_t i = 1; i <= N_; ++i) {
            d[i] += bt_[i - 1] * c[i - 1] - bt_[i] * c[i] - mu_[i] * c[i];
            if (i >= n_) d[i] -= beta_[i] * c[i];
        }
        for (std::size_t j = n_; j <= N_; ++j) {
            const double f = beta_[j] * c[j];
            if (f == 0.0) continue;
            const auto& r = table_.rows[j - n_];
            for (std::size_t i = 1; i < j; ++i) d[i] += f * r[i];
        }
    }

    // 0.1 / max total loss rate of a bin.
    double default_dt() const {
        double r = 0.0;
        for (std::size_t i = 0; i <= N_; ++i) r = std::max(r, beta_[i] + mu_[i] + bt_[i]);
        return r > 0.0 ? 0.1 / r : 1.0;
    }

private:
    double h_;
    std::size_t n_, N_ = 0;
    std::vector<double> bt_, beta_, mu_;
    SegregationTable table_;
};

inline DiscreteState step_discrete(const DiscreteState& s, const DiscreteModel& model, double dt) {
    if (s.c.size() != model.N() + 1) fail(ErrorKind::GridMismatch, "state does not match the model");
    const std::size_t M = s.c.size();
    std::vector<double> k1, k2, k3, k4, tmp(M);
    model.rhs(s.c, k1);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = s.c[i] + 0.5 * dt * k1[i];
    model.rhs(tmp, k2);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = s.c[i] + 0.5 * dt * k2[i];
    model.rhs(tmp, k3);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = s.c[i] + dt * k3[i];
    model.rhs(tmp, k4);
    DiscreteState out = s;
    for (std::size_t i = 0; i < M; ++i) {
        double x = s.c[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (x < 0.0) {
            if (x < -1e-6) fail(ErrorKind::StabilityError, "negative count in bin " + std::to_string(i));
            x = 0.0;
        }
        out.c[i] = x;
    }
    out.t = s.t + dt;
    return out;
}

struct DiscreteRun {
    std::vector<double> times;
    std::vector<double> totals;
    std::vector<DiscreteState> snapshots;
    DiscreteState final_state;
};

// Integrates to t_end with the default step, or `max_dt` if smaller; the step
// is shortened to land on t_end.
inline DiscreteRun run_discrete(const DiscreteModel& model, DiscreteState s, double t_end, std::size_t stride = 0,
                                double max_dt = 0.0) {
    DiscreteRun run;
    const double dt0 = max_dt > 0.0 ? std::min(max_dt, model.default_dt()) : model.default_dt();
    const std::size_t steps = t_end > s.t ? static_cast<std::size_t>(std::ceil((t_end - s.t) / dt0 - 1e-12)) : 0;
    const double dt = steps ? (t_end - s.t) / static_cast<double>(steps) : 0.0;
    const double t_start = s.t;
    run.times.push_back(s.t);
    run.totals.push_back(s.total());
    if (stride) run.snapshots.push_back(s);
    for (std::size_t k = 1; k <= steps; ++k) {
        s = step_discrete(s, model, dt);
        s.t = t_start + static_cast<double>(k) * dt;
        run.times.push_back(s.t);
        run.totals.push_back(s.total());
        if (stride && (k % stride == 0 || k == steps)) run.snapshots.push_back(s);
    }
    run.final_state = std::move(s);
    return run;
}

}  // namespace plasmid
