#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "flow.hpp"
#include "fv.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "parallel.hpp"
#include "profile.hpp"
#include "quadrature.hpp"

namespace plasmid {

// lambda-independent pieces of the discretized operator G = K o M, where M
// maps a nodal function to cell masses of the solution of
// (b U)' + (lambda + beta_m + mu + eps) U = f, U(0) = 0, and K applies the
// fragmentation kernel at the grid nodes.
struct OperatorTables {
    Grid grid;
    double z0 = 1.0;
    std::size_t gauss_nodes = 16;
    std::vector<double> omega;     // trapezoid weights at nodes
    std::vector<double> dW;        // weight across each interior cell (inf at both end cells)
    std::vector<double> rate;      // mean of beta_m + mu per unit weight in each cell
    std::vector<double> beta_m;    // per cell, at the midpoint
    std::vector<double> gw;        // source-cell quadrature weights (J * nodes)
    std::vector<double> gW;        // weight from each quadrature node to the top of its cell
    Eigen::MatrixXd K0;            // (J+1) x J, nodal kernel times beta_m per unit cell mass

    std::size_t cells() const { return grid.cells(); }
};

inline std::shared_ptr<const OperatorTables> build_operator_tables(const ModelParameters& p, Grid grid,
                                                                   const FlowMap& flow, std::size_t nodes = 16) {
    grid.check();
    auto t = std::make_shared<OperatorTables>();
    const std::size_t J = grid.cells();
    t->z0 = p.z0();
    t->gauss_nodes = nodes;
    t->omega.assign(J + 1, 0.0);
    for (std::size_t c = 0; c < J; ++c) {
        t->omega[c] += 0.5 * grid.width(c);
        t->omega[c + 1] += 0.5 * grid.width(c);
    }
    t->dW.assign(J, std::numeric_limits<double>::infinity());
    t->rate.assign(J, 0.0);
    t->beta_m.assign(J, 0.0);
    auto loss = [&p](double y) { return p.beta_m(y) + p.mu()(y); };
    const GaussRule& g = gauss_legendre(nodes);
    for (std::size_t c = 0; c < J; ++c) {
        const double lo = grid.edges[c], hi = grid.edges[c + 1];
        t->beta_m[c] = p.beta_m(grid.mid(c));
        if (c == 0 || c + 1 == J) {
            t->rate[c] = loss(c == 0 ? grid.mid(c) : hi);
            if (c + 1 == J) t->rate[c] = loss(hi);
            continue;
        }
        t->dW[c] = flow.weight(lo, hi);
        const double integral = integrate_gl([&](double y) { return loss(y) / p.b()(y); }, lo, hi, g);
        t->rate[c] = integral / t->dW[c];
    }
    t->gw.assign(J * nodes, 0.0);
    t->gW.assign(J * nodes, 0.0);
    for (std::size_t c = 0; c < J; ++c) {
        const double lo = grid.edges[c], hi = grid.edges[c + 1];
        for (std::size_t k = 0; k < nodes; ++k) {
            const double zp = 0.5 * (lo + hi) + 0.5 * (hi - lo) * g.x[k];
            t->gw[c * nodes + k] = 0.5 * (hi - lo) * g.w[k];
            t->gW[c * nodes + k] = c + 1 == J ? std::numeric_limits<double>::infinity() : flow.weight(zp, hi);
        }
    }
    // Kernel at node z_i from a mother in cell c (midpoint y_c): k(z_i, y_c)
    // for z_i below the cell, rescaled so sum_i omega_i K(i,c) = 2 beta_m(c).
    t->K0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(J + 1), static_cast<Eigen::Index>(J));
    const SegregationKernel& k = p.kernel();
    for (std::size_t c = 0; c < J; ++c) {
        if (t->beta_m[c] <= 0.0) continue;
        const double y = grid.mid(c);
        double s = 0.0;
        for (std::size_t i = 0; i <= c; ++i) {
            const double v = k(grid.edges[i], y);
            t->K0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
            s += t->omega[i] * v;
        }
        if (!(s > 0.0)) fail(ErrorKind::QuadratureFailure, "kernel vanishes on the grid below cell " + std::to_string(c));
        t->K0.col(static_cast<Eigen::Index>(c)) *= 2.0 * t->beta_m[c] / s;
    }
    t->grid = std::move(grid);
    return t;
}

// G at fixed (lambda, eps), acting on nodal values.
class OperatorDiscretization {
public:
    OperatorDiscretization(std::shared_ptr<const OperatorTables> tables, double lambda, double eps)
        : t_(std::move(tables)), lambda_(lambda), eps_(eps) {
        const std::size_t J = t_->cells(), n = t_->gauss_nodes;
        q_.resize(J);
        decay_.resize(J);
        T_.resize(J);
        A_.resize(J);
        D_.resize(J);
        for (std::size_t c = 0; c < J; ++c) {
            const double q = lambda + eps + t_->rate[c];
            q_[c] = q;
            if (c + 1 == J) {
                if (!(q > 0.0)) fail(ErrorKind::QuadratureFailure, "exponent not positive at z0");
                T_[c] = 1.0 / q;
                D_[c] = t_->grid.width(c) / q;
                decay_[c] = 0.0;
                A_[c] = 0.0;
                continue;
            }
            if (c > 0) {
                const double x = q * t_->dW[c];
                decay_[c] = std::exp(-x);
                T_[c] = t_->dW[c] * phi1(x);
            }
            double a = 0.0, d = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double W = t_->gW[c * n + k], w = t_->gw[c * n + k];
                a += w * std::exp(-q * W);
                d += w * W * phi1(q * W);
            }
            if (!std::isfinite(a) || !std::isfinite(d)) fail(ErrorKind::QuadratureFailure, "non-finite cell transfer");
            A_[c] = a;
            D_[c] = d;
        }
    }

    double lambda() const { return lambda_; }
    double epsilon() const { return eps_; }
    std::size_t nodes() const { return t_->cells() + 1; }
    const OperatorTables& tables() const { return *t_; }

    // Cell masses of U for a function given by its cell values.
    std::vector<double> cell_masses(const std::vector<double>& fc) const {
        const std::size_t J = t_->cells();
        std::vector<double> M(J);
        double acc = 0.0;
        for (std::size_t c = 0; c < J; ++c) {
            M[c] = (c == 0 ? 0.0 : acc * T_[c]) + fc[c] * D_[c];
            acc = acc * decay_[c] + fc[c] * A_[c];
        }
        return M;
    }

    std::vector<double> cell_values(const std::vector<double>& nodal) const {
        const std::size_t J = t_->cells();
        std::vector<double> fc(J);
        for (std::size_t c = 0; c < J; ++c) fc[c] = 0.5 * (nodal[c] + nodal[c + 1]);
        return fc;
    }

    // Nodal values of the kernel applied to cell masses M.
    std::vector<double> apply_kernel(const std::vector<double>& M) const {
        const std::size_t J = t_->cells();
        Eigen::Map<const Eigen::VectorXd> mv(M.data(), static_cast<Eigen::Index>(J));
        Eigen::VectorXd out = t_->K0 * mv;
        const double extra = 2.0 * eps_ / t_->z0 * mv.sum();
        std::vector<double> r(J + 1);
        for (std::size_t i = 0; i <= J; ++i) r[i] = out(static_cast<Eigen::Index>(i)) + extra;
        return r;
    }

    std::vector<double> apply(const std::vector<double>& nodal) const {
        if (nodal.size() != nodes()) fail(ErrorKind::GridMismatch, "operator input has the wrong size");
        return apply_kernel(cell_masses(cell_values(nodal)));
    }

    Eigen::MatrixXd dense() const {
        const std::size_t n = nodes();
        Eigen::MatrixXd G(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        std::vector<double> e(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            e[j] = 1.0;
            const auto col = apply(e);
            for (std::size_t i = 0; i < n; ++i) G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
            e[j] = 0.0;
        }
        return G;
    }

    double integral(const std::vector<double>& nodal) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodal.size(); ++i) s += t_->omega[i] * nodal[i];
        return s;
    }

private:
    std::shared_ptr<const OperatorTables> t_;
    double lambda_, eps_;
    std::vector<double> q_, decay_, T_, A_, D_;
};

inline OperatorDiscretization assemble_G(const ModelParameters& p, double lambda, double eps, const Grid& grid) {
    if (!(lambda > -p.mu_hi())) fail(ErrorKind::DomainError, "assemble_G needs lambda > -mu_hi");
    FlowMap flow(p.b(), p.z0());
    return OperatorDiscretization(build_operator_tables(p, grid, flow), lambda, eps);
}

struct PowerResult {
    double r = 0.0;
    std::vector<double> psi;
    std::size_t iterations = 0;
    double residual = 0.0;
};

struct PowerOptions {
    double tol = 1e-9;
    std::size_t max_iter = 10000;
};

// Power iteration with sup-norm scaling; `start` is a warm start if non-empty.
template <class Apply>
PowerResult power_iteration(Apply&& apply, std::size_t n, std::vector<double> start = {}, PowerOptions opt = {}) {
    PowerResult res;
    std::vector<double> x = start.size() == n ? std::move(start) : std::vector<double>(n, 1.0);
    double mx = 0.0;
    for (double v : x) mx = std::max(mx, std::abs(v));
    if (!(mx > 0.0)) x.assign(n, 1.0), mx = 1.0;
    for (double& v : x) v /= mx;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        std::vector<double> y = apply(x);
        double r = 0.0;
        for (double v : y) r = std::max(r, std::abs(v));
        if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::SlowConvergence, "power iteration collapsed");
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(y[i] - r * x[i]));
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / r;
        res.r = r;
        res.iterations = it;
        res.residual = resid;
        if (resid < opt.tol * std::max(1.0, r)) {
            res.psi = std::move(x);
            return res;
        }
    }
    fail(ErrorKind::SlowConvergence, "power iteration did not converge, last residual " + std::to_string(res.residual));
}

inline PowerResult spectral_radius(const OperatorDiscretization& G, std::vector<double> start = {},
                                   PowerOptions opt = {}) {
    return power_iteration([&G](const std::vector<double>& x) { return G.apply(x); }, G.nodes(), std::move(start), opt);
}

struct BracketStep {
    double lambda;
    double r;
};

struct LambdaResult {
    double lambda = 0.0;
    double r = 0.0;
    std::vector<double> psi;
    double r_lower_end = 0.0;  // r at -mu_hi + 1e-9
    double r_upper_end = 0.0;  // r at 2 beta_hi + 2 eps - beta_lo - mu_lo
    double lower_end = 0.0, upper_end = 0.0;
    bool monotone = true;
    std::vector<BracketStep> history;
};

struct OperatorOptions {
    std::size_t cells = 512;
    std::vector<double> epsilon_schedule{1e-2, 1e-3, 1e-4};
    double lambda_tol = 1e-8;
    double normalization_lower = 0.005;
    std::size_t gauss_nodes = 16;
    PowerOptions power{};
};

inline LambdaResult find_lambda(const ModelParameters& p, double eps, std::shared_ptr<const OperatorTables> tables,
                                const OperatorOptions& opt = {}, std::vector<double> warm = {}) {
    LambdaResult res;
    double lo = -p.mu_hi() + 1e-9;
    double hi = 2.0 * p.beta_m_hi() + 2.0 * eps - p.beta_m_lo() - p.mu_lo();
    res.lower_end = lo;
    res.upper_end = hi;
    auto radius = [&](double lam, std::vector<double>& psi) {
        OperatorDiscretization G(tables, lam, eps);
        auto pr = spectral_radius(G, psi, opt.power);
        psi = pr.psi;
        res.history.push_back({lam, pr.r});
        return pr.r;
    };
    std::vector<double> psi_lo = warm, psi_hi = warm;
    double r_lo = radius(lo, psi_lo);
    double r_hi = radius(hi, psi_hi);
    res.r_lower_end = r_lo;
    res.r_upper_end = r_hi;
    if (r_lo < 1.0 || r_hi > 1.0)
        fail(ErrorKind::BracketFailure, "r(lower)=" + std::to_string(r_lo) + ", r(upper)=" + std::to_string(r_hi));
    std::vector<double> psi = warm.empty() ? psi_lo : warm;
    double lam = lo, r = r_lo;
    for (int it = 0; it < 200; ++it) {
        lam = 0.5 * (lo + hi);
        r = radius(lam, psi);
        if (!(r < r_lo && r > r_hi)) res.monotone = false;
        if (std::abs(r - 1.0) < opt.lambda_tol || hi - lo < 1e-15 * (1.0 + std::abs(lam))) break;
        if (r > 1.0) {
            lo = lam;
            r_lo = r;
        } else {
            hi = lam;
            r_hi = r;
        }
    }
    res.lambda = lam;
    res.r = r;
    res.psi = std::move(psi);
    return res;
}

struct EigenPair {
    double lambda = 0.0;
    std::vector<double> edges;  // cell edges of U
    std::vector<double> U;      // cell averages, integral 1 on [normalization_lower, z0]
    std::vector<double> Psi;    // nodal, sup norm 1
    std::vector<std::pair<double, double>> epsilon_history;
    double closure_residual = 0.0;
    bool in_eigenvalue_bounds = false;
    std::vector<LambdaResult> solves;

    Profile profile() const { return Profile::cells(edges, U); }
};

// Normalizes cell averages to integral 1 over [lower, z0].
inline void normalize_cells(const Grid& g, std::vector<double>& U, double lower) {
    double s = 0.0;
    for (std::size_t c = 0; c < U.size(); ++c) {
        const double a = std::max(g.edges[c], lower), b = g.edges[c + 1];
        if (b > a) s += U[c] * (b - a);
    }
    if (!(s > 0.0)) fail(ErrorKind::NotConverged, "profile has no mass above the normalization cutoff");
    for (double& u : U) u /= s;
}

inline EigenPair continue_epsilon(const ModelParameters& p, const Grid& grid, const OperatorOptions& opt = {}) {
    if (opt.epsilon_schedule.size() < 2) fail(ErrorKind::DomainError, "epsilon schedule needs at least two values");
    FlowMap flow(p.b(), p.z0());
    auto tables = build_operator_tables(p, grid, flow, opt.gauss_nodes);
    EigenPair out;
    std::vector<double> warm;
    for (double eps : opt.epsilon_schedule) {
        auto lr = find_lambda(p, eps, tables, opt, warm);
        warm = lr.psi;
        out.epsilon_history.emplace_back(eps, lr.lambda);
        out.solves.push_back(std::move(lr));
    }
    const auto& h = out.epsilon_history;
    for (std::size_t k = 2; k < h.size(); ++k) {
        const double d1 = std::abs(h[k - 1].second - h[k - 2].second), d2 = std::abs(h[k].second - h[k - 1].second);
        if (!(d2 < d1) && d2 > 1e-12) fail(ErrorKind::NonCauchy, "lambda_eps does not settle as eps decreases");
    }
    // Linear extrapolation to eps = 0 from the two smallest values.
    const std::size_t n = h.size();
    const double ea = h[n - 2].first, eb = h[n - 1].first;
    const double wa = -eb / (ea - eb), wb = ea / (ea - eb);
    out.lambda = wa * h[n - 2].second + wb * h[n - 1].second;
    const auto& pa = out.solves[n - 2].psi;
    const auto& pb = out.solves[n - 1].psi;
    out.Psi.resize(pa.size());
    double mx = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        out.Psi[i] = std::max(0.0, wa * pa[i] + wb * pb[i]);
        mx = std::max(mx, out.Psi[i]);
    }
    for (double& v : out.Psi) v /= mx;

    OperatorDiscretization G0(tables, out.lambda, 0.0);
    const auto M = G0.cell_masses(G0.cell_values(out.Psi));
    const auto back = G0.apply_kernel(M);
    double res = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) res = std::max(res, std::abs(back[i] - out.Psi[i]));
    out.closure_residual = res;

    out.edges = grid.edges;
    out.U.resize(M.size());
    for (std::size_t c = 0; c < M.size(); ++c) out.U[c] = M[c] / grid.width(c);
    normalize_cells(grid, out.U, opt.normalization_lower);
    out.in_eigenvalue_bounds = out.lambda >= p.lambda_lower() && out.lambda <= p.lambda_upper();
    return out;
}

inline EigenPair solve_operator(const ModelParameters& p, const OperatorOptions& opt = {}) {
    return continue_epsilon(p, graded_grid(p.z0(), opt.cells, p.m()), opt);
}

struct TxiResult {
    double xi = 0.0;
    double r = 0.0;
    double norm = 0.0;             // induced norm on cell masses (weighted L1)
    double bound = 0.0;            // 2 beta_hi / (xi + beta_lo + mu_lo)
    double norm_bound = 0.0;       // 2 beta_hi / (xi + min over z of beta_m + mu)
    double min_entry = 0.0;
};

// T_xi in cell-mass variables: M_xi o K with eps = 0.
inline TxiResult t_xi_radius(const ModelParameters& p, double xi, const Grid& grid, std::size_t nodes = 16) {
    if (!(xi > -(p.beta_m_lo() + p.mu_lo()))) fail(ErrorKind::DomainError, "t_xi_radius needs xi > -(beta_lo + mu_lo)");
    FlowMap flow(p.b(), p.z0());
    auto tables = build_operator_tables(p, grid, flow, nodes);
    OperatorDiscretization G(tables, xi, 0.0);
    const std::size_t J = grid.cells();
    Eigen::MatrixXd T(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J));
    parallel_for(J, [&](std::size_t d) {
        std::vector<double> S(J + 1);
        for (std::size_t i = 0; i <= J; ++i) S[i] = tables->K0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
        const auto col = G.cell_masses(G.cell_values(S));
        for (std::size_t c = 0; c < J; ++c) T(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) = col[c];
    }, 8);
    TxiResult res;
    res.xi = xi;
    res.min_entry = T.minCoeff();
    res.norm = T.colwise().sum().maxCoeff();
    res.bound = 2.0 * p.beta_m_hi() / (xi + p.beta_m_lo() + p.mu_lo());
    double min_loss = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < J; ++c) min_loss = std::min(min_loss, tables->beta_m[c] + p.mu()(grid.mid(c)));
    res.norm_bound = 2.0 * p.beta_m_hi() / (xi + min_loss);
    auto pr = power_iteration(
        [&T](const std::vector<double>& x) {
            Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
            Eigen::VectorXd y = T * xv;
            return std::vector<double>(y.data(), y.data() + y.size());
        },
        J);
    res.r = pr.r;
    return res;
}

struct DominanceReport {
    double lambda_d = 0.0;
    double imag_part = 0.0;
    double next_real = 0.0;  // largest real part among the remaining eigenvalues
    double gap = 0.0;
    double threshold = 0.0;
    double min_component_ratio = 0.0;  // min / max of the dominant eigenvector
    std::vector<double> eigenvector;
    std::vector<std::pair<double, double>> spectrum;  // (Re, Im), sorted by Re descending
    Grid grid;
};

inline DominanceReport spectrum_dominance_check(const ModelParameters& p, const Grid& grid) {
    const FiniteVolumeOperator fv = build_fv_operator(p, grid);
    const Eigen::MatrixXd A = fv.generator();
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, true);
    if (es.info() != Eigen::Success) fail(ErrorKind::NotConverged, "dense eigensolver failed");
    const auto& ev = es.eigenvalues();
    const Eigen::Index n = ev.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
        return ev(a).imag() > ev(b).imag();
    });
    DominanceReport rep;
    rep.grid = grid;
    for (auto i : order) rep.spectrum.emplace_back(ev(i).real(), ev(i).imag());
    const Eigen::Index top = order[0];
    rep.lambda_d = ev(top).real();
    rep.imag_part = ev(top).imag();
    rep.next_real = n > 1 ? ev(order[1]).real() : -std::numeric_limits<double>::infinity();
    rep.gap = rep.lambda_d - rep.next_real;
    rep.threshold = 1e-3 * (p.beta_m_hi() + p.mu_hi());
    if (!(rep.gap > rep.threshold) || std::abs(rep.imag_part) > 1e-10 * (1.0 + std::abs(rep.lambda_d)))
        fail(ErrorKind::DegenerateDominance,
             "leading eigenvalues within " + std::to_string(rep.gap) + " of each other");
    const Eigen::VectorXcd v = es.eigenvectors().col(top);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const std::complex<double> pivot = v(imax);
    rep.eigenvector.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rep.eigenvector[static_cast<std::size_t>(i)] = (v(i) / pivot).real();
    const double mx = *std::max_element(rep.eigenvector.begin(), rep.eigenvector.end());
    const double mn = *std::min_element(rep.eigenvector.begin(), rep.eigenvector.end());
    rep.min_component_ratio = mn / mx;
    return rep;
}

}  // namespace plasmid
