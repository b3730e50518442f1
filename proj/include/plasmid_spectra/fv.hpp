#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "grid.hpp"
#include "params.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace plasmid {

// Finite-volume pieces shared by the time stepper and the dense spectrum check.
struct FiniteVolumeOperator {
    Grid grid;
    std::vector<double> b_edge;    // b at edges, forced to 0 at both ends
    std::vector<double> beta_m;    // per cell
    std::vector<double> beta;      // untruncated, per cell
    std::vector<double> mu;        // per cell
    Eigen::MatrixXd frag;          // d u_i / dt contribution per unit u_j

    std::size_t cells() const { return grid.cells(); }

    // Dense generator: transport, loss and fragmentation.
    Eigen::MatrixXd generator() const {
        const std::size_t J = cells();
        Eigen::MatrixXd A = frag;
        for (std::size_t i = 0; i < J; ++i) {
            const double w = grid.width(i);
            const auto ii = static_cast<Eigen::Index>(i);
            A(ii, ii) -= b_edge[i + 1] / w + beta_m[i] + mu[i];
            if (i > 0) A(ii, ii - 1) += b_edge[i] / w;
        }
        return A;
    }
};

inline FiniteVolumeOperator build_fv_operator(const ModelParameters& p, Grid grid) {
    grid.check();
    FiniteVolumeOperator op;
    const std::size_t J = grid.cells();
    op.b_edge.resize(J + 1);
    for (std::size_t i = 0; i <= J; ++i) op.b_edge[i] = (i == 0 || i == J) ? 0.0 : std::max(0.0, p.b()(grid.edges[i]));
    op.beta_m.resize(J);
    op.beta.resize(J);
    op.mu.resize(J);
    for (std::size_t i = 0; i < J; ++i) {
        const double z = grid.mid(i);
        op.beta_m[i] = p.beta_m(z);
        op.beta[i] = p.beta()(z);
        op.mu[i] = p.mu()(z);
    }
    // Column j: kernel k(., y_j) at the cell midpoint y_j, averaged over each
    // cell i below y_j, then scaled so that sum_i K_ij dz_i = 2.
    op.frag = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J));
    const SegregationKernel& k = p.kernel();
    const GaussRule& g = gauss_legendre(6);
    parallel_for(J, [&](std::size_t j) {
        if (op.beta_m[j] <= 0.0) return;
        const double y = grid.mid(j);
        std::vector<double> col(j + 1, 0.0);
        double s = 0.0;
        for (std::size_t i = 0; i <= j; ++i) {
            const double lo = grid.edges[i], hi = std::min(grid.edges[i + 1], y);
            const double integral = integrate_gl([&](double z) { return k(z, y); }, lo, hi, g);
            col[i] = integral / grid.width(i);
            s += integral;
        }
        if (!(s > 0.0)) return;
        for (std::size_t i = 0; i <= j; ++i)
            op.frag(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                op.beta_m[j] * col[i] * 2.0 / s * grid.width(j);
    }, 8);
    op.grid = std::move(grid);
    return op;
}

}  // namespace plasmid
