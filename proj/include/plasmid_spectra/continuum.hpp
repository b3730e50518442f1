#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "discrete.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "pde.hpp"

namespace plasmid {

// Mass of a cell-average density on each copy-number bin: bin i >= 1 covers
// ((i - 1/2) h, (i + 1/2) h], bin 1 starts at 0 and bin N ends at z0.
inline std::vector<double> project_to_bins(const Grid& g, const std::vector<double>& u, double h, std::size_t N) {
    std::vector<double> out(N + 1, 0.0);
    for (std::size_t i = 1; i <= N; ++i) {
        const double lo = i == 1 ? 0.0 : (static_cast<double>(i) - 0.5) * h;
        const double hi = i == N ? g.z0() : (static_cast<double>(i) + 0.5) * h;
        std::size_t c = g.locate(lo);
        for (; c < g.cells() && g.edges[c] < hi; ++c) {
            const double a = std::max(lo, g.edges[c]), b = std::min(hi, g.edges[c + 1]);
            if (b > a) out[i] += u[c] * (b - a);
        }
    }
    return out;
}

// L1 distance between the histogram and the binned continuum density, plus
// the zero-plasmid compartments.
inline double continuum_limit_error(const DiscreteState& d, const PdeState& p, const Grid& g) {
    if (std::abs(d.t - p.t) > 1e-9 * (1.0 + std::abs(d.t))) fail(ErrorKind::GridMismatch, "runs end at different times");
    if (p.u.size() != g.cells()) fail(ErrorKind::GridMismatch, "pde state does not match the grid");
    if ((static_cast<double>(d.N()) + 1.0) * d.h < g.z0()) fail(ErrorKind::GridMismatch, "bins do not cover z0");
    const double scale = std::exp(p.log_scale);
    std::vector<double> u = p.u;
    for (double& x : u) x *= scale;
    const auto bins = project_to_bins(g, u, d.h, d.N());
    double err = std::abs(d.c[0] - p.v0 * scale);
    for (std::size_t i = 1; i <= d.N(); ++i) err += std::abs(d.c[i] - bins[i]);
    return err;
}

}  // namespace plasmid
