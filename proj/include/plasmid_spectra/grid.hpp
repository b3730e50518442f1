#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "error.hpp"

namespace plasmid {

// Cell grid on [0, z0] with geometric clustering toward both ends.
struct Grid {
    std::vector<double> edges;  // J+1 values, edges.front() == 0, edges.back() == z0

    std::size_t cells() const { return edges.size() - 1; }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double mid(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    double z0() const { return edges.back(); }

    std::vector<double> mids() const {
        std::vector<double> out(cells());
        for (std::size_t i = 0; i < cells(); ++i) out[i] = mid(i);
        return out;
    }
    std::vector<double> widths() const {
        std::vector<double> out(cells());
        for (std::size_t i = 0; i < cells(); ++i) out[i] = width(i);
        return out;
    }
    // Index of the cell containing z (right-closed at z0).
    std::size_t locate(double z) const {
        auto it = std::upper_bound(edges.begin(), edges.end(), z);
        if (it == edges.begin()) return 0;
        std::size_t i = static_cast<std::size_t>(it - edges.begin()) - 1;
        return std::min(i, cells() - 1);
    }
    void check() const {
        if (edges.size() < 3) fail(ErrorKind::DomainError, "grid needs at least two cells");
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            if (!(edges[i + 1] > edges[i])) fail(ErrorKind::DomainError, "grid edges must be strictly increasing");
    }
};

struct GridOptions {
    double ratio = 1.15;          // growth factor of the geometric end zones
    double min_width_rel = 1e-8;  // smallest end cell as a fraction of z0
    double geometric_share = 0.2; // at most this fraction of cells per end zone
};

// J cells: geometric widths near 0 and z0, uniform in between; the edge
// nearest to `snap` (if inside (0, z0)) is moved onto it.
inline Grid graded_grid(double z0, std::size_t cells, double snap = -1.0, GridOptions opt = {}) {
    if (cells < 4) fail(ErrorKind::DomainError, "graded_grid: need at least 4 cells");
    const double r = opt.ratio;
    std::size_t n_geo = static_cast<std::size_t>(opt.geometric_share * static_cast<double>(cells));
    auto mid_width = [&](std::size_t ng) {
        const double geo = (1.0 - std::pow(r, -static_cast<double>(ng))) / (r - 1.0);
        return z0 / (static_cast<double>(cells - 2 * ng) + 2.0 * geo);
    };
    while (n_geo > 0 && mid_width(n_geo) * std::pow(r, -static_cast<double>(n_geo)) < opt.min_width_rel * z0) --n_geo;
    const double h = mid_width(n_geo);

    std::vector<double> widths;
    widths.reserve(cells);
    for (std::size_t k = n_geo; k >= 1; --k) widths.push_back(h * std::pow(r, -static_cast<double>(k)));
    for (std::size_t k = 0; k < cells - 2 * n_geo; ++k) widths.push_back(h);
    for (std::size_t k = 1; k <= n_geo; ++k) widths.push_back(h * std::pow(r, -static_cast<double>(k)));

    Grid g;
    g.edges.resize(cells + 1);
    g.edges[0] = 0.0;
    for (std::size_t i = 0; i < cells; ++i) g.edges[i + 1] = g.edges[i] + widths[i];
    // Place the upper end zone by distance to z0 so the tiny cells survive rounding.
    double s = 0.0;
    for (std::size_t k = 0; k < n_geo; ++k) {
        s += widths[cells - 1 - k];
        g.edges[cells - 1 - k] = z0 - s;
    }
    g.edges[cells] = z0;

    if (snap > 0.0 && snap < z0) {
        auto it = std::lower_bound(g.edges.begin(), g.edges.end(), snap);
        std::size_t k = static_cast<std::size_t>(it - g.edges.begin());
        if (k > 0 && (k == g.edges.size() || snap - g.edges[k - 1] < g.edges[k] - snap)) --k;
        if (k == 0) k = 1;
        if (k == cells) k = cells - 1;
        g.edges[k] = snap;
    }
    g.check();
    return g;
}

inline Grid uniform_grid(double z0, std::size_t cells) {
    Grid g;
    g.edges.resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) g.edges[i] = z0 * static_cast<double>(i) / static_cast<double>(cells);
    g.edges[cells] = z0;
    g.check();
    return g;
}

}  // namespace plasmid
