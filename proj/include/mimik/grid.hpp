#pragma once

#include <cstddef>
#include <vector>

namespace mimik {

/// Uniform 1-D state grid. Immutable after construction; the first and last
/// points are the boundary states of the chain built on it.
struct StateGrid {
    std::vector<double> points;  // strictly increasing, uniform spacing
    double h = 0.0;              // spacing
    double lo = 0.0;
    double hi = 0.0;
    std::size_t m = 0;           // point count

    double operator[](std::size_t i) const { return points[i]; }
    bool is_boundary(std::size_t i) const { return i == 0 || i + 1 == m; }
};

// Per-axis size guard (joint spaces are guarded separately at assembly).
inline constexpr std::size_t kMaxGridPoints = 50000;

/// Dyadic grid: h = 2^-n on [-2^n, 2^n], m = 2^(2n+1) + 1 points.
StateGrid build_dyadic_grid(int n);

/// Uniform grid with m >= 3 points on [lo, hi].
StateGrid build_uniform_grid(double lo, double hi, std::size_t m);

/// Nearest-point projection onto the grid; ties resolve to the lower index,
/// values beyond [lo, hi] clamp to the boundary index.
std::size_t project(const StateGrid& grid, double x);

}  // namespace mimik
