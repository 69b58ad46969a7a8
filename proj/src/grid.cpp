#include "mimik/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mimik {

namespace {

StateGrid make_grid(double lo, double hi, std::size_t m) {
    StateGrid g;
    g.m = m;
    g.lo = lo;
    g.hi = hi;
    g.h = (hi - lo) / static_cast<double>(m - 1);
    g.points.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        g.points[i] = lo + static_cast<double>(i) * g.h;
    }
    g.points.back() = hi;  // kill accumulated rounding at the top end
    return g;
}

}  // namespace

StateGrid build_dyadic_grid(int n) {
    if (n < 1 || n > 8) {
        const double m_would_be = (n >= 1 && n < 31) ? std::ldexp(1.0, 2 * n + 1) + 1.0 : -1.0;
        throw std::invalid_argument(
            "build_dyadic_grid: n must be in [1, 8], got n=" + std::to_string(n) +
            " (would give m=" + (m_would_be > 0 ? std::to_string(static_cast<long long>(m_would_be)) : std::string("overflow")) + ")");
    }
    const double half_width = std::ldexp(1.0, n);              // 2^n
    const std::size_t m = (std::size_t{1} << (2 * n + 1)) + 1;  // 2^(2n+1) + 1
    return make_grid(-half_width, half_width, m);
}

StateGrid build_uniform_grid(double lo, double hi, std::size_t m) {
    if (!(lo < hi)) {
        throw std::invalid_argument("build_uniform_grid: requires lo < hi, got lo=" +
                                    std::to_string(lo) + ", hi=" + std::to_string(hi));
    }
    if (m < 3) {
        throw std::invalid_argument("build_uniform_grid: need m >= 3 points, got m=" + std::to_string(m));
    }
    if (m > kMaxGridPoints) {
        throw std::invalid_argument("build_uniform_grid: m=" + std::to_string(m) +
                                    " exceeds the per-axis limit of " + std::to_string(kMaxGridPoints));
    }
    return make_grid(lo, hi, m);
}

std::size_t project(const StateGrid& grid, double x) {
    const double q = (x - grid.lo) / grid.h;
    // ceil(q - 1/2) is the nearest index with midpoint ties going down
    const double idx = std::ceil(q - 0.5);
    if (idx <= 0.0) return 0;
    if (idx >= static_cast<double>(grid.m - 1)) return grid.m - 1;
    return static_cast<std::size_t>(idx);
}

}  // namespace mimik
