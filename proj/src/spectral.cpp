#include "mimik/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace mimik {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

std::complex<double> symbol_1d(const SymbolSpec& spec, double s) {
    const double mu = spec.mu(0), sg = spec.sigma(0), h = spec.h(0);
    return -kI * mu * std::sin(h * s) / h + sg * sg * (std::cos(h * s) - 1.0) / (h * h);
}

double symbol_cross_2d(const SymbolSpec& spec, double s1, double s2) {
    const double h1 = spec.h(0), h2 = spec.h(1);
    const double r = spec.rho(0, 1);
    return r * spec.sigma(0) * spec.sigma(1) *
           (std::cos(h1 * s1 + h2 * s2) - std::cos(h1 * s1) - std::cos(h2 * s2) + 1.0) / (h1 * h2);
}

std::complex<double> continuous_cf(const SymbolSpec& spec, const Eigen::VectorXd& s) {
    const Eigen::MatrixXd Lambda =
        spec.sigma.asDiagonal() * spec.rho * spec.sigma.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Lambda);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
        throw std::domain_error("continuous_cf: diag(sigma) rho diag(sigma) is not positive semidefinite");
    }
    const double quad = s.dot(Lambda * s);
    return std::exp(spec.t * (-kI * spec.mu.dot(s) - 0.5 * quad));
}

Eigen::VectorXd spectral_pmf_row(const SymbolSpec& spec, const StateGrid& grid, Eigen::Index from) {
    const auto m = static_cast<Eigen::Index>(grid.m);
    if (m < 8) throw std::invalid_argument("spectral_pmf_row: grid too coarse for the frequency lattice");
    if (std::abs(grid.h - spec.h(0)) > 1e-12 * grid.h) {
        throw std::invalid_argument("spectral_pmf_row: grid spacing does not match the symbol spec");
    }

    // characteristic sequence on the DFT lattice s_k = 2 pi k / (m h)
    std::vector<std::complex<double>> cf(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
        const double s = 2.0 * M_PI * static_cast<double>(k) / (static_cast<double>(m) * grid.h);
        cf[static_cast<std::size_t>(k)] = std::exp(spec.t * symbol_1d(spec, s));
    }

    Eigen::VectorXd row(m);
    for (Eigen::Index to = 0; to < m; ++to) {
        const double delta = grid.points[static_cast<std::size_t>(to)] - grid.points[static_cast<std::size_t>(from)];
        std::complex<double> acc{0.0, 0.0};
        for (Eigen::Index k = 0; k < m; ++k) {
            const double s = 2.0 * M_PI * static_cast<double>(k) / (static_cast<double>(m) * grid.h);
            acc += cf[static_cast<std::size_t>(k)] * std::exp(kI * s * delta);
        }
        row(to) = acc.real() / static_cast<double>(m);
    }
    return row;
}

double spectral_kernel(const SymbolSpec& spec, const StateGrid& grid, Eigen::Index from, Eigen::Index to) {
    return spectral_pmf_row(spec, grid, from)(to);
}

RateEstimate estimate_rate(const SymbolSpec& spec, const std::vector<double>& h_values, RateMode mode,
                           double domain_halfwidth) {
    if (h_values.size() < 3) throw std::invalid_argument("estimate_rate: need at least 3 h values");
    for (std::size_t i = 1; i < h_values.size(); ++i) {
        if (!(h_values[i] < h_values[i - 1])) {
            throw std::invalid_argument("estimate_rate: h values must decrease");
        }
    }

    RateEstimate est;
    est.h_values = h_values;
    est.errors.reserve(h_values.size());

    for (double h : h_values) {
        SymbolSpec sp = spec;
        sp.h = Eigen::VectorXd::Constant(spec.h.size(), h);
        double eps = 0.0;

        if (mode == RateMode::symbol) {
            for (int k = 0; k <= 60; ++k) {
                const double s = -3.0 + 6.0 * k / 60.0;
                Eigen::VectorXd sv(1);
                sv << s;
                eps = std::max(eps, std::abs(std::exp(sp.t * symbol_1d(sp, s)) - continuous_cf(sp, sv)));
            }
        } else if (mode == RateMode::cross) {
            const double limit_coef = sp.rho(0, 1) * sp.sigma(0) * sp.sigma(1);
            for (int a = 0; a <= 20; ++a) {
                for (int b = 0; b <= 20; ++b) {
                    const double s1 = -3.0 + 6.0 * a / 20.0;
                    const double s2 = -3.0 + 6.0 * b / 20.0;
                    eps = std::max(eps, std::abs(symbol_cross_2d(sp, s1, s2) - (-limit_coef * s1 * s2)));
                }
            }
        } else {
            // density at the starting state: chain pmf / h against the exact
            // Gaussian displacement density
            const auto m_raw = static_cast<std::size_t>(std::lround(2.0 * domain_halfwidth / h)) + 1;
            const std::size_t m = (m_raw % 2 == 0) ? m_raw + 1 : m_raw;  // odd, center on 0
            const StateGrid grid = build_uniform_grid(-domain_halfwidth, domain_halfwidth, m);
            const Eigen::Index c = static_cast<Eigen::Index>(m / 2);
            const double p_chain = spectral_kernel(sp, grid, c, c) / h;
            const double mu = sp.mu(0), sg = sp.sigma(0);
            const double var = sg * sg * sp.t;
            const double p_exact = std::exp(-mu * mu * sp.t * sp.t / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
            eps = std::abs(p_chain - p_exact);
        }
        est.errors.push_back(eps);
    }

    est.monotone = true;
    for (std::size_t i = 1; i < est.errors.size(); ++i) {
        if (!(est.errors[i] < est.errors[i - 1])) est.monotone = false;
    }

    // least squares slope of log eps against log h
    const auto n = static_cast<double>(h_values.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < h_values.size(); ++i) {
        const double lx = std::log(h_values[i]);
        const double ly = std::log(std::max(est.errors[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    est.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return est;
}

}  // namespace mimik
