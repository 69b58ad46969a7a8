#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "mimik/grid.hpp"

namespace mimik {

/// Constant-coefficient setup for symbol diagnostics. The Fourier apparatus
/// assumes state-independent mu, sigma, rho.
struct SymbolSpec {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd rho;  // symmetric, unit diagonal
    Eigen::VectorXd h;
    double t = 1.0;
};

/// Discrete symbol of the 1-D scheme:
/// q(s) = -i mu sin(h s)/h + sigma^2 (cos(h s) - 1)/h^2.
std::complex<double> symbol_1d(const SymbolSpec& spec, double s);

/// Cross-derivative symbol, limit -rho s1 s2 sigma1 sigma2 as h -> 0.
double symbol_cross_2d(const SymbolSpec& spec, double s1, double s2);

/// exp(t(-i mu.s - s'Lambda s / 2)) with Lambda = diag(sigma) rho diag(sigma).
std::complex<double> continuous_cf(const SymbolSpec& spec, const Eigen::VectorXd& s);

/// Transition pmf row reconstructed from the symbol on the DFT frequency
/// lattice of the grid (exact for the periodic chain).
Eigen::VectorXd spectral_pmf_row(const SymbolSpec& spec, const StateGrid& grid, Eigen::Index from);

double spectral_kernel(const SymbolSpec& spec, const StateGrid& grid, Eigen::Index from, Eigen::Index to);

enum class RateMode { symbol, cross, kernel };

struct RateEstimate {
    std::vector<double> h_values;
    std::vector<double> errors;
    double slope = 0.0;       // log-log least squares
    bool monotone = false;    // errors strictly decreasing along the sweep
};

/// Error sweep over decreasing h. symbol: sup_s |e^{q_h(s)t} - phi(s)| on 61
/// probes in [-3,3]; cross: sup over the probe square of the symbol-limit gap;
/// kernel: density error at the starting state on [-domain, domain].
RateEstimate estimate_rate(const SymbolSpec& spec, const std::vector<double>& h_values, RateMode mode,
                           double domain_halfwidth = 8.0);

}  // namespace mimik
