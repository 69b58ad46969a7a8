#pragma once

#include <functional>
#include <string>

namespace mimik {

/// Time-homogeneous scalar diffusion coefficients dX = drift(X) dt + vol(X) dW.
/// vol must be positive at every grid point a generator is built on.
struct ModelSpec1D {
    std::function<double(double)> drift;
    std::function<double(double)> vol;
    std::string label;
};

// Named presets used across tests and the CLI.

inline ModelSpec1D make_bm(double sigma = 1.0) {
    return {[](double) { return 0.0; }, [sigma](double) { return sigma; }, "bm"};
}

inline ModelSpec1D make_ou(double kappa = 1.0, double sigma = 1.4142135623730951) {
    return {[kappa](double x) { return -kappa * x; }, [sigma](double) { return sigma; }, "ou"};
}

/// Geometric Brownian motion expressed on a log-price grid, where the
/// coefficients are constant: drift mu - sigma^2/2, volatility sigma.
inline ModelSpec1D make_gbm_log(double mu = 0.05, double sigma = 0.2) {
    const double b = mu - 0.5 * sigma * sigma;
    return {[b](double) { return b; }, [sigma](double) { return sigma; }, "gbm"};
}

inline ModelSpec1D make_cir(double kappa = 1.0, double theta = 1.0, double sigma = 0.5) {
    return {[kappa, theta](double x) { return kappa * (theta - x); },
            [sigma](double x) { return sigma * std::sqrt(x > 0.0 ? x : 0.0); },
            "cir"};
}

}  // namespace mimik
