#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "mimik/generator.hpp"
#include "mimik/model.hpp"

namespace mimik {

/// Euler-Maruyama oracle configuration. Seeded per-path streams keep results
/// reproducible independent of scheduling.
struct SimConfig {
    int n_paths = 0;
    double dt = 0.0;
    double t_end = 0.0;
    std::uint64_t seed = 0;
    int d = 1;
    std::vector<ModelSpec1D> models;
    Eigen::MatrixXd rho;  // constant correlation matrix (d x d)
    std::function<double(double, double)> rho_fn;  // optional state-dependent rho, d = 2 only
    Eigen::VectorXd x0;
};

struct SampleSet {
    Eigen::MatrixXd terminal;        // n_paths x d
    Eigen::VectorXd covariation_xy;  // per-path binned covariation (joint CTMC runs)
    bool has_covariation = false;
};

SampleSet simulate_euler(const SimConfig& cfg);

/// Exact jump-chain sampling: exponential holding times at rate -Q_ii, jump
/// proportional to the off-diagonal rates, absorbing rows terminate motion.
SampleSet simulate_ctmc(const Generator& Q, const StateGrid& grid, double x0, double t_end,
                        int n_paths, std::uint64_t seed);

/// Joint-chain variant (d = 2) which optionally records the binned quadratic
/// covariation over t_end/100-wide time bins.
SampleSet simulate_ctmc_joint(const Generator& joint, const StateGrid& gx, const StateGrid& gy,
                              double x0, double y0, double t_end, int n_paths, std::uint64_t seed,
                              bool record_covariation = true);

/// Two-sided exact KS statistics (no p-values).
double ks_distance(std::vector<double> a, std::vector<double> b);
double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf);

/// Lattice-law KS: sup over grid points of |chain CDF - exact CDF|.
double ks_grid_cdf(const StateGrid& grid, const Eigen::VectorXd& pmf,
                   const std::function<double(double)>& cdf);

/// Mean realized covariation rate over [0, t_end] from a joint-chain run.
double covariation_estimate(const SampleSet& samples, double t_end);

void export_sampleset_csv(const SampleSet& samples, const std::string& path);

}  // namespace mimik
