#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mimik/conditional.hpp"
#include "mimik/generator.hpp"

namespace mimik {

/// Row-stochastic transition probabilities P(t).
struct StochasticKernel {
    Eigen::Index dim = 0;
    Eigen::MatrixXd probs;
    double t = 0.0;
};

/// Joint pmf over a tensor product of grids, flattened row-major with axis 0
/// slowest, together with the starting indices.
struct JointDistribution {
    std::vector<StateGrid> axes;
    Eigen::VectorXd pmf;
    std::vector<Eigen::Index> init;

    Eigen::Index size() const { return pmf.size(); }
};

/// Evolve a distribution by e^{t Q^T} via uniformization. The Poisson series
/// is truncated once its tail is below tol (total-variation error <= tol) and
/// the result is clamped/renormalized.
Eigen::VectorXd expm_apply(const Generator& Q, const Eigen::VectorXd& v, double t, double tol = 1e-10);

/// Full kernel e^{tQ}, each row computed by uniformization from a basis start.
StochasticKernel transition_kernel(const Generator& Q, double t, double tol = 1e-10);

/// Dense scaling-and-squaring exponential, kept as an independent cross-check
/// for small systems.
Eigen::MatrixXd dense_expm(const Generator& Q, double t);

StochasticKernel joint_kernel_direct(const Generator& joint, double t, double tol = 1e-10);

/// Exact kernel of the assembled conditional generator together with the
/// factorized product-measure representation (inner kernel frozen at the
/// starting outer state times the outer kernel) and their entrywise gap.
/// The factorization is exact only when the pieces commute, so the gap is
/// disclosed rather than assumed zero.
struct ConditionalKernelResult {
    StochasticKernel exact;
    Eigen::MatrixXd factorized;
    double deviation = 0.0;
};

ConditionalKernelResult joint_kernel_conditional(const ConditionalFamily& family, double t,
                                                 double tol = 1e-10);

/// Cumulative tensor F(i,j,...) = sum over the lower orthant of the pmf.
Eigen::VectorXd distribution_function(const JointDistribution& dist);

/// Axis sums, one 1-D distribution per axis.
std::vector<Eigen::VectorXd> marginals(const JointDistribution& dist);

/// delta-start joint distribution evolved to horizon t.
JointDistribution evolve_joint(const Generator& joint, const std::vector<StateGrid>& axes,
                               const std::vector<Eigen::Index>& init, double t, double tol = 1e-10);

// Small moment helpers used by diagnostics and tests.
std::pair<double, double> pmf_mean_var(const StateGrid& grid, const Eigen::VectorXd& pmf);

struct JointMoments {
    double mean_x = 0.0, mean_y = 0.0;
    double var_x = 0.0, var_y = 0.0;
    double cov = 0.0;
    double corr = 0.0;
};
JointMoments joint_moments(const JointDistribution& dist);

}  // namespace mimik
