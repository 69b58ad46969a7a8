#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "mimik/generator.hpp"
#include "mimik/tensor_ops.hpp"

namespace mimik {

/// Mean/covariance with a leading block of `split` coordinates conditioned on
/// the rest.
struct GaussianPartition {
    Eigen::VectorXd mu;
    Eigen::MatrixXd Sigma;
    Eigen::Index split = 0;
};

/// Conditional law of the first block given x2: mean mu1 + S12 S22^-1 (x2 - mu2),
/// covariance the Schur complement S11 - S12 S22^-1 S21.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_condition(const GaussianPartition& p,
                                                               const Eigen::VectorXd& x2);

/// Residuals of the orthogonality lemma for y = x1 + C x2, C = -S12 S22^-1:
/// first ||cov(x2, y)||, second ||var(y) - Schur complement|| (Frobenius).
std::pair<double, double> orthogonality_check(const Eigen::MatrixXd& Sigma, Eigen::Index split);

/// How the conditional drift reads the conditioning state. `literal` keeps the
/// printed level-minus-rate form mu1 + rho (s1/s2) (y_j - mu2(y_j)); `increment`
/// keeps drift mu1 and instead attaches the correlated part of X's motion to
/// the outer chain's transitions at assembly (exact local covariation).
enum class ConditionalMode { literal, increment };

/// Inner 1-D generator A_{X|Y=y_j}: conditional variance s1^2 (1 - rho^2),
/// drift per mode.
Generator build_conditional_generator(const StateGrid& gx, const StateGrid& gy,
                                      const ModelSpec1D& modelX, const ModelSpec1D& modelY,
                                      const RhoField& rho, Eigen::Index j,
                                      ConditionalMode mode = ConditionalMode::increment);

/// Outer chain plus one inner generator per outer state. Also retains the
/// coefficient data needed to couple the two during assembly.
struct ConditionalFamily {
    StateGrid grid_inner;  // X axis (slow joint index)
    StateGrid grid_outer;  // conditioning axis (fast joint index)
    Generator outer;
    std::vector<Generator> inner;  // one per outer grid point
    ConditionalMode mode = ConditionalMode::increment;
    ModelSpec1D model_inner;
    ModelSpec1D model_outer;
    RhoField rho;  // indexed (inner, outer)
};

ConditionalFamily build_conditional_family(const StateGrid& gx, const StateGrid& gy,
                                           const ModelSpec1D& modelX, const ModelSpec1D& modelY,
                                           const RhoField& rho,
                                           ConditionalMode mode = ConditionalMode::increment);

/// Joint generator from the conditional decomposition. Outer moves carry the
/// outer generator's total rates; inner moves act within each outer state.
/// In increment mode part of each outer transition rides diagonally with a
/// simultaneous inner step and the inner variance is compensated so that all
/// five local moments match the direct cross-operator construction.
Generator assemble_joint_conditional(const ConditionalFamily& family);

/// Nested conditional chain for d = 3 (literal mode, constant correlation):
/// inner-most axis conditioned on the other two, middle on the last.
Generator assemble_conditional_chain_3d(const std::array<StateGrid, 3>& grids,
                                        const std::array<ModelSpec1D, 3>& models,
                                        const Eigen::Matrix3d& corr);

/// One triplet CSV per outer state plus an index manifest JSON.
void export_conditional_family(const ConditionalFamily& family, const std::string& dir);

}  // namespace mimik
