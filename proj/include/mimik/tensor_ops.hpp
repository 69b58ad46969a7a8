#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mimik/generator.hpp"

namespace mimik {

// Joint states are flattened row-major: z = i * n2 + j with X1 the slow index,
// matching kron(A, B) acting as A on X1 and B on X2.

/// Local correlation parameters rho(x_i, y_j) over a grid pair, clamped to
/// (-1, 1) by a 1e-9 margin (the axial debits must stay strictly dominated).
struct RhoField {
    Eigen::MatrixXd values;  // n1 x n2

    static RhoField constant(Eigen::Index n1, Eigen::Index n2, double rho);
    static RhoField from_function(const StateGrid& gx, const StateGrid& gy,
                                  const std::function<double(double, double)>& fn);

    double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

/// The cross-derivative rate perturbation A^(c): diagonal-move credits and
/// axial debits of magnitude rho*sigma1*sigma2/(2 h1 h2) per interior cell.
/// Rows sum to zero; it carries dependence only (zero marginal action).
struct CorrelationOperator {
    Eigen::Index n1 = 0, n2 = 0;
    SpMat matrix;                  // (n1*n2) x (n1*n2), signed
    Eigen::MatrixXi sign_pattern;  // sign of rho per cell (-1, 0, +1)
};

// Guard for joint state spaces.
inline constexpr std::size_t kMaxJointEntries = 50000000;

Eigen::MatrixXd kron_prod(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
SpMat kron_prod(const SpMat& A, const SpMat& B);

/// A (+) B = A x I + I x B for square A, B.
SpMat kron_sum(const SpMat& A, const SpMat& B);

/// Iterated Kronecker sum of 2..4 marginal generators.
Generator assemble_independent(const std::vector<Generator>& gens);

CorrelationOperator build_correlation_operator(const StateGrid& gx, const StateGrid& gy,
                                               const std::function<double(double)>& volX,
                                               const std::function<double(double)>& volY,
                                               const RhoField& rho);

/// A1 (+) A2 + C with full positivity validation of the resulting rates.
Generator assemble_joint_direct(const Generator& A1, const Generator& A2,
                                const CorrelationOperator& C);

}  // namespace mimik
