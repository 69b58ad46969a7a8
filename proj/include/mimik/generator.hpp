#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "mimik/grid.hpp"
#include "mimik/model.hpp"

namespace mimik {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// CTMC rate matrix: nonnegative off-diagonals, zero row sums, absorbing
/// boundary rows identically zero. Immutable once built.
struct Generator {
    Eigen::Index dim = 0;
    SpMat rates;
    std::vector<Eigen::Index> absorbing_rows;

    double entry(Eigen::Index i, Eigen::Index j) const { return rates.coeff(i, j); }
};

struct ValidationReport {
    bool passed = false;
    double max_row_sum_residual = 0.0;
    Eigen::Index worst_row = -1;
    double most_negative_offdiag = 0.0;
    Eigen::Index negative_offdiag_row = -1;
    bool boundary_rows_zero = true;
    std::string summary;
};

/// First-derivative treatment when |b| > sigma^2/h at some node.
enum class DriftStencil {
    central,  // reject on positivity violation
    upwind    // one-sided first difference, moments exact to O(h)
};

/// 1-D approximated infinitesimal generator by local moment matching:
/// a(i,i+1) = (b/h + sigma^2/h^2)/2, a(i,i-1) = (sigma^2/h^2 - b/h)/2,
/// zero boundary rows.
Generator build_generator_1d(const StateGrid& grid, const ModelSpec1D& model,
                             DriftStencil stencil = DriftStencil::central);

/// Instantaneous mean and variance rates at an interior node:
/// sum_j a(i,j)(x_j - x_i)^z for z = 1, 2.
std::pair<double, double> instantaneous_moments(const Generator& Q, const StateGrid& grid,
                                                Eigen::Index i);

ValidationReport validate_generator(const Generator& Q);

/// Triplet (row, col, rate) CSV of the nonzero entries.
void export_generator_csv(const Generator& Q, const std::string& path);

}  // namespace mimik
