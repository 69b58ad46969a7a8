#include "mimik/generator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mimik/io.hpp"

namespace mimik {

Generator build_generator_1d(const StateGrid& grid, const ModelSpec1D& model, DriftStencil stencil) {
    const auto m = static_cast<Eigen::Index>(grid.m);
    const double h = grid.h;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * static_cast<std::size_t>(m));

    for (Eigen::Index i = 1; i + 1 < m; ++i) {
        const double x = grid.points[static_cast<std::size_t>(i)];
        const double b = model.drift(x);
        const double s = model.vol(x);
        if (!(s > 0.0)) {
            throw std::domain_error("build_generator_1d [" + model.label + "]: vol(x) must be positive at x=" +
                                    std::to_string(x));
        }
        const double s2 = s * s;

        double up, down;
        if (std::abs(b) <= s2 / h) {
            up = 0.5 * (b / h + s2 / (h * h));
            down = 0.5 * (s2 / (h * h) - b / h);
        } else if (stencil == DriftStencil::upwind) {
            if (b > 0.0) {
                up = b / h + 0.5 * s2 / (h * h);
                down = 0.5 * s2 / (h * h);
            } else {
                up = 0.5 * s2 / (h * h);
                down = -b / h + 0.5 * s2 / (h * h);
            }
        } else {
            const double h_adm = s2 / std::abs(b);
            throw std::domain_error("build_generator_1d [" + model.label + "]: stencil positivity fails at x=" +
                                    std::to_string(x) + " (|b|=" + std::to_string(std::abs(b)) +
                                    " > sigma^2/h=" + std::to_string(s2 / h) +
                                    "); largest admissible h is " + std::to_string(h_adm));
        }

        trip.emplace_back(i, i + 1, up);
        trip.emplace_back(i, i - 1, down);
        trip.emplace_back(i, i, -(up + down));
    }

    Generator Q;
    Q.dim = m;
    Q.rates.resize(m, m);
    Q.rates.setFromTriplets(trip.begin(), trip.end());
    Q.absorbing_rows = {0, m - 1};
    return Q;
}

std::pair<double, double> instantaneous_moments(const Generator& Q, const StateGrid& grid, Eigen::Index i) {
    if (i <= 0 || i + 1 >= Q.dim) {
        throw std::invalid_argument("instantaneous_moments: index " + std::to_string(i) +
                                    " is not interior (dim=" + std::to_string(Q.dim) + ")");
    }
    const double xi = grid.points[static_cast<std::size_t>(i)];
    double mean = 0.0, var = 0.0;
    for (SpMat::InnerIterator it(Q.rates, i); it; ++it) {
        const double dx = grid.points[static_cast<std::size_t>(it.col())] - xi;
        mean += it.value() * dx;
        var += it.value() * dx * dx;
    }
    return {mean, var};
}

ValidationReport validate_generator(const Generator& Q) {
    ValidationReport rep;
    double max_abs_row = 0.0;
    for (Eigen::Index i = 0; i < Q.dim; ++i) {
        double row_sum = 0.0, row_scale = 0.0;
        for (SpMat::InnerIterator it(Q.rates, i); it; ++it) {
            row_sum += it.value();
            row_scale = std::max(row_scale, std::abs(it.value()));
            if (it.col() != i && it.value() < rep.most_negative_offdiag) {
                rep.most_negative_offdiag = it.value();
                rep.negative_offdiag_row = i;
            }
        }
        max_abs_row = std::max(max_abs_row, row_scale);
        const double residual = std::abs(row_sum);
        if (residual > rep.max_row_sum_residual) {
            rep.max_row_sum_residual = residual;
            rep.worst_row = i;
        }
    }

    for (Eigen::Index r : Q.absorbing_rows) {
        for (SpMat::InnerIterator it(Q.rates, r); it; ++it) {
            if (it.value() != 0.0) rep.boundary_rows_zero = false;
        }
    }

    const double row_tol = 1e-10 * std::max(1.0, max_abs_row);
    const bool rows_ok = rep.max_row_sum_residual <= row_tol;
    const bool offdiag_ok = rep.most_negative_offdiag >= -1e-12 * std::max(1.0, max_abs_row);
    rep.passed = rows_ok && offdiag_ok && rep.boundary_rows_zero;

    std::ostringstream os;
    os << (rep.passed ? "pass" : "fail") << ": max row-sum residual " << rep.max_row_sum_residual;
    if (rep.worst_row >= 0) os << " (row " << rep.worst_row << ")";
    os << ", most negative off-diagonal " << rep.most_negative_offdiag;
    if (!rep.boundary_rows_zero) os << ", boundary rows not absorbing";
    rep.summary = os.str();
    return rep;
}

void export_generator_csv(const Generator& Q, const std::string& path) {
    std::string body = "row,col,rate\n";
    for (Eigen::Index i = 0; i < Q.dim; ++i) {
        for (SpMat::InnerIterator it(Q.rates, i); it; ++it) {
            body += std::to_string(i);
            body += ',';
            body += std::to_string(it.col());
            body += ',';
            body += format_double(it.value());
            body += '\n';
        }
    }
    atomic_write(path, body);
}

}  // namespace mimik
