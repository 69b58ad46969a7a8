#include "mimik/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mimik {

namespace {
constexpr double kRhoMargin = 1e-9;

double clamp_rho(double r) {
    return std::clamp(r, -1.0 + kRhoMargin, 1.0 - kRhoMargin);
}
}  // namespace

RhoField RhoField::constant(Eigen::Index n1, Eigen::Index n2, double rho) {
    RhoField f;
    f.values = Eigen::MatrixXd::Constant(n1, n2, clamp_rho(rho));
    return f;
}

RhoField RhoField::from_function(const StateGrid& gx, const StateGrid& gy,
                                 const std::function<double(double, double)>& fn) {
    RhoField f;
    f.values.resize(static_cast<Eigen::Index>(gx.m), static_cast<Eigen::Index>(gy.m));
    for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
            f.values(i, j) = clamp_rho(fn(gx.points[static_cast<std::size_t>(i)],
                                          gy.points[static_cast<std::size_t>(j)]));
        }
    }
    return f;
}

Eigen::MatrixXd kron_prod(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const auto rows = A.rows() * B.rows();
    const auto cols = A.cols() * B.cols();
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > kMaxJointEntries) {
        throw std::invalid_argument("kron_prod: dense result of " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + " exceeds the size guard");
    }
    Eigen::MatrixXd K(rows, cols);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return K;
}

SpMat kron_prod(const SpMat& A, const SpMat& B) {
    const std::size_t nnz = static_cast<std::size_t>(A.nonZeros()) * static_cast<std::size_t>(B.nonZeros());
    if (nnz > kMaxJointEntries) {
        throw std::invalid_argument("kron_prod: result with " + std::to_string(nnz) +
                                    " nonzeros exceeds the size guard");
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nnz);
    for (Eigen::Index ia = 0; ia < A.outerSize(); ++ia) {
        for (SpMat::InnerIterator a(A, ia); a; ++a) {
            for (Eigen::Index ib = 0; ib < B.outerSize(); ++ib) {
                for (SpMat::InnerIterator b(B, ib); b; ++b) {
                    trip.emplace_back(a.row() * B.rows() + b.row(),
                                      a.col() * B.cols() + b.col(),
                                      a.value() * b.value());
                }
            }
        }
    }
    SpMat K(A.rows() * B.rows(), A.cols() * B.cols());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

SpMat kron_sum(const SpMat& A, const SpMat& B) {
    if (A.rows() != A.cols() || B.rows() != B.cols()) {
        throw std::invalid_argument("kron_sum: both operands must be square");
    }
    SpMat IA(A.rows(), A.rows());
    IA.setIdentity();
    SpMat IB(B.rows(), B.rows());
    IB.setIdentity();
    SpMat K = kron_prod(A, IB);
    K += kron_prod(IA, B);
    return K;
}

Generator assemble_independent(const std::vector<Generator>& gens) {
    if (gens.size() < 2 || gens.size() > 4) {
        throw std::invalid_argument("assemble_independent: need 2 to 4 marginal generators, got " +
                                    std::to_string(gens.size()));
    }
    std::size_t total = 1;
    for (const auto& g : gens) {
        total *= static_cast<std::size_t>(g.dim);
        if (total > kMaxJointEntries) {
            throw std::invalid_argument("assemble_independent: joint space exceeds the size guard");
        }
    }

    Generator out = gens[0];
    for (std::size_t k = 1; k < gens.size(); ++k) {
        const auto& g = gens[k];
        SpMat joint = kron_sum(out.rates, g.rates);
        std::vector<Eigen::Index> abs_rows;
        abs_rows.reserve(out.absorbing_rows.size() * g.absorbing_rows.size());
        for (Eigen::Index a : out.absorbing_rows) {
            for (Eigen::Index b : g.absorbing_rows) {
                abs_rows.push_back(a * g.dim + b);
            }
        }
        out.rates = std::move(joint);
        out.dim = out.rates.rows();
        out.absorbing_rows = std::move(abs_rows);
    }
    return out;
}

CorrelationOperator build_correlation_operator(const StateGrid& gx, const StateGrid& gy,
                                               const std::function<double(double)>& volX,
                                               const std::function<double(double)>& volY,
                                               const RhoField& rho) {
    const auto n1 = static_cast<Eigen::Index>(gx.m);
    const auto n2 = static_cast<Eigen::Index>(gy.m);
    if (rho.values.rows() != n1 || rho.values.cols() != n2) {
        throw std::invalid_argument("build_correlation_operator: rho field shape does not match the grid pair");
    }
    if (static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) > kMaxJointEntries) {
        throw std::invalid_argument("build_correlation_operator: joint space exceeds the size guard");
    }

    CorrelationOperator C;
    C.n1 = n1;
    C.n2 = n2;
    C.sign_pattern = Eigen::MatrixXi::Zero(n1, n2);

    const double h1 = gx.h, h2 = gy.h;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) * 7);

    auto z = [n2](Eigen::Index i, Eigen::Index j) { return i * n2 + j; };

    for (Eigen::Index i = 1; i + 1 < n1; ++i) {
        const double s1 = volX(gx.points[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 1; j + 1 < n2; ++j) {
            const double rij = clamp_rho(rho(i, j));
            if (rij == 0.0) continue;
            const double s2 = volY(gy.points[static_cast<std::size_t>(j)]);
            const double r = std::abs(rij) * s1 * s2 / (2.0 * h1 * h2);

            // driftless diagonal dominance: the debit may not exceed either
            // marginal diffusion half-rate
            const double capX = 0.5 * s1 * s1 / (h1 * h1);
            const double capY = 0.5 * s2 * s2 / (h2 * h2);
            if (r > capX + 1e-15 * capX || r > capY + 1e-15 * capY) {
                const double rho_adm = std::min(s1 * h2 / (s2 * h1), s2 * h1 / (s1 * h2));
                throw std::domain_error("build_correlation_operator: cross rate exceeds marginal diffusion at cell (" +
                                        std::to_string(i) + "," + std::to_string(j) +
                                        "); max admissible |rho| there is " + std::to_string(rho_adm));
            }

            C.sign_pattern(i, j) = rij > 0.0 ? 1 : -1;
            if (rij > 0.0) {
                trip.emplace_back(z(i, j), z(i + 1, j + 1), r);
                trip.emplace_back(z(i, j), z(i - 1, j - 1), r);
            } else {
                trip.emplace_back(z(i, j), z(i + 1, j - 1), r);
                trip.emplace_back(z(i, j), z(i - 1, j + 1), r);
            }
            trip.emplace_back(z(i, j), z(i + 1, j), -r);
            trip.emplace_back(z(i, j), z(i - 1, j), -r);
            trip.emplace_back(z(i, j), z(i, j + 1), -r);
            trip.emplace_back(z(i, j), z(i, j - 1), -r);
            trip.emplace_back(z(i, j), z(i, j), 2.0 * r);
        }
    }

    C.matrix.resize(n1 * n2, n1 * n2);
    C.matrix.setFromTriplets(trip.begin(), trip.end());
    return C;
}

Generator assemble_joint_direct(const Generator& A1, const Generator& A2, const CorrelationOperator& C) {
    if (C.n1 != A1.dim || C.n2 != A2.dim) {
        throw std::invalid_argument("assemble_joint_direct: operator dimensions do not conform");
    }
    Generator out = assemble_independent({A1, A2});
    SpMat G = out.rates + C.matrix;

    // Re-establish exact generator structure: clamp tolerable negative
    // off-diagonals, reject real violations, rebuild diagonals.
    const auto n2 = A2.dim;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(G.nonZeros()));
    for (Eigen::Index row = 0; row < G.rows(); ++row) {
        double scale = 0.0;
        for (SpMat::InnerIterator it(G, row); it; ++it) {
            scale = std::max(scale, std::abs(it.value()));
        }
        double off_sum = 0.0;
        for (SpMat::InnerIterator it(G, row); it; ++it) {
            if (it.col() == row) continue;
            double v = it.value();
            if (v < 0.0) {
                if (v < -1e-12 * std::max(1.0, scale)) {
                    throw std::domain_error(
                        "assemble_joint_direct: negative joint rate at cell (" +
                        std::to_string(row / n2) + "," + std::to_string(row % n2) + ") -> (" +
                        std::to_string(it.col() / n2) + "," + std::to_string(it.col() % n2) +
                        "): " + std::to_string(v) + "; the cross term exceeds a marginal rate");
                }
                v = 0.0;
            }
            if (v != 0.0) {
                trip.emplace_back(row, it.col(), v);
                off_sum += v;
            }
        }
        if (off_sum != 0.0) trip.emplace_back(row, row, -off_sum);
    }
    out.rates.setZero();
    out.rates.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace mimik
