#include "mimik/conditional.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "mimik/io.hpp"

namespace mimik {

namespace {

void check_partition(const Eigen::MatrixXd& Sigma, Eigen::Index split) {
    if (Sigma.rows() != Sigma.cols()) {
        throw std::invalid_argument("gaussian partition: Sigma must be square");
    }
    if (split <= 0 || split >= Sigma.rows()) {
        throw std::invalid_argument("gaussian partition: split must cut Sigma into two nonempty blocks");
    }
    const double scale = Sigma.norm();
    if ((Sigma - Sigma.transpose()).norm() > 1e-12 * std::max(1.0, scale)) {
        throw std::invalid_argument("gaussian partition: Sigma is not symmetric");
    }
}

Eigen::MatrixXd invert_s22(const Eigen::MatrixXd& S22) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S22, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > smax * 1e-13)) {
        const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        throw std::domain_error("gaussian partition: Sigma22 is numerically singular (condition number " +
                                std::to_string(cond) + ")");
    }
    return S22.llt().solve(Eigen::MatrixXd::Identity(S22.rows(), S22.cols()));
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_condition(const GaussianPartition& p,
                                                               const Eigen::VectorXd& x2) {
    check_partition(p.Sigma, p.split);
    const Eigen::Index d1 = p.split;
    const Eigen::Index d2 = p.Sigma.rows() - d1;
    if (x2.size() != d2 || p.mu.size() != p.Sigma.rows()) {
        throw std::invalid_argument("gaussian_condition: block sizes do not conform");
    }

    const Eigen::MatrixXd S11 = p.Sigma.topLeftCorner(d1, d1);
    const Eigen::MatrixXd S12 = p.Sigma.topRightCorner(d1, d2);
    const Eigen::MatrixXd S21 = p.Sigma.bottomLeftCorner(d2, d1);
    const Eigen::MatrixXd S22inv = invert_s22(p.Sigma.bottomRightCorner(d2, d2));

    Eigen::VectorXd mu_bar = p.mu.head(d1) + S12 * S22inv * (x2 - p.mu.tail(d2));
    Eigen::MatrixXd sigma_bar = S11 - S12 * S22inv * S21;
    return {std::move(mu_bar), std::move(sigma_bar)};
}

std::pair<double, double> orthogonality_check(const Eigen::MatrixXd& Sigma, Eigen::Index split) {
    check_partition(Sigma, split);
    const Eigen::Index d1 = split;
    const Eigen::Index d2 = Sigma.rows() - d1;

    const Eigen::MatrixXd S11 = Sigma.topLeftCorner(d1, d1);
    const Eigen::MatrixXd S12 = Sigma.topRightCorner(d1, d2);
    const Eigen::MatrixXd S21 = Sigma.bottomLeftCorner(d2, d1);
    const Eigen::MatrixXd S22 = Sigma.bottomRightCorner(d2, d2);
    const Eigen::MatrixXd C = -S12 * invert_s22(S22);

    const double cov_residual = (S21 + S22 * C.transpose()).norm();
    const Eigen::MatrixXd var_y = S11 + C * S22 * C.transpose() + C * S21 + S12 * C.transpose();
    const Eigen::MatrixXd schur = S11 - S12 * invert_s22(S22) * S21;
    const double var_identity_residual = (var_y - schur).norm();
    return {cov_residual, var_identity_residual};
}

namespace {

struct CondCoeffs {
    double drift;
    double var;
};

CondCoeffs conditional_coeffs(const ModelSpec1D& modelX, const ModelSpec1D& modelY, double x, double y,
                              double rho, ConditionalMode mode) {
    const double s1 = modelX.vol(x);
    const double s2 = modelY.vol(y);
    if (!(s1 > 0.0 && s2 > 0.0)) {
        throw std::domain_error("build_conditional_generator: vols must be positive");
    }
    const double one_minus_r2 = 1.0 - rho * rho;
    if (one_minus_r2 < 1e-8) {
        throw std::domain_error("build_conditional_generator: |rho| -> 1 gives a degenerate conditional variance at x=" +
                                std::to_string(x) + ", y=" + std::to_string(y));
    }
    const double var = s1 * s1 * one_minus_r2;
    if (var < 1e-12) {
        throw std::domain_error("build_conditional_generator: conditional variance below 1e-12 at x=" +
                                std::to_string(x));
    }
    double drift = modelX.drift(x);
    if (mode == ConditionalMode::literal) {
        drift += rho * (s1 / s2) * (y - modelY.drift(y));
    }
    return {drift, var};
}

}  // namespace

Generator build_conditional_generator(const StateGrid& gx, const StateGrid& gy, const ModelSpec1D& modelX,
                                      const ModelSpec1D& modelY, const RhoField& rho, Eigen::Index j,
                                      ConditionalMode mode) {
    if (j < 0 || j >= static_cast<Eigen::Index>(gy.m)) {
        throw std::invalid_argument("build_conditional_generator: outer index out of range");
    }
    const auto m = static_cast<Eigen::Index>(gx.m);
    const double h = gx.h;
    const double y = gy.points[static_cast<std::size_t>(j)];

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * static_cast<std::size_t>(m));
    for (Eigen::Index i = 1; i + 1 < m; ++i) {
        const double x = gx.points[static_cast<std::size_t>(i)];
        const auto c = conditional_coeffs(modelX, modelY, x, y, rho(i, j), mode);
        if (std::abs(c.drift) > c.var / h) {
            throw std::domain_error("build_conditional_generator: conditional stencil positivity fails at x=" +
                                    std::to_string(x) + " (|b_cond|=" + std::to_string(std::abs(c.drift)) +
                                    " > sigma_cond^2/h=" + std::to_string(c.var / h) + ")");
        }
        const double up = 0.5 * (c.drift / h + c.var / (h * h));
        const double down = 0.5 * (c.var / (h * h) - c.drift / h);
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

ConditionalFamily build_conditional_family(const StateGrid& gx, const StateGrid& gy, const ModelSpec1D& modelX,
                                           const ModelSpec1D& modelY, const RhoField& rho, ConditionalMode mode) {
    if (rho.values.rows() != static_cast<Eigen::Index>(gx.m) ||
        rho.values.cols() != static_cast<Eigen::Index>(gy.m)) {
        throw std::invalid_argument("build_conditional_family: rho field shape does not match the grid pair");
    }
    ConditionalFamily fam;
    fam.grid_inner = gx;
    fam.grid_outer = gy;
    fam.mode = mode;
    fam.model_inner = modelX;
    fam.model_outer = modelY;
    fam.rho = rho;
    fam.outer = build_generator_1d(gy, modelY);
    fam.inner.reserve(gy.m);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(gy.m); ++j) {
        fam.inner.push_back(build_conditional_generator(gx, gy, modelX, modelY, rho, j, mode));
    }
    return fam;
}

Generator assemble_joint_conditional(const ConditionalFamily& family) {
    const auto n1 = static_cast<Eigen::Index>(family.grid_inner.m);
    const auto n2 = static_cast<Eigen::Index>(family.grid_outer.m);
    if (family.inner.size() != family.grid_outer.m) {
        throw std::invalid_argument("assemble_joint_conditional: inner map must cover every outer state");
    }
    if (static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) > kMaxJointEntries) {
        throw std::invalid_argument("assemble_joint_conditional: joint space exceeds the size guard");
    }

    auto z = [n2](Eigen::Index i, Eigen::Index j) { return i * n2 + j; };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) * 8);

    if (family.mode == ConditionalMode::literal) {
        // Pure generalized Kronecker sum: inner moves within each outer state,
        // outer moves independent of the inner index.
        for (Eigen::Index j = 0; j < n2; ++j) {
            const Generator& inner = family.inner[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < n1; ++i) {
                double diag = 0.0;
                for (SpMat::InnerIterator it(inner.rates, i); it; ++it) {
                    if (it.col() == i) continue;
                    trip.emplace_back(z(i, j), z(it.col(), j), it.value());
                    diag += it.value();
                }
                for (SpMat::InnerIterator it(family.outer.rates, j); it; ++it) {
                    if (it.col() == j) continue;
                    trip.emplace_back(z(i, j), z(i, it.col()), it.value());
                    diag += it.value();
                }
                if (diag != 0.0) trip.emplace_back(z(i, j), z(i, j), -diag);
            }
        }
    } else {
        // Increment mode: outer transitions carry the correlated inner step with
        // rate r = |rho| s1 s2 / (2 h1 h2); the inner variance is compensated by
        // the same r so every local moment matches the cross-operator assembly.
        const Generator marginal_inner = build_generator_1d(family.grid_inner, family.model_inner);
        const double h1 = family.grid_inner.h, h2 = family.grid_outer.h;

        for (Eigen::Index j = 0; j < n2; ++j) {
            const double y = family.grid_outer.points[static_cast<std::size_t>(j)];
            const bool outer_interior = j > 0 && j + 1 < n2;
            const double b_up = outer_interior ? family.outer.entry(j, j + 1) : 0.0;
            const double b_dn = outer_interior ? family.outer.entry(j, j - 1) : 0.0;

            for (Eigen::Index i = 0; i < n1; ++i) {
                const bool inner_interior = i > 0 && i + 1 < n1;
                const double a_up = inner_interior ? marginal_inner.entry(i, i + 1) : 0.0;
                const double a_dn = inner_interior ? marginal_inner.entry(i, i - 1) : 0.0;

                double r = 0.0;
                int sign = 0;
                if (inner_interior && outer_interior) {
                    const double rho_ij = family.rho(i, j);
                    if (rho_ij != 0.0) {
                        const double s1 = family.model_inner.vol(family.grid_inner.points[static_cast<std::size_t>(i)]);
                        const double s2 = family.model_outer.vol(y);
                        r = std::abs(rho_ij) * s1 * s2 / (2.0 * h1 * h2);
                        sign = rho_ij > 0.0 ? 1 : -1;
                        const double cap = std::min(std::min(a_up, a_dn), std::min(b_up, b_dn));
                        if (r > cap * (1.0 + 1e-12)) {
                            throw std::domain_error(
                                "assemble_joint_conditional: correlated step rate exceeds a marginal rate at cell (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
                        }
                        r = std::min(r, cap);
                    }
                }

                double diag = 0.0;
                auto add = [&](Eigen::Index zi, Eigen::Index zj, double v) {
                    if (v <= 0.0) return;
                    trip.emplace_back(z(i, j), z(zi, zj), v);
                    diag += v;
                };

                if (inner_interior) {
                    add(i + 1, j, a_up - r);
                    add(i - 1, j, a_dn - r);
                }
                if (outer_interior) {
                    add(i, j + 1, b_up - r);
                    add(i, j - 1, b_dn - r);
                }
                if (r > 0.0) {
                    if (sign > 0) {
                        add(i + 1, j + 1, r);
                        add(i - 1, j - 1, r);
                    } else {
                        add(i + 1, j - 1, r);
                        add(i - 1, j + 1, r);
                    }
                }
                if (diag != 0.0) trip.emplace_back(z(i, j), z(i, j), -diag);
            }
        }
    }

    Generator out;
    out.dim = n1 * n2;
    out.rates.resize(out.dim, out.dim);
    out.rates.setFromTriplets(trip.begin(), trip.end());
    out.absorbing_rows = {z(0, 0), z(0, n2 - 1), z(n1 - 1, 0), z(n1 - 1, n2 - 1)};
    return out;
}

Generator assemble_conditional_chain_3d(const std::array<StateGrid, 3>& grids,
                                        const std::array<ModelSpec1D, 3>& models,
                                        const Eigen::Matrix3d& corr) {
    const Eigen::Index n1 = static_cast<Eigen::Index>(grids[0].m);
    const Eigen::Index n2 = static_cast<Eigen::Index>(grids[1].m);
    const Eigen::Index n3 = static_cast<Eigen::Index>(grids[2].m);
    if (static_cast<std::size_t>(n1) * n2 * n3 > kMaxJointEntries) {
        throw std::invalid_argument("assemble_conditional_chain_3d: joint space exceeds the size guard");
    }

    auto z = [n2, n3](Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) {
        return (i1 * n2 + i2) * n3 + i3;
    };

    auto tridiag_rates = [](double drift, double var, double h, double& up, double& down) {
        if (std::abs(drift) > var / h) {
            throw std::domain_error("assemble_conditional_chain_3d: stencil positivity fails (|b_cond|=" +
                                    std::to_string(std::abs(drift)) + " > " + std::to_string(var / h) + ")");
        }
        up = 0.5 * (drift / h + var / (h * h));
        down = 0.5 * (var / (h * h) - drift / h);
    };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n1) * n2 * n3 * 7);

    for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
        const double x1 = grids[0].points[static_cast<std::size_t>(i1)];
        for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
            const double x2 = grids[1].points[static_cast<std::size_t>(i2)];
            for (Eigen::Index i3 = 0; i3 < n3; ++i3) {
                const double x3 = grids[2].points[static_cast<std::size_t>(i3)];
                const double s1 = models[0].vol(x1), s2 = models[1].vol(x2), s3 = models[2].vol(x3);

                Eigen::Matrix3d Sigma;
                Sigma << s1 * s1, corr(0, 1) * s1 * s2, corr(0, 2) * s1 * s3,
                         corr(0, 1) * s1 * s2, s2 * s2, corr(1, 2) * s2 * s3,
                         corr(0, 2) * s1 * s3, corr(1, 2) * s2 * s3, s3 * s3;

                double diag = 0.0;
                auto add = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c, double v) {
                    trip.emplace_back(z(i1, i2, i3), z(a, b, c), v);
                    diag += v;
                };

                // innermost axis conditioned on the other two (literal levels)
                if (i1 > 0 && i1 + 1 < n1) {
                    GaussianPartition p{Eigen::Vector3d(0.0, 0.0, 0.0), Sigma, 1};
                    Eigen::VectorXd lev(2);
                    lev << x2 - models[1].drift(x2), x3 - models[2].drift(x3);
                    auto [mu_bar, sig_bar] = gaussian_condition(p, lev);
                    double up, down;
                    tridiag_rates(models[0].drift(x1) + mu_bar(0), sig_bar(0, 0), grids[0].h, up, down);
                    add(i1 + 1, i2, i3, up);
                    add(i1 - 1, i2, i3, down);
                }
                // middle axis conditioned on the last
                if (i2 > 0 && i2 + 1 < n2) {
                    GaussianPartition p{Eigen::Vector2d(0.0, 0.0), Sigma.bottomRightCorner(2, 2), 1};
                    Eigen::VectorXd lev(1);
                    lev << x3 - models[2].drift(x3);
                    auto [mu_bar, sig_bar] = gaussian_condition(p, lev);
                    double up, down;
                    tridiag_rates(models[1].drift(x2) + mu_bar(0), sig_bar(0, 0), grids[1].h, up, down);
                    add(i1, i2 + 1, i3, up);
                    add(i1, i2 - 1, i3, down);
                }
                // outermost axis is marginal
                if (i3 > 0 && i3 + 1 < n3) {
                    double up, down;
                    tridiag_rates(models[2].drift(x3), s3 * s3, grids[2].h, up, down);
                    add(i1, i2, i3 + 1, up);
                    add(i1, i2, i3 - 1, down);
                }

                if (diag != 0.0) trip.emplace_back(z(i1, i2, i3), z(i1, i2, i3), -diag);
            }
        }
    }

    Generator out;
    out.dim = n1 * n2 * n3;
    out.rates.resize(out.dim, out.dim);
    out.rates.setFromTriplets(trip.begin(), trip.end());
    for (Eigen::Index a : {Eigen::Index{0}, n1 - 1}) {
        for (Eigen::Index b : {Eigen::Index{0}, n2 - 1}) {
            for (Eigen::Index c : {Eigen::Index{0}, n3 - 1}) {
                out.absorbing_rows.push_back(z(a, b, c));
            }
        }
    }
    return out;
}

void export_conditional_family(const ConditionalFamily& family, const std::string& dir) {
    std::string manifest = "{\n  \"outer_states\": [";
    for (std::size_t j = 0; j < family.grid_outer.m; ++j) {
        char name[64];
        std::snprintf(name, sizeof(name), "inner_%04zu.csv", j);
        export_generator_csv(family.inner[j], dir + "/" + name);
        manifest += (j ? ", " : "") + std::string("{\"y\": ") +
                    format_double(family.grid_outer.points[j]) + ", \"file\": \"" + name + "\"}";
    }
    export_generator_csv(family.outer, dir + "/outer.csv");
    manifest += "],\n  \"outer_file\": \"outer.csv\",\n  \"mode\": \"";
    manifest += (family.mode == ConditionalMode::literal ? "literal" : "increment");
    manifest += "\"\n}\n";
    atomic_write(dir + "/manifest.json", manifest);
}

}  // namespace mimik
