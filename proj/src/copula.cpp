#include "mimik/copula.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mimik/stats.hpp"

namespace mimik {

namespace {

void require_monotone(const Eigen::VectorXd& cdf, const char* which) {
    for (Eigen::Index i = 1; i < cdf.size(); ++i) {
        if (cdf(i) < cdf(i - 1) - 1e-12) {
            throw std::invalid_argument(std::string("empirical_copula: ") + which +
                                        " marginal CDF is not monotone at index " + std::to_string(i));
        }
    }
}

}  // namespace

CopulaSurface empirical_copula(const Eigen::MatrixXd& F, const Eigen::VectorXd& marginal_cdf_x,
                               const Eigen::VectorXd& marginal_cdf_y) {
    const Eigen::Index n1 = F.rows(), n2 = F.cols();
    if (marginal_cdf_x.size() != n1 || marginal_cdf_y.size() != n2) {
        throw std::invalid_argument("empirical_copula: marginal sizes do not match the cumulative tensor");
    }
    require_monotone(marginal_cdf_x, "x");
    require_monotone(marginal_cdf_y, "y");

    CopulaSurface s;
    s.u_axis.resize(n1 + 1);
    s.v_axis.resize(n2 + 1);
    s.u_axis(0) = 0.0;
    s.v_axis(0) = 0.0;
    s.u_axis.tail(n1) = marginal_cdf_x;
    s.v_axis.tail(n2) = marginal_cdf_y;
    s.u_axis(n1) = 1.0;
    s.v_axis(n2) = 1.0;

    s.values = Eigen::MatrixXd::Zero(n1 + 1, n2 + 1);
    s.values.block(1, 1, n1, n2) = F;
    return s;
}

CopulaSurface empirical_copula(const JointDistribution& dist) {
    if (dist.axes.size() != 2) throw std::invalid_argument("empirical_copula: expected a bivariate distribution");
    const auto n1 = static_cast<Eigen::Index>(dist.axes[0].m);
    const auto n2 = static_cast<Eigen::Index>(dist.axes[1].m);

    const Eigen::VectorXd F_flat = distribution_function(dist);
    Eigen::MatrixXd F(n1, n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) F(i, j) = F_flat(i * n2 + j);
    }
    const auto mrg = marginals(dist);
    Eigen::VectorXd F1(n1), F2(n2);
    double c = 0.0;
    for (Eigen::Index i = 0; i < n1; ++i) F1(i) = (c += mrg[0](i));
    c = 0.0;
    for (Eigen::Index j = 0; j < n2; ++j) F2(j) = (c += mrg[1](j));
    return empirical_copula(F, F1, F2);
}

double target_cdf(const TargetCopula& c, double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("target_cdf: (u, v) must lie in the unit square");
    }
    if (u == 0.0 || v == 0.0) return 0.0;
    if (u == 1.0) return v;
    if (v == 1.0) return u;

    auto theta_at = [&](std::size_t k) {
        if (c.theta.size() <= k) throw std::invalid_argument("target_cdf: missing copula parameter");
        return c.theta[k];
    };

    switch (c.family) {
        case CopulaFamily::independence:
            return u * v;
        case CopulaFamily::gaussian: {
            const double rho = theta_at(0);
            if (!(rho > -1.0 && rho < 1.0)) {
                throw std::invalid_argument("target_cdf: gaussian rho must lie in (-1, 1)");
            }
            return bivariate_normal_cdf(normal_quantile(u), normal_quantile(v), rho);
        }
        case CopulaFamily::clayton: {
            const double th = theta_at(0);
            if (!(th > 0.0)) throw std::invalid_argument("target_cdf: clayton theta must be positive");
            return std::pow(std::pow(u, -th) + std::pow(v, -th) - 1.0, -1.0 / th);
        }
        case CopulaFamily::gumbel: {
            const double th = theta_at(0);
            if (!(th >= 1.0)) throw std::invalid_argument("target_cdf: gumbel theta must be >= 1");
            const double a = std::pow(-std::log(u), th) + std::pow(-std::log(v), th);
            return std::exp(-std::pow(a, 1.0 / th));
        }
        case CopulaFamily::frank: {
            const double th = theta_at(0);
            if (th == 0.0) throw std::invalid_argument("target_cdf: frank theta must be nonzero");
            const double num = std::expm1(-th * u) * std::expm1(-th * v);
            return -std::log1p(num / std::expm1(-th)) / th;
        }
    }
    throw std::logic_error("target_cdf: unknown family");
}

namespace {

// Marginal chain CDFs at horizon t; the joint's marginals do not depend on
// the correlation field, so the comparison lattice is fixed once.
Eigen::VectorXd marginal_cdf(const Generator& g, const StateGrid& grid, double t, double tol) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(g.dim);
    v(static_cast<Eigen::Index>(project(grid, 0.0))) = 1.0;
    Eigen::VectorXd pmf = expm_apply(g, v, t, tol);
    double c = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i) pmf(i) = (c += pmf(i));
    return pmf;
}

struct FitContext {
    const TargetCopula* target;
    const Generator* A1;
    const Generator* A2;
    const StateGrid* gx;
    const StateGrid* gy;
    const ModelSpec1D* modelX;
    const ModelSpec1D* modelY;
    double t;
    double expm_tol;
    Eigen::MatrixXd target_on_lattice;  // (n1+1) x (n2+1)
};

double fit_objective(const FitContext& ctx, const Eigen::MatrixXd& p_field) {
    RhoField rho;
    rho.values = p_field.array().tanh().matrix();
    const CorrelationOperator C =
        build_correlation_operator(*ctx.gx, *ctx.gy, ctx.modelX->vol, ctx.modelY->vol, rho);
    const Generator joint = assemble_joint_direct(*ctx.A1, *ctx.A2, C);
    const std::vector<Eigen::Index> init = {static_cast<Eigen::Index>(project(*ctx.gx, 0.0)),
                                            static_cast<Eigen::Index>(project(*ctx.gy, 0.0))};
    const JointDistribution dist = evolve_joint(joint, {*ctx.gx, *ctx.gy}, init, ctx.t, ctx.expm_tol);
    const CopulaSurface s = empirical_copula(dist);
    return (s.values - ctx.target_on_lattice).squaredNorm();
}

}  // namespace

FitResult fit_local_correlation(const TargetCopula& target, const ModelSpec1D& modelX,
                                const ModelSpec1D& modelY, const StateGrid& gx, const StateGrid& gy,
                                double t, const FitOptions& opts) {
    const auto n1 = static_cast<Eigen::Index>(gx.m);
    const auto n2 = static_cast<Eigen::Index>(gy.m);
    if (static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) > 10000) {
        throw std::invalid_argument("fit_local_correlation: joint dimension above the repeated-solve guard (10^4)");
    }

    FitContext ctx;
    ctx.target = &target;
    const Generator A1 = build_generator_1d(gx, modelX);
    const Generator A2 = build_generator_1d(gy, modelY);
    ctx.A1 = &A1;
    ctx.A2 = &A2;
    ctx.gx = &gx;
    ctx.gy = &gy;
    ctx.modelX = &modelX;
    ctx.modelY = &modelY;
    ctx.t = t;
    ctx.expm_tol = opts.expm_tol;

    const Eigen::VectorXd F1 = marginal_cdf(A1, gx, t, opts.expm_tol);
    const Eigen::VectorXd F2 = marginal_cdf(A2, gy, t, opts.expm_tol);
    ctx.target_on_lattice.resize(n1 + 1, n2 + 1);
    for (Eigen::Index i = 0; i <= n1; ++i) {
        const double u = i == 0 ? 0.0 : std::min(F1(i - 1), 1.0);
        for (Eigen::Index j = 0; j <= n2; ++j) {
            const double v = j == 0 ? 0.0 : std::min(F2(j - 1), 1.0);
            ctx.target_on_lattice(i, j) = target_cdf(target, u, v);
        }
    }

    FitResult res;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n1, n2);
    double obj = fit_objective(ctx, p);
    res.objective_at_zero = obj;
    res.objective_trace.push_back(obj);

    double step = opts.initial_step;
    int iter = 0;
    if (!opts.per_cell) {
        // Single shared parameter: deterministic pattern search with shrinking
        // steps. Objective evaluations are kernel solves, so gradients are not
        // available.
        double pc = 0.0;
        while (iter < opts.max_iter && step >= opts.min_step) {
            ++iter;
            bool improved = false;
            for (double cand : {pc + step, pc - step}) {
                Eigen::MatrixXd pm = Eigen::MatrixXd::Constant(n1, n2, cand);
                const double o = fit_objective(ctx, pm);
                if (o < obj) {
                    obj = o;
                    pc = cand;
                    improved = true;
                    res.objective_trace.push_back(obj);
                    break;
                }
            }
            if (!improved) step *= 0.5;
        }
        p.setConstant(pc);
        res.converged = step < opts.min_step;
    } else {
        while (iter < opts.max_iter && step >= opts.min_step) {
            ++iter;
            bool improved = false;
            for (Eigen::Index i = 1; i + 1 < n1; ++i) {
                for (Eigen::Index j = 1; j + 1 < n2; ++j) {
                    for (double delta : {step, -step}) {
                        Eigen::MatrixXd pm = p;
                        pm(i, j) += delta;
                        const double o = fit_objective(ctx, pm);
                        if (o < obj - 1e-15) {
                            obj = o;
                            p = pm;
                            improved = true;
                            res.objective_trace.push_back(obj);
                            break;
                        }
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        res.converged = step < opts.min_step;
    }

    res.rho_field.values = p.array().tanh().matrix();
    res.objective = obj;
    res.iterations = iter;
    return res;
}

namespace {

// e^{tC} v for the signed dependence operator via scaled truncated Taylor.
Eigen::VectorXd signed_expm_apply(const SpMat& C, Eigen::VectorXd v, double t) {
    double norm1 = 0.0;
    for (Eigen::Index i = 0; i < C.outerSize(); ++i) {
        double row = 0.0;
        for (SpMat::InnerIterator it(C, i); it; ++it) row += std::abs(it.value());
        norm1 = std::max(norm1, row);
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(norm1 * t / 0.5)));
    const double tau = t / steps;
    const SpMat Ct = C.transpose();
    for (int s = 0; s < steps; ++s) {
        Eigen::VectorXd term = v;
        Eigen::VectorXd sum = v;
        for (int k = 1; k <= 24; ++k) {
            term = (Ct * term) * (tau / k);
            sum += term;
            if (term.cwiseAbs().maxCoeff() < 1e-16) break;
        }
        v = sum;
    }
    return v;
}

}  // namespace

DensityCheckReport copula_density_check(const CorrelationOperator& C_op, const Generator& joint,
                                        const StateGrid& gx, const StateGrid& gy, double t, double tol) {
    const auto n1 = static_cast<Eigen::Index>(gx.m);
    const auto n2 = static_cast<Eigen::Index>(gy.m);
    if (joint.dim != n1 * n2 || C_op.n1 != n1 || C_op.n2 != n2) {
        throw std::invalid_argument("copula_density_check: dimensions do not conform");
    }

    // Model copula density: mixed difference of the copula surface, which on
    // the lattice is the joint pmf over the product of its marginals.
    const std::vector<Eigen::Index> init = {static_cast<Eigen::Index>(project(gx, 0.0)),
                                            static_cast<Eigen::Index>(project(gy, 0.0))};
    const JointDistribution dist = evolve_joint(joint, {gx, gy}, init, t, tol);
    const auto mrg = marginals(dist);

    DensityCheckReport rep;
    rep.model_density = Eigen::MatrixXd::Zero(n1, n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            const double denom = mrg[0](i) * mrg[1](j);
            rep.model_density(i, j) = denom > 1e-300 ? dist.pmf(i * n2 + j) / denom : 1.0;
        }
    }

    // Dependence-only law from uniform, normalized to unit mean.
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n1 * n2, 1.0 / static_cast<double>(n1 * n2));
    Eigen::VectorXd w = signed_expm_apply(C_op.matrix, uniform, t);
    rep.dependence_density = Eigen::MatrixXd::Zero(n1, n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            rep.dependence_density(i, j) = w(i * n2 + j) * static_cast<double>(n1 * n2);
        }
    }

    // Compare where the model has meaningful mass: weight both densities by
    // the product measure and take the sup over interior cells.
    double sup = 0.0;
    for (Eigen::Index i = 1; i + 1 < n1; ++i) {
        for (Eigen::Index j = 1; j + 1 < n2; ++j) {
            const double wgt = mrg[0](i) * mrg[1](j);
            sup = std::max(sup, wgt * std::abs(rep.model_density(i, j) - rep.dependence_density(i, j)));
        }
    }
    rep.sup_discrepancy = sup;
    return rep;
}

CopulaAxiomReport check_copula_axioms(const CopulaSurface& s, double grid_h) {
    CopulaAxiomReport rep;
    const Eigen::Index nu = s.u_axis.size(), nv = s.v_axis.size();

    for (Eigen::Index j = 0; j < nv; ++j) {
        if (std::abs(s.values(0, j)) > 1e-12) rep.grounded = false;
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
        if (std::abs(s.values(i, 0)) > 1e-12) rep.grounded = false;
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
        rep.worst_margin_gap = std::max(rep.worst_margin_gap, std::abs(s.values(i, nv - 1) - s.u_axis(i)));
    }
    for (Eigen::Index j = 0; j < nv; ++j) {
        rep.worst_margin_gap = std::max(rep.worst_margin_gap, std::abs(s.values(nu - 1, j) - s.v_axis(j)));
    }
    rep.uniform_margins = rep.worst_margin_gap <= 1e-9;

    for (Eigen::Index i = 1; i < nu; ++i) {
        for (Eigen::Index j = 1; j < nv; ++j) {
            const double vol = s.values(i, j) - s.values(i - 1, j) - s.values(i, j - 1) + s.values(i - 1, j - 1);
            rep.worst_rectangle = std::min(rep.worst_rectangle, vol);
        }
    }
    rep.two_increasing = rep.worst_rectangle >= -1e-9;

    for (Eigen::Index i = 0; i < nu && rep.frechet; ++i) {
        for (Eigen::Index j = 0; j < nv; ++j) {
            const double u = s.u_axis(i), v = s.v_axis(j), c = s.values(i, j);
            if (c > std::min(u, v) + 2.0 * grid_h || c < std::max(u + v - 1.0, 0.0) - 2.0 * grid_h) {
                rep.frechet = false;
                break;
            }
        }
    }
    return rep;
}

}  // namespace mimik
