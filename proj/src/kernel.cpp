#include "mimik/kernel.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mimik {

namespace {

constexpr Eigen::Index kMaxDenseKernelDim = 5000;
constexpr Eigen::Index kMaxDenseExpmDim = 600;

// Smallest K with P(Poisson(lambda) > K) <= tol.
Eigen::Index poisson_truncation(double lambda, double tol) {
    double cum = 0.0;
    const Eigen::Index hard_cap =
        static_cast<Eigen::Index>(lambda + 12.0 * std::sqrt(lambda + 1.0) + 60.0);
    for (Eigen::Index k = 0; k <= hard_cap; ++k) {
        const double lp = k * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0);
        cum += std::exp(lp);
        if (1.0 - cum <= tol) return k;
    }
    return hard_cap;
}

void clamp_renormalize(Eigen::VectorXd& v) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) < 0.0) {
            if (v(i) < -1e-12) {
                throw std::runtime_error("expm_apply: distribution entry below the clamp tolerance: " +
                                         std::to_string(v(i)));
            }
            v(i) = 0.0;
        }
        sum += v(i);
    }
    if (sum <= 0.0) throw std::runtime_error("expm_apply: distribution lost all mass");
    v /= sum;
}

}  // namespace

Eigen::VectorXd expm_apply(const Generator& Q, const Eigen::VectorXd& v, double t, double tol) {
    if (t < 0.0) throw std::invalid_argument("expm_apply: t must be nonnegative");
    if (!(tol > 0.0) || tol > 1e-4) throw std::invalid_argument("expm_apply: tol must be in (0, 1e-4]");
    if (v.size() != Q.dim) throw std::invalid_argument("expm_apply: vector size does not match the generator");
    if (v.minCoeff() < -1e-12 || std::abs(v.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("expm_apply: v must be a probability distribution");
    }

    double lambda = 0.0;
    for (Eigen::Index i = 0; i < Q.dim; ++i) {
        lambda = std::max(lambda, -Q.rates.coeff(i, i));
    }
    if (t == 0.0 || lambda == 0.0) return v;

    const double lt = lambda * t;
    const Eigen::Index K = poisson_truncation(lt, 0.5 * tol);
    const double log_lt = std::log(lt);

    Eigen::VectorXd w = v;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(v.size());
    const SpMat& Qm = Q.rates;
    for (Eigen::Index k = 0; k <= K; ++k) {
        const double lp = k * log_lt - lt - std::lgamma(static_cast<double>(k) + 1.0);
        const double weight = std::exp(lp);
        if (weight > 0.0) acc += weight * w;
        if (k < K) {
            // w <- (I + Q/lambda)^T w
            w += Qm.transpose() * w / lambda;
        }
    }
    clamp_renormalize(acc);
    return acc;
}

StochasticKernel transition_kernel(const Generator& Q, double t, double tol) {
    if (Q.dim > kMaxDenseKernelDim) {
        throw std::invalid_argument("transition_kernel: dim " + std::to_string(Q.dim) +
                                    " exceeds the dense-kernel guard (" + std::to_string(kMaxDenseKernelDim) +
                                    "); use expm_apply for single distributions");
    }
    StochasticKernel P;
    P.dim = Q.dim;
    P.t = t;
    P.probs.resize(Q.dim, Q.dim);
    Eigen::VectorXd basis = Eigen::VectorXd::Zero(Q.dim);
    for (Eigen::Index i = 0; i < Q.dim; ++i) {
        basis(i) = 1.0;
        P.probs.row(i) = expm_apply(Q, basis, t, tol).transpose();
        basis(i) = 0.0;
    }
    return P;
}

Eigen::MatrixXd dense_expm(const Generator& Q, double t) {
    if (Q.dim > kMaxDenseExpmDim) {
        throw std::invalid_argument("dense_expm: dim exceeds " + std::to_string(kMaxDenseExpmDim));
    }
    Eigen::MatrixXd A = Eigen::MatrixXd(Q.rates) * t;
    return A.exp();
}

StochasticKernel joint_kernel_direct(const Generator& joint, double t, double tol) {
    return transition_kernel(joint, t, tol);
}

ConditionalKernelResult joint_kernel_conditional(const ConditionalFamily& family, double t, double tol) {
    const auto n1 = static_cast<Eigen::Index>(family.grid_inner.m);
    const auto n2 = static_cast<Eigen::Index>(family.grid_outer.m);

    ConditionalKernelResult out;
    out.exact = transition_kernel(assemble_joint_conditional(family), t, tol);

    // Product-measure representation: the inner kernel conditioned at the
    // starting outer state, tensor the outer kernel.
    const StochasticKernel outer = transition_kernel(family.outer, t, tol);
    std::vector<Eigen::MatrixXd> inner_kernels;
    inner_kernels.reserve(family.inner.size());
    for (const auto& g : family.inner) {
        inner_kernels.push_back(transition_kernel(g, t, tol).probs);
    }

    out.factorized.resize(n1 * n2, n1 * n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            const Eigen::Index row = i * n2 + j;
            for (Eigen::Index ip = 0; ip < n1; ++ip) {
                for (Eigen::Index jp = 0; jp < n2; ++jp) {
                    out.factorized(row, ip * n2 + jp) =
                        inner_kernels[static_cast<std::size_t>(j)](i, ip) * outer.probs(j, jp);
                }
            }
        }
    }
    out.deviation = (out.exact.probs - out.factorized).cwiseAbs().maxCoeff();
    return out;
}

Eigen::VectorXd distribution_function(const JointDistribution& dist) {
    Eigen::VectorXd F = dist.pmf;
    const std::size_t d = dist.axes.size();

    // prefix-sum along each axis in turn
    std::vector<Eigen::Index> dims(d);
    for (std::size_t a = 0; a < d; ++a) dims[a] = static_cast<Eigen::Index>(dist.axes[a].m);

    for (std::size_t axis = 0; axis < d; ++axis) {
        Eigen::Index stride = 1;
        for (std::size_t a = axis + 1; a < d; ++a) stride *= dims[a];
        const Eigen::Index block = stride * dims[axis];
        for (Eigen::Index base = 0; base < F.size(); base += block) {
            for (Eigen::Index k = 1; k < dims[axis]; ++k) {
                for (Eigen::Index s = 0; s < stride; ++s) {
                    F(base + k * stride + s) += F(base + (k - 1) * stride + s);
                }
            }
        }
    }
    return F;
}

std::vector<Eigen::VectorXd> marginals(const JointDistribution& dist) {
    const std::size_t d = dist.axes.size();
    std::vector<Eigen::Index> dims(d);
    for (std::size_t a = 0; a < d; ++a) dims[a] = static_cast<Eigen::Index>(dist.axes[a].m);

    std::vector<Eigen::VectorXd> out;
    out.reserve(d);
    for (std::size_t axis = 0; axis < d; ++axis) {
        Eigen::VectorXd mrg = Eigen::VectorXd::Zero(dims[axis]);
        Eigen::Index stride = 1;
        for (std::size_t a = axis + 1; a < d; ++a) stride *= dims[a];
        for (Eigen::Index z = 0; z < dist.pmf.size(); ++z) {
            mrg((z / stride) % dims[axis]) += dist.pmf(z);
        }
        out.push_back(std::move(mrg));
    }
    return out;
}

JointDistribution evolve_joint(const Generator& joint, const std::vector<StateGrid>& axes,
                               const std::vector<Eigen::Index>& init, double t, double tol) {
    Eigen::Index size = 1;
    for (const auto& g : axes) size *= static_cast<Eigen::Index>(g.m);
    if (size != joint.dim) {
        throw std::invalid_argument("evolve_joint: axes do not match the joint generator dimension");
    }
    Eigen::Index z = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        z = z * static_cast<Eigen::Index>(axes[a].m) + init[a];
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    v(z) = 1.0;

    JointDistribution dist;
    dist.axes = axes;
    dist.init = init;
    dist.pmf = expm_apply(joint, v, t, tol);
    return dist;
}

std::pair<double, double> pmf_mean_var(const StateGrid& grid, const Eigen::VectorXd& pmf) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i) mean += pmf(i) * grid.points[static_cast<std::size_t>(i)];
    double var = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i) {
        const double d = grid.points[static_cast<std::size_t>(i)] - mean;
        var += pmf(i) * d * d;
    }
    return {mean, var};
}

JointMoments joint_moments(const JointDistribution& dist) {
    if (dist.axes.size() != 2) throw std::invalid_argument("joint_moments: implemented for d = 2");
    const auto n2 = static_cast<Eigen::Index>(dist.axes[1].m);

    JointMoments m;
    for (Eigen::Index z = 0; z < dist.pmf.size(); ++z) {
        const double p = dist.pmf(z);
        const double x = dist.axes[0].points[static_cast<std::size_t>(z / n2)];
        const double y = dist.axes[1].points[static_cast<std::size_t>(z % n2)];
        m.mean_x += p * x;
        m.mean_y += p * y;
    }
    for (Eigen::Index z = 0; z < dist.pmf.size(); ++z) {
        const double p = dist.pmf(z);
        const double dx = dist.axes[0].points[static_cast<std::size_t>(z / n2)] - m.mean_x;
        const double dy = dist.axes[1].points[static_cast<std::size_t>(z % n2)] - m.mean_y;
        m.var_x += p * dx * dx;
        m.var_y += p * dy * dy;
        m.cov += p * dx * dy;
    }
    m.corr = m.cov / std::sqrt(m.var_x * m.var_y);
    return m;
}

}  // namespace mimik
