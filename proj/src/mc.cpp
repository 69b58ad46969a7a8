#include "mimik/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mimik/io.hpp"

namespace mimik {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(path + 1)));
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-10) {
        throw std::domain_error("simulate_euler: rho is not positive semidefinite (min eigenvalue " +
                                std::to_string(lo) + ")");
    }
    Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

}  // namespace

SampleSet simulate_euler(const SimConfig& cfg) {
    if (cfg.n_paths < 1 || !(cfg.dt > 0.0) || !(cfg.t_end > 0.0)) {
        throw std::invalid_argument("simulate_euler: need n_paths >= 1, dt > 0, t_end > 0");
    }
    if (static_cast<int>(cfg.models.size()) != cfg.d || cfg.x0.size() != cfg.d) {
        throw std::invalid_argument("simulate_euler: models/x0 do not match d");
    }
    const bool state_dep = static_cast<bool>(cfg.rho_fn);
    if (state_dep && cfg.d != 2) {
        throw std::invalid_argument("simulate_euler: state-dependent rho supported for d = 2 only");
    }

    Eigen::MatrixXd L;
    if (!state_dep) {
        if (cfg.d == 1) {
            L = Eigen::MatrixXd::Identity(1, 1);
        } else {
            if (cfg.rho.rows() != cfg.d || cfg.rho.cols() != cfg.d ||
                (cfg.rho - cfg.rho.transpose()).norm() > 1e-12 * std::max(1.0, cfg.rho.norm())) {
                throw std::invalid_argument("simulate_euler: rho must be a symmetric d x d matrix");
            }
            L = correlation_factor(cfg.rho);
        }
    }

    const auto n_steps = static_cast<long>(std::lround(cfg.t_end / cfg.dt));
    const double sdt = std::sqrt(cfg.dt);

    SampleSet out;
    out.terminal.resize(cfg.n_paths, cfg.d);
    Eigen::VectorXd x(cfg.d), z(cfg.d), dz(cfg.d);

    for (int p = 0; p < cfg.n_paths; ++p) {
        auto eng = path_engine(cfg.seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> gauss(0.0, 1.0);
        x = cfg.x0;
        for (long k = 0; k < n_steps; ++k) {
            for (int i = 0; i < cfg.d; ++i) z(i) = gauss(eng);
            if (state_dep) {
                const double r = std::clamp(cfg.rho_fn(x(0), x(1)), -1.0, 1.0);
                dz(0) = z(0);
                dz(1) = r * z(0) + std::sqrt(1.0 - r * r) * z(1);
            } else {
                dz = L * z;
            }
            for (int i = 0; i < cfg.d; ++i) {
                x(i) += cfg.models[static_cast<std::size_t>(i)].drift(x(i)) * cfg.dt +
                        cfg.models[static_cast<std::size_t>(i)].vol(x(i)) * dz(i) * sdt;
            }
        }
        out.terminal.row(p) = x.transpose();
    }
    return out;
}

namespace {

// One Gillespie trajectory; reports the state index at each requested bin
// boundary (bin_times ascending, last entry t_end).
void gillespie_path(const Generator& Q, Eigen::Index start, const std::vector<double>& bin_times,
                    std::mt19937_64& eng, std::vector<Eigen::Index>& states_at_bins) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::Index state = start;
    double t = 0.0;
    std::size_t bin = 0;
    states_at_bins.assign(bin_times.size(), start);

    while (bin < bin_times.size()) {
        const double exit_rate = -Q.rates.coeff(state, state);
        double t_next;
        if (exit_rate <= 0.0) {
            t_next = bin_times.back() + 1.0;  // absorbed
        } else {
            t_next = t - std::log(1.0 - unif(eng)) / exit_rate;
        }
        while (bin < bin_times.size() && bin_times[bin] < t_next) {
            states_at_bins[bin] = state;
            ++bin;
        }
        if (bin >= bin_times.size()) break;
        t = t_next;

        double u = unif(eng) * exit_rate;
        Eigen::Index target = state;
        for (SpMat::InnerIterator it(Q.rates, state); it; ++it) {
            if (it.col() == state) continue;
            u -= it.value();
            if (u <= 0.0) {
                target = it.col();
                break;
            }
        }
        state = target;
    }
}

}  // namespace

SampleSet simulate_ctmc(const Generator& Q, const StateGrid& grid, double x0, double t_end,
                        int n_paths, std::uint64_t seed) {
    if (n_paths < 1 || !(t_end > 0.0)) throw std::invalid_argument("simulate_ctmc: bad n_paths/t_end");
    const auto start = static_cast<Eigen::Index>(project(grid, x0));

    SampleSet out;
    out.terminal.resize(n_paths, 1);
    const std::vector<double> bins = {t_end};
    std::vector<Eigen::Index> at_bins;
    for (int p = 0; p < n_paths; ++p) {
        auto eng = path_engine(seed, static_cast<std::uint64_t>(p));
        gillespie_path(Q, start, bins, eng, at_bins);
        out.terminal(p, 0) = grid.points[static_cast<std::size_t>(at_bins[0])];
    }
    return out;
}

SampleSet simulate_ctmc_joint(const Generator& joint, const StateGrid& gx, const StateGrid& gy,
                              double x0, double y0, double t_end, int n_paths, std::uint64_t seed,
                              bool record_covariation) {
    if (n_paths < 1 || !(t_end > 0.0)) throw std::invalid_argument("simulate_ctmc_joint: bad n_paths/t_end");
    const auto n2 = static_cast<Eigen::Index>(gy.m);
    const Eigen::Index start =
        static_cast<Eigen::Index>(project(gx, x0)) * n2 + static_cast<Eigen::Index>(project(gy, y0));

    const int n_bins = 100;  // covariation bins of width t_end/100
    std::vector<double> bins(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) bins[static_cast<std::size_t>(b)] = t_end * (b + 1) / n_bins;

    SampleSet out;
    out.terminal.resize(n_paths, 2);
    if (record_covariation) {
        out.covariation_xy.resize(n_paths);
        out.has_covariation = true;
    }

    std::vector<Eigen::Index> at_bins;
    for (int p = 0; p < n_paths; ++p) {
        auto eng = path_engine(seed, static_cast<std::uint64_t>(p));
        gillespie_path(joint, start, bins, eng, at_bins);

        const Eigen::Index zT = at_bins.back();
        out.terminal(p, 0) = gx.points[static_cast<std::size_t>(zT / n2)];
        out.terminal(p, 1) = gy.points[static_cast<std::size_t>(zT % n2)];

        if (record_covariation) {
            double cov = 0.0;
            Eigen::Index prev = start;
            for (const Eigen::Index z : at_bins) {
                const double dx = gx.points[static_cast<std::size_t>(z / n2)] -
                                  gx.points[static_cast<std::size_t>(prev / n2)];
                const double dy = gy.points[static_cast<std::size_t>(z % n2)] -
                                  gy.points[static_cast<std::size_t>(prev % n2)];
                cov += dx * dy;
                prev = z;
            }
            out.covariation_xy(p) = cov;
        }
    }
    return out;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double ks = 0.0;
    std::size_t ia = 0, ib = 0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] <= b[ib]) {
            ++ia;
        } else {
            ++ib;
        }
        ks = std::max(ks, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return ks;
}

double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw std::invalid_argument("ks_distance: empty sample set");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double F = cdf(a[i]);
        ks = std::max(ks, std::max(F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F));
    }
    return ks;
}

double ks_grid_cdf(const StateGrid& grid, const Eigen::VectorXd& pmf,
                   const std::function<double(double)>& cdf) {
    double ks = 0.0, cum = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i) {
        cum += pmf(i);
        ks = std::max(ks, std::abs(cum - cdf(grid.points[static_cast<std::size_t>(i)])));
    }
    return ks;
}

double covariation_estimate(const SampleSet& samples, double t_end) {
    if (!samples.has_covariation) {
        throw std::invalid_argument("covariation_estimate: the sample set carries no covariation records");
    }
    return samples.covariation_xy.mean() / t_end;
}

void export_sampleset_csv(const SampleSet& samples, const std::string& path) {
    std::vector<std::string> header;
    for (Eigen::Index c = 0; c < samples.terminal.cols(); ++c) header.push_back("x" + std::to_string(c));
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(samples.terminal.rows()));
    for (Eigen::Index r = 0; r < samples.terminal.rows(); ++r) {
        auto& row = rows[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(samples.terminal.cols()));
        for (Eigen::Index c = 0; c < samples.terminal.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = samples.terminal(r, c);
        }
    }
    write_csv(path, header, rows);
}

}  // namespace mimik
