#include "mimik/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "mimik/conditional.hpp"
#include "mimik/copula.hpp"
#include "mimik/io.hpp"
#include "mimik/kernel.hpp"
#include "mimik/mc.hpp"
#include "mimik/spectral.hpp"
#include "mimik/stats.hpp"
#include "mimik/tensor_ops.hpp"

namespace mimik {

namespace {

using nlohmann::json;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_keys(const json& block, const std::string& name, const std::vector<std::string>& allowed,
                  const std::vector<std::string>& required) {
    if (!block.is_object()) throw SchemaError("config: block '" + name + "' must be an object");
    for (const auto& item : block.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw SchemaError("config: unknown key '" + item.key() + "' in block '" + name + "'");
        }
    }
    for (const auto& key : required) {
        if (!block.contains(key)) {
            throw SchemaError("config: block '" + name + "' is missing required key '" + key + "'");
        }
    }
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("config: cannot open " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("config: JSON parse error: ") + e.what());
    }
    if (!cfg.is_object()) throw SchemaError("config: top level must be an object");
    if (!cfg.contains("schema") || !cfg["schema"].is_number_integer() || cfg["schema"].get<int>() != 1) {
        throw SchemaError("config: requires \"schema\": 1");
    }
    return cfg;
}

ModelSpec1D parse_model(const json& block, const std::string& name) {
    require_keys(block, name, {"preset", "sigma", "kappa", "mu", "theta"}, {"preset"});
    const std::string preset = block.at("preset").get<std::string>();
    auto num = [&](const char* key, double dflt) {
        return block.contains(key) ? block.at(key).get<double>() : dflt;
    };
    if (preset == "bm") return make_bm(num("sigma", 1.0));
    if (preset == "ou") return make_ou(num("kappa", 1.0), num("sigma", std::sqrt(2.0)));
    if (preset == "gbm") return make_gbm_log(num("mu", 0.05), num("sigma", 0.2));
    if (preset == "cir") return make_cir(num("kappa", 1.0), num("theta", 1.0), num("sigma", 0.5));
    throw SchemaError("config: unknown model preset '" + preset + "'");
}

StateGrid parse_grid(const json& block, const std::string& name) {
    require_keys(block, name, {"lo", "hi", "m", "dyadic_n"}, {});
    if (block.contains("dyadic_n")) {
        return build_dyadic_grid(block.at("dyadic_n").get<int>());
    }
    for (const char* key : {"lo", "hi", "m"}) {
        if (!block.contains(key)) {
            throw SchemaError("config: grid block needs lo/hi/m or dyadic_n");
        }
    }
    return build_uniform_grid(block.at("lo").get<double>(), block.at("hi").get<double>(),
                              block.at("m").get<std::size_t>());
}

RhoField parse_rho(const json& block, const StateGrid& gx, const StateGrid& gy) {
    require_keys(block, "rho", {"constant", "preset", "amplitude"}, {});
    if (block.contains("constant")) {
        return RhoField::constant(static_cast<Eigen::Index>(gx.m), static_cast<Eigen::Index>(gy.m),
                                  block.at("constant").get<double>());
    }
    if (block.contains("preset")) {
        const std::string preset = block.at("preset").get<std::string>();
        const double amp = block.contains("amplitude") ? block.at("amplitude").get<double>() : 0.5;
        if (preset == "tanh_product") {
            return RhoField::from_function(
                gx, gy, [amp](double x, double y) { return amp * std::tanh(x) * std::tanh(y); });
        }
        throw SchemaError("config: unknown rho preset '" + preset + "'");
    }
    throw SchemaError("config: rho block needs 'constant' or 'preset'");
}

std::pair<double, double> parse_time(const json& cfg) {
    if (!cfg.contains("time")) throw SchemaError("config: missing 'time' block");
    require_keys(cfg.at("time"), "time", {"t", "tol"}, {"t"});
    const double t = cfg.at("time").at("t").get<double>();
    const double tol = cfg.at("time").contains("tol") ? cfg.at("time").at("tol").get<double>() : 1e-10;
    return {t, tol};
}

void write_json(const std::string& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

json validation_to_json(const ValidationReport& rep) {
    return json{{"passed", rep.passed},
                {"max_row_sum_residual", rep.max_row_sum_residual},
                {"worst_row", rep.worst_row},
                {"most_negative_offdiag", rep.most_negative_offdiag},
                {"boundary_rows_zero", rep.boundary_rows_zero},
                {"summary", rep.summary}};
}

int cmd_build(const json& cfg, const std::string& out_dir) {
    static const std::vector<std::string> allowed = {"schema", "model", "grid",     "model2",
                                                     "grid2",  "rho",   "conditional"};
    require_keys(cfg, "top", allowed, {"model", "grid"});

    const ModelSpec1D model = parse_model(cfg.at("model"), "model");
    const StateGrid grid = parse_grid(cfg.at("grid"), "grid");

    if (!cfg.contains("model2")) {
        const Generator Q = build_generator_1d(grid, model);
        export_generator_csv(Q, out_dir + "/generator.csv");
        write_json(out_dir + "/validation.json", validation_to_json(validate_generator(Q)));
        return 0;
    }

    if (!cfg.contains("grid2") || !cfg.contains("rho")) {
        throw SchemaError("config: joint build needs grid2 and rho");
    }
    const ModelSpec1D model2 = parse_model(cfg.at("model2"), "model2");
    const StateGrid grid2 = parse_grid(cfg.at("grid2"), "grid2");
    const RhoField rho = parse_rho(cfg.at("rho"), grid, grid2);

    Generator joint;
    if (cfg.contains("conditional")) {
        require_keys(cfg.at("conditional"), "conditional", {"mode"}, {"mode"});
        const std::string mode = cfg.at("conditional").at("mode").get<std::string>();
        if (mode != "literal" && mode != "increment") {
            throw SchemaError("config: conditional mode must be 'literal' or 'increment'");
        }
        const auto fam = build_conditional_family(
            grid, grid2, model, model2, rho,
            mode == "literal" ? ConditionalMode::literal : ConditionalMode::increment);
        joint = assemble_joint_conditional(fam);
    } else {
        const Generator A1 = build_generator_1d(grid, model);
        const Generator A2 = build_generator_1d(grid2, model2);
        const CorrelationOperator C = build_correlation_operator(grid, grid2, model.vol, model2.vol, rho);
        joint = assemble_joint_direct(A1, A2, C);
    }
    export_generator_csv(joint, out_dir + "/joint.csv");
    write_json(out_dir + "/validation.json", validation_to_json(validate_generator(joint)));
    return 0;
}

int cmd_evolve(const json& cfg, const std::string& out_dir) {
    static const std::vector<std::string> allowed = {"schema", "model", "grid", "model2",
                                                     "grid2",  "rho",   "time", "x0", "x0_2"};
    require_keys(cfg, "top", allowed, {"model", "grid", "time"});

    const ModelSpec1D model = parse_model(cfg.at("model"), "model");
    const StateGrid grid = parse_grid(cfg.at("grid"), "grid");
    const auto [t, tol] = parse_time(cfg);
    const double x0 = cfg.contains("x0") ? cfg.at("x0").get<double>() : 0.0;

    if (!cfg.contains("model2")) {
        const Generator Q = build_generator_1d(grid, model);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(Q.dim);
        v(static_cast<Eigen::Index>(project(grid, x0))) = 1.0;
        const Eigen::VectorXd pmf = expm_apply(Q, v, t, tol);

        std::vector<std::vector<double>> rows;
        double cum = 0.0;
        for (Eigen::Index i = 0; i < pmf.size(); ++i) {
            cum += pmf(i);
            rows.push_back({grid.points[static_cast<std::size_t>(i)], pmf(i), cum});
        }
        write_csv(out_dir + "/distribution.csv", {"x", "pmf", "cdf"}, rows);

        const auto [mean, var] = pmf_mean_var(grid, pmf);
        write_json(out_dir + "/moments.json",
                   json{{"t", t}, {"mass", pmf.sum()}, {"mean", mean}, {"variance", var}});
        return 0;
    }

    if (!cfg.contains("grid2") || !cfg.contains("rho")) {
        throw SchemaError("config: joint evolve needs grid2 and rho");
    }
    const ModelSpec1D model2 = parse_model(cfg.at("model2"), "model2");
    const StateGrid grid2 = parse_grid(cfg.at("grid2"), "grid2");
    const RhoField rho = parse_rho(cfg.at("rho"), grid, grid2);
    const double y0 = cfg.contains("x0_2") ? cfg.at("x0_2").get<double>() : 0.0;

    const Generator A1 = build_generator_1d(grid, model);
    const Generator A2 = build_generator_1d(grid2, model2);
    const CorrelationOperator C = build_correlation_operator(grid, grid2, model.vol, model2.vol, rho);
    const Generator joint = assemble_joint_direct(A1, A2, C);

    const std::vector<Eigen::Index> init = {static_cast<Eigen::Index>(project(grid, x0)),
                                            static_cast<Eigen::Index>(project(grid2, y0))};
    const JointDistribution dist = evolve_joint(joint, {grid, grid2}, init, t, tol);
    const Eigen::VectorXd F = distribution_function(dist);

    const auto n2 = static_cast<Eigen::Index>(grid2.m);
    std::vector<std::vector<double>> rows;
    for (Eigen::Index z = 0; z < dist.pmf.size(); ++z) {
        rows.push_back({grid.points[static_cast<std::size_t>(z / n2)],
                        grid2.points[static_cast<std::size_t>(z % n2)], dist.pmf(z), F(z)});
    }
    write_csv(out_dir + "/distribution.csv", {"x", "y", "pmf", "cdf"}, rows);

    const JointMoments m = joint_moments(dist);
    write_json(out_dir + "/moments.json",
               json{{"t", t},
                    {"mass", dist.pmf.sum()},
                    {"mean", {m.mean_x, m.mean_y}},
                    {"variance", {m.var_x, m.var_y}},
                    {"covariance", m.cov},
                    {"correlation", m.corr}});
    return 0;
}

TargetCopula parse_target(const json& block) {
    require_keys(block, "fit", {"family", "theta", "max_iter", "per_cell", "initial_step"}, {"family"});
    TargetCopula target;
    const std::string fam = block.at("family").get<std::string>();
    if (fam == "independence") {
        target.family = CopulaFamily::independence;
    } else if (fam == "gaussian") {
        target.family = CopulaFamily::gaussian;
    } else if (fam == "clayton") {
        target.family = CopulaFamily::clayton;
    } else if (fam == "gumbel") {
        target.family = CopulaFamily::gumbel;
    } else if (fam == "frank") {
        target.family = CopulaFamily::frank;
    } else {
        throw SchemaError("config: unknown copula family '" + fam + "'");
    }
    if (block.contains("theta")) {
        target.theta = block.at("theta").get<std::vector<double>>();
    }
    return target;
}

void write_copula_csv(const CopulaSurface& s, const std::string& path) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < s.u_axis.size(); ++i) {
        for (Eigen::Index j = 0; j < s.v_axis.size(); ++j) {
            rows.push_back({s.u_axis(i), s.v_axis(j), s.values(i, j)});
        }
    }
    write_csv(path, {"u", "v", "C"}, rows);
}

int cmd_fit_copula(const json& cfg, const std::string& out_dir) {
    static const std::vector<std::string> allowed = {"schema", "model", "grid", "model2",
                                                     "grid2",  "time",  "fit"};
    require_keys(cfg, "top", allowed, {"model", "grid", "model2", "grid2", "time", "fit"});

    const ModelSpec1D model = parse_model(cfg.at("model"), "model");
    const ModelSpec1D model2 = parse_model(cfg.at("model2"), "model2");
    const StateGrid grid = parse_grid(cfg.at("grid"), "grid");
    const StateGrid grid2 = parse_grid(cfg.at("grid2"), "grid2");
    const auto [t, tol] = parse_time(cfg);
    (void)tol;

    const json& fit_block = cfg.at("fit");
    const TargetCopula target = parse_target(fit_block);
    FitOptions opts;
    if (fit_block.contains("max_iter")) opts.max_iter = fit_block.at("max_iter").get<int>();
    if (fit_block.contains("per_cell")) opts.per_cell = fit_block.at("per_cell").get<bool>();
    if (fit_block.contains("initial_step")) opts.initial_step = fit_block.at("initial_step").get<double>();

    const FitResult res = fit_local_correlation(target, model, model2, grid, grid2, t, opts);

    json field = json::array();
    for (Eigen::Index i = 0; i < res.rho_field.values.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < res.rho_field.values.cols(); ++j) row.push_back(res.rho_field.values(i, j));
        field.push_back(row);
    }
    write_json(out_dir + "/fit_result.json", json{{"objective", res.objective},
                                                  {"objective_at_zero", res.objective_at_zero},
                                                  {"iterations", res.iterations},
                                                  {"converged", res.converged},
                                                  {"objective_trace", res.objective_trace},
                                                  {"rho_field", field}});

    // model surface at the fitted field plus the target on the same lattice
    const Generator A1 = build_generator_1d(grid, model);
    const Generator A2 = build_generator_1d(grid2, model2);
    const CorrelationOperator C = build_correlation_operator(grid, grid2, model.vol, model2.vol, res.rho_field);
    const Generator joint = assemble_joint_direct(A1, A2, C);
    const std::vector<Eigen::Index> init = {static_cast<Eigen::Index>(project(grid, 0.0)),
                                            static_cast<Eigen::Index>(project(grid2, 0.0))};
    const CopulaSurface model_surface = empirical_copula(evolve_joint(joint, {grid, grid2}, init, t, 1e-10));
    write_copula_csv(model_surface, out_dir + "/copula_model.csv");

    CopulaSurface target_surface = model_surface;
    for (Eigen::Index i = 0; i < target_surface.u_axis.size(); ++i) {
        for (Eigen::Index j = 0; j < target_surface.v_axis.size(); ++j) {
            target_surface.values(i, j) =
                target_cdf(target, std::min(target_surface.u_axis(i), 1.0),
                           std::min(target_surface.v_axis(j), 1.0));
        }
    }
    write_copula_csv(target_surface, out_dir + "/copula_target.csv");

    return res.converged ? 0 : 3;
}

int cmd_converge(const json& cfg, const std::string& out_dir) {
    static const std::vector<std::string> allowed = {"schema", "sweep", "model", "grid", "time"};
    require_keys(cfg, "top", allowed, {"sweep"});
    const json& sweep = cfg.at("sweep");
    require_keys(sweep, "sweep", {"mode", "h", "mu", "sigma", "sigma2", "rho", "t"}, {"mode", "h"});

    const std::string mode = sweep.at("mode").get<std::string>();
    const std::vector<double> h_values = sweep.at("h").get<std::vector<double>>();
    if (h_values.empty()) throw SchemaError("config: sweep.h must be a nonempty decreasing list");

    json slope_json;
    std::vector<std::vector<double>> rows;

    if (mode == "symbol" || mode == "cross" || mode == "kernel") {
        SymbolSpec spec;
        const double mu = sweep.contains("mu") ? sweep.at("mu").get<double>() : 0.0;
        const double s1 = sweep.contains("sigma") ? sweep.at("sigma").get<double>() : 1.0;
        const double s2 = sweep.contains("sigma2") ? sweep.at("sigma2").get<double>() : s1;
        const double rho = sweep.contains("rho") ? sweep.at("rho").get<double>() : 0.0;
        spec.t = sweep.contains("t") ? sweep.at("t").get<double>() : 1.0;
        if (mode == "cross") {
            spec.mu = Eigen::Vector2d(mu, mu);
            spec.sigma = Eigen::Vector2d(s1, s2);
            spec.rho = Eigen::Matrix2d::Identity();
            spec.rho(0, 1) = spec.rho(1, 0) = rho;
            spec.h = Eigen::Vector2d(h_values[0], h_values[0]);
        } else {
            spec.mu = Eigen::VectorXd::Constant(1, mu);
            spec.sigma = Eigen::VectorXd::Constant(1, s1);
            spec.rho = Eigen::MatrixXd::Identity(1, 1);
            spec.h = Eigen::VectorXd::Constant(1, h_values[0]);
        }
        const RateMode rmode = mode == "symbol" ? RateMode::symbol
                              : mode == "cross" ? RateMode::cross
                                                : RateMode::kernel;
        const RateEstimate est = estimate_rate(spec, h_values, rmode);
        for (std::size_t i = 0; i < est.h_values.size(); ++i) {
            rows.push_back({est.h_values[i], est.errors[i]});
        }
        slope_json = json{{"mode", mode}, {"slope", est.slope}, {"monotone", est.monotone}};
    } else if (mode == "ks") {
        // chain law against the exact law over the h sweep (bm and ou presets)
        if (!cfg.contains("model") || !cfg.contains("grid") || !cfg.contains("time")) {
            throw SchemaError("config: ks sweep needs model, grid and time blocks");
        }
        const ModelSpec1D model = parse_model(cfg.at("model"), "model");
        const json& gblock = cfg.at("grid");
        require_keys(gblock, "grid", {"lo", "hi", "m"}, {"lo", "hi"});
        const double lo = gblock.at("lo").get<double>(), hi = gblock.at("hi").get<double>();
        const auto [t, tol] = parse_time(cfg);

        std::function<double(double)> exact;
        const std::string& preset = cfg.at("model").at("preset").get_ref<const std::string&>();
        const double sg = model.vol(0.0);
        if (preset == "bm") {
            exact = [sg, t = t](double x) { return normal_cdf(x / (sg * std::sqrt(t))); };
        } else if (preset == "ou") {
            const double kappa = -model.drift(1.0);
            const double var = sg * sg * (1.0 - std::exp(-2.0 * kappa * t)) / (2.0 * kappa);
            exact = [var](double x) { return normal_cdf(x / std::sqrt(var)); };
        } else {
            throw SchemaError("config: ks sweep supports bm and ou presets only");
        }

        bool monotone = true;
        double prev = -1.0;
        for (double h : h_values) {
            const auto m = static_cast<std::size_t>(std::lround((hi - lo) / h)) + 1;
            const StateGrid grid = build_uniform_grid(lo, hi, m);
            const Generator Q = build_generator_1d(grid, model);
            Eigen::VectorXd v = Eigen::VectorXd::Zero(Q.dim);
            v(static_cast<Eigen::Index>(project(grid, 0.0))) = 1.0;
            const double ks = ks_grid_cdf(grid, expm_apply(Q, v, t, tol), exact);
            rows.push_back({h, ks});
            if (prev >= 0.0 && ks >= prev) monotone = false;
            prev = ks;
        }
        slope_json = json{{"mode", "ks"}, {"monotone", monotone}};
    } else {
        throw SchemaError("config: unknown sweep mode '" + mode + "'");
    }

    write_csv(out_dir + "/rate.csv", {"h", "epsilon"}, rows);
    write_json(out_dir + "/slope.json", slope_json);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"CTMC approximation of correlated diffusions: build, evolve, fit copulas, measure rates"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "seed recorded in outputs");
    };
    CLI::App* build = app.add_subcommand("build", "construct generators");
    CLI::App* evolve = app.add_subcommand("evolve", "evolve distributions");
    CLI::App* fit = app.add_subcommand("fit-copula", "fit a local correlation field");
    CLI::App* converge = app.add_subcommand("converge", "convergence-rate sweeps");
    for (CLI::App* sub : {build, evolve, fit, converge}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    // MIMIK_THREADS caps internal parallelism; execution is sequential, so any
    // positive cap is honored as-is.
    if (const char* threads = std::getenv("MIMIK_THREADS")) {
        if (std::atoi(threads) < 1) {
            std::cerr << "mimik: MIMIK_THREADS must be a positive integer\n";
            return 1;
        }
    }

    try {
        const json cfg = load_config(config_path);
        if (app.got_subcommand(build)) return cmd_build(cfg, out_dir);
        if (app.got_subcommand(evolve)) return cmd_evolve(cfg, out_dir);
        if (app.got_subcommand(fit)) return cmd_fit_copula(cfg, out_dir);
        return cmd_converge(cfg, out_dir);
    } catch (const SchemaError& e) {
        std::cerr << "mimik: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "mimik: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "mimik: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mimik: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace mimik
