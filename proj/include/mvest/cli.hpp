#pragma once

// Command-line front end. Subcommands: frontier, sweep, universality,
// statmech-check, hessian. Parameters come from a JSON config file
// (--config); the common flags --out/--format/--seed/--trials/--threads/
// --no-timestamp override the file. Every downstream precondition is
// checked here before any sampling starts.
//
// Exit codes: 0 ok, 1 usage or failed check, 2 degenerate returns,
// 3 not positive definite, 4 excessive singular trials.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mvest/errors.hpp"
#include "mvest/experiment.hpp"
#include "mvest/market_model.hpp"
#include "mvest/markowitz.hpp"
#include "mvest/replica.hpp"
#include "mvest/report.hpp"
#include "mvest/statmech.hpp"

namespace mvest::cli {

namespace detail {

using nlohmann::json;

inline json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        if (!j.is_object()) throw ConfigError("config root must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + key + "\" has the wrong type");
    }
}

template <typename T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("config key \"" + key + "\" is required");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + key + "\" has the wrong type");
    }
}

inline CovarianceFamily family_from_json(const json& j) {
    const std::string kind = require<std::string>(j, "kind");
    if (kind == "identity") return CovarianceFamily::identity();
    if (kind == "toeplitz") return CovarianceFamily::toeplitz(require<double>(j, "rho"));
    if (kind == "one_factor") {
        return CovarianceFamily::one_factor(require<double>(j, "load"),
                                            require<double>(j, "idio"));
    }
    if (kind == "custom") {
        const auto rows = require<std::vector<std::vector<double>>>(j, "covariance");
        const std::size_t n = rows.size();
        Eigen::MatrixXd sigma(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != n) throw ConfigError("custom covariance must be square");
            for (std::size_t k = 0; k < n; ++k) sigma(i, k) = rows[i][k];
        }
        return CovarianceFamily::custom_matrix(std::move(sigma));
    }
    throw ConfigError("unknown covariance family kind: " + kind);
}

inline MeanSpec means_from_json(const json& j) {
    const std::string kind = require<std::string>(j, "kind");
    if (kind == "linspace") {
        return MeanSpec::linspace(require<double>(j, "lo"), require<double>(j, "hi"));
    }
    if (kind == "random") return MeanSpec::random(require<std::uint64_t>(j, "seed"));
    if (kind == "custom") {
        const auto v = require<std::vector<double>>(j, "values");
        return MeanSpec::custom(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
    }
    throw ConfigError("unknown means kind: " + kind);
}

/// Validate a family's parameters without building a full model.
inline void check_family(const CovarianceFamily& family, int n_assets) {
    try {
        family.materialize(std::min(n_assets, 2));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid covariance family: ") + e.what());
    }
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "full_markowitz") return Mode::full_markowitz;
    if (s == "global_min") return Mode::global_min;
    throw ConfigError("mode must be \"full_markowitz\" or \"global_min\"");
}

inline Divisor divisor_from_string(const std::string& s) {
    if (s == "T") return Divisor::T;
    if (s == "T-1") return Divisor::TMinus1;
    throw ConfigError("divisor must be \"T\" or \"T-1\"");
}

inline SingularPolicy policy_from_string(const std::string& s) {
    if (s == "skip") return SingularPolicy::skip_and_count;
    if (s == "abort") return SingularPolicy::abort;
    throw ConfigError("singular_policy must be \"skip\" or \"abort\"");
}

inline OutputFormat format_from_string(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    throw ConfigError("format must be \"csv\" or \"json\"");
}

/// Model for the frontier / statmech commands: either a model file or a
/// (family, n_assets, means) triple.
inline MarketModel model_from_config(const json& cfg) {
    if (cfg.contains("model_file")) {
        return load_model(require<std::string>(cfg, "model_file"));
    }
    if (!cfg.contains("family")) {
        throw ConfigError("config needs either \"model_file\" or \"family\"");
    }
    const auto family = family_from_json(cfg.at("family"));
    const int n = require<int>(cfg, "n_assets");
    if (n < 2) throw ConfigError("n_assets must be at least 2");
    if (!cfg.contains("means")) throw ConfigError("config key \"means\" is required");
    return make_family(family, n, means_from_json(cfg.at("means")));
}

/// Common flag values; unset means "use the config file".
struct CommonFlags {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> threads;
    bool no_timestamp = false;
};

struct CommonConfig {
    std::string out;
    OutputFormat format = OutputFormat::csv;
    std::uint64_t base_seed = 0;
    int n_trials = 100;
    int threads = 1;
    bool timestamp = true;
};

inline CommonConfig merge_common(const json& cfg, const CommonFlags& flags) {
    CommonConfig c;
    c.out = flags.out ? *flags.out : get_or<std::string>(cfg, "out", "");
    c.format = format_from_string(
        flags.format ? *flags.format : get_or<std::string>(cfg, "format", "csv"));
    c.base_seed = flags.seed ? *flags.seed : get_or<std::uint64_t>(cfg, "base_seed", 0);
    c.n_trials = flags.trials ? *flags.trials : get_or<int>(cfg, "n_trials", 100);
    c.threads = flags.threads ? *flags.threads : get_or<int>(cfg, "threads", 1);
    c.timestamp =
        flags.no_timestamp ? false : get_or<bool>(cfg, "timestamp", true);
    if (c.threads < 1) throw ConfigError("threads must be at least 1");
    return c;
}

inline std::vector<double> grid_from_config(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) throw ConfigError("config key \"" + key + "\" is required");
    const auto& g = cfg.at(key);
    if (g.is_array()) {
        const auto grid = g.get<std::vector<double>>();
        if (grid.empty()) throw ConfigError("\"" + key + "\" must not be empty");
        return grid;
    }
    if (g.is_object()) {
        const double lo = require<double>(g, "lo");
        const double hi = require<double>(g, "hi");
        const double step = require<double>(g, "step");
        if (!(step > 0.0) || hi < lo) throw ConfigError("invalid grid range in \"" + key + "\"");
        std::vector<double> grid;
        for (int k = 0; lo + k * step <= hi + 1e-12 * step; ++k) grid.push_back(lo + k * step);
        return grid;
    }
    throw ConfigError("\"" + key + "\" must be an array or a {lo,hi,step} object");
}

// -------------------------------------------------------------------------

inline int cmd_frontier(const json& cfg, const CommonFlags& flags) {
    const auto common = merge_common(cfg, flags);
    const auto grid = grid_from_config(cfg, "grid");
    const MarketModel model = model_from_config(cfg);

    const auto abc = compute_abc(model);
    const auto points = frontier(model, grid);
    std::cout << "A=" << format_double(abc.a) << " B=" << format_double(abc.b)
              << " C=" << format_double(abc.c) << " B/A=" << format_double(abc.b / abc.a)
              << " 1/A=" << format_double(1.0 / abc.a) << "\n";
    if (!common.out.empty()) {
        write_frontier(points, common.out, common.format, common.timestamp);
    } else {
        write_frontier_csv(points, std::cout, false);
    }
    return 0;
}

struct SweepSpec {
    CovarianceFamily family;
    MeanSpec means;
    int n_assets = 0;
    double target = std::numeric_limits<double>::quiet_NaN();
    Mode mode = Mode::full_markowitz;
    SweepOptions options;
    double skip_threshold = 0.1;
};

inline SweepSpec sweep_spec_from(const json& cfg, const CommonConfig& common) {
    SweepSpec s;
    s.family = cfg.contains("family") ? family_from_json(cfg.at("family"))
                                      : CovarianceFamily::identity();
    s.means = cfg.contains("means") ? means_from_json(cfg.at("means"))
                                    : MeanSpec::linspace(0.0, 1.0);
    s.n_assets = require<int>(cfg, "n_assets");
    if (s.n_assets < 2) throw ConfigError("n_assets must be at least 2");
    check_family(s.family, s.n_assets);
    s.mode = mode_from_string(get_or<std::string>(cfg, "mode", "full_markowitz"));
    if (s.mode == Mode::full_markowitz) {
        s.target = require<double>(cfg, "target");
    }
    s.options.divisor = divisor_from_string(get_or<std::string>(cfg, "divisor", "T"));
    s.options.policy =
        policy_from_string(get_or<std::string>(cfg, "singular_policy", "skip"));
    s.options.threads = common.threads;
    s.skip_threshold = get_or<double>(cfg, "skip_threshold", 0.1);
    if (!(s.skip_threshold >= 0.0 && s.skip_threshold <= 1.0)) {
        throw ConfigError("skip_threshold must lie in [0,1]");
    }
    if (common.n_trials < 2) throw ConfigError("n_trials must be at least 2");
    return s;
}

inline void check_r_grid(const std::vector<double>& grid, int n_assets, Mode mode) {
    for (const double r : grid) {
        if (!(r > 0.0 && r < 1.0)) {
            throw ConfigError("every r must lie strictly inside (0,1)");
        }
        const int t_obs = int(std::llround(double(n_assets) / r));
        if (t_obs < min_t_obs(mode, n_assets)) {
            throw ConfigError("r=" + std::to_string(r) +
                              " needs more observations than the mode allows (T >= " +
                              std::to_string(min_t_obs(mode, n_assets)) + ")");
        }
    }
}

inline int report_and_grade_skips(const std::vector<SweepResult>& results, int n_trials,
                                  double threshold) {
    double worst = 0.0;
    for (const auto& res : results) {
        for (const auto& p : res.points) {
            worst = std::max(worst, double(p.n_skipped) / double(n_trials));
        }
    }
    if (worst > 0.0) {
        std::cout << "max skip fraction: " << format_double(worst) << "\n";
    }
    if (worst > threshold) {
        std::cerr << "error: singular-trial skip fraction " << format_double(worst)
                  << " exceeds threshold " << format_double(threshold) << "\n";
        return 4;
    }
    return 0;
}

inline int cmd_sweep(const json& cfg, const CommonFlags& flags) {
    const auto common = merge_common(cfg, flags);
    const auto spec = sweep_spec_from(cfg, common);
    const auto r_grid = grid_from_config(cfg, "r_grid");
    check_r_grid(r_grid, spec.n_assets, spec.mode);

    const SweepResult result =
        run_sweep(spec.family, spec.means, spec.n_assets, r_grid, spec.target, spec.mode,
                  common.n_trials, common.base_seed, spec.options);

    for (const auto& p : result.points) {
        std::cout << "r=" << format_double(p.r_effective) << " T=" << p.t_obs
                  << " mean_q0=" << format_double(p.mean_q0)
                  << " mean_in_ratio=" << format_double(p.mean_in_ratio)
                  << " skipped=" << p.n_skipped << "\n";
    }
    try {
        const auto fit = divergence_fit(result);
        std::cout << "divergence_fit slope=" << format_double(fit.slope)
                  << " intercept=" << format_double(fit.intercept) << "\n";
    } catch (const InsufficientPoints&) {
        std::cout << "divergence_fit: n/a (needs >= 4 grid points with r <= 0.95)\n";
    }
    if (!common.out.empty()) {
        write_sweep({result}, common.out, common.format, common.timestamp);
    }
    return report_and_grade_skips({result}, common.n_trials, spec.skip_threshold);
}

inline int cmd_universality(const json& cfg, const CommonFlags& flags) {
    const auto common = merge_common(cfg, flags);
    auto base = cfg;
    base["mode"] = get_or<std::string>(cfg, "mode", "full_markowitz");
    if (!cfg.contains("families") || !cfg.at("families").is_array()) {
        throw ConfigError("config key \"families\" must be an array");
    }
    std::vector<CovarianceFamily> families;
    for (const auto& fj : cfg.at("families")) families.push_back(family_from_json(fj));
    const auto targets = require<std::vector<double>>(cfg, "targets");
    if (families.empty() || targets.empty()) {
        throw ConfigError("\"families\" and \"targets\" must not be empty");
    }
    if (families.size() < 2 && targets.size() < 2) {
        throw ConfigError("universality needs at least 2 families or 2 targets");
    }
    const int n_assets = require<int>(cfg, "n_assets");
    if (n_assets < 2) throw ConfigError("n_assets must be at least 2");
    for (const auto& f : families) check_family(f, n_assets);
    const double r = require<double>(cfg, "r");
    const Mode mode = mode_from_string(base["mode"].get<std::string>());
    check_r_grid({r}, n_assets, mode);
    const MeanSpec means = cfg.contains("means") ? means_from_json(cfg.at("means"))
                                                 : MeanSpec::linspace(0.0, 1.0);
    if (common.n_trials < 2) throw ConfigError("n_trials must be at least 2");

    SweepOptions options;
    options.divisor = divisor_from_string(get_or<std::string>(cfg, "divisor", "T"));
    options.policy = policy_from_string(get_or<std::string>(cfg, "singular_policy", "skip"));
    options.threads = common.threads;

    const auto cells = universality_battery(n_assets, r, families, means, targets, mode,
                                            common.n_trials, common.base_seed, options);

    double max_z = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = i + 1; j < cells.size(); ++j) {
            const auto& a = cells[i].points.front();
            const auto& b = cells[j].points.front();
            const double diff = std::abs(a.mean_q0 - b.mean_q0);
            const double pooled = std::sqrt(a.se_q0 * a.se_q0 + b.se_q0 * b.se_q0);
            max_diff = std::max(max_diff, diff);
            if (pooled > 0.0) max_z = std::max(max_z, diff / pooled);
        }
    }
    std::cout << "cells=" << cells.size() << " max_pairwise_dmean_q0=" << format_double(max_diff)
              << " (" << format_double(max_z) << " pooled-se units)\n";
    if (!common.out.empty()) {
        write_sweep(cells, common.out, common.format, common.timestamp);
    }
    const double threshold = get_or<double>(cfg, "skip_threshold", 0.1);
    return report_and_grade_skips(cells, common.n_trials, threshold);
}

inline int cmd_statmech_check(const json& cfg, const CommonFlags& flags) {
    merge_common(cfg, flags);  // validates common keys even though unused
    const MarketModel model = model_from_config(cfg);
    const double target = require<double>(cfg, "target");
    std::vector<double> betas =
        get_or<std::vector<double>>(cfg, "betas", {0.1, 1.0, 10.0, 1000.0, 1e6});
    if (betas.empty()) throw ConfigError("\"betas\" must not be empty");
    for (const double beta : betas) {
        if (!(beta > 0.0)) throw ConfigError("every beta must be positive");
    }

    const auto exact = solve_exact(model, target, 1.0);
    double worst_weight_dev = 0.0;
    double beta_max = 0.0;
    for (const double beta : betas) {
        const Eigen::VectorXd w = thermal_weights(model, target, beta);
        worst_weight_dev =
            std::max(worst_weight_dev, (w - exact.weights).cwiseAbs().maxCoeff());
        beta_max = std::max(beta_max, beta);
    }
    const double f = free_energy(model, target, Eigen::VectorXd(), beta_max);
    const double gap = std::abs(2.0 * f - exact.variance);

    const bool weights_ok = worst_weight_dev < 1e-9;
    const bool gap_ok = gap < 1e-4 * exact.variance;
    std::cout << "max |thermal_weights(beta) - w*| = " << format_double(worst_weight_dev)
              << " (tol 1e-9)\n";
    std::cout << "|2F(beta=" << format_double(beta_max)
              << ") - sigma*^2| = " << format_double(gap) << " (tol "
              << format_double(1e-4 * exact.variance) << ")\n";
    std::cout << (weights_ok && gap_ok ? "statmech-check: PASS\n" : "statmech-check: FAIL\n");
    return (weights_ok && gap_ok) ? 0 : 1;
}

inline int cmd_hessian(const json& cfg, const CommonFlags& flags) {
    const auto common = merge_common(cfg, flags);
    const double beta = get_or<double>(cfg, "beta", 1.0);
    const double nu = get_or<double>(cfg, "nu", 1.0);
    const double n_replicas = get_or<double>(cfg, "n", 0.0);
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(nu > 0.0)) throw ConfigError("nu must be positive");
    if (!(n_replicas >= 0.0)) throw ConfigError("n must be nonnegative");
    const auto r_grid = grid_from_config(cfg, "r_grid");
    for (const double r : r_grid) {
        if (!(r > 0.0)) throw ConfigError("every r must be positive");
    }

    std::cout << "r,lambda1,lambda2,lambda3,stable\n";
    std::vector<std::pair<double, double>> loglog;  // (ln(1-r), ln lambda3)
    for (const double r : r_grid) {
        const auto spec = hessian_spectrum(beta, r, nu, n_replicas);
        std::cout << format_double(r) << ',' << format_double(spec.lambda1) << ','
                  << format_double(spec.lambda2) << ',' << format_double(spec.lambda3) << ','
                  << (spec.stable ? "true" : "false") << "\n";
        if (r < 1.0 && spec.lambda3 > 0.0) {
            loglog.emplace_back(std::log(1.0 - r), std::log(spec.lambda3));
        }
    }
    if (loglog.size() >= 2) {
        double xbar = 0.0, ybar = 0.0;
        for (const auto& [x, y] : loglog) {
            xbar += x;
            ybar += y;
        }
        xbar /= double(loglog.size());
        ybar /= double(loglog.size());
        double sxx = 0.0, sxy = 0.0;
        for (const auto& [x, y] : loglog) {
            sxx += (x - xbar) * (x - xbar);
            sxy += (x - xbar) * (y - ybar);
        }
        if (sxx > 0.0) {
            std::cout << "lambda3 log-log slope vs (1-r): " << format_double(sxy / sxx)
                      << "\n";
        }
    }

    bool checks_ok = true;
    std::vector<double> check_rs;
    for (const double r : r_grid) {
        if (r < 1.0) check_rs.push_back(r);
    }
    if (check_rs.empty()) check_rs.push_back(0.5);
    for (const double r : check_rs) {
        for (int n : {2, 3, 4}) {
            const auto rep = hessian_numeric_check(beta, r, nu, n);
            if (!rep.pass(1e-9)) {
                checks_ok = false;
                std::cout << "numeric check FAILED at r=" << format_double(r) << " n=" << n
                          << " max_rel_error=" << format_double(rep.max_rel_error) << "\n";
            }
        }
    }
    std::cout << (checks_ok ? "hessian numeric check (n=2,3,4): PASS\n"
                            : "hessian numeric check (n=2,3,4): FAIL\n");
    (void)common;
    return checks_ok ? 0 : 1;
}

}  // namespace detail

/// Entry point used by both main() and the tests.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Markowitz estimation-error laboratory: exact frontier solves, "
                 "sampled re-optimization, and closed-form large-N comparisons"};
    app.require_subcommand(1);

    detail::CommonFlags flags;
    auto add_common = [&flags](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "JSON config file");
        sub->add_option("--out", flags.out, "output file path");
        sub->add_option("--format", flags.format, "output format: csv|json");
        sub->add_option("--seed", flags.seed, "base seed (overrides config)");
        sub->add_option("--trials", flags.trials, "trials per grid point");
        sub->add_option("--threads", flags.threads, "worker threads");
        sub->add_flag("--no-timestamp", flags.no_timestamp,
                      "omit the timestamp line from output files");
    };

    CLI::App* frontier = app.add_subcommand("frontier", "efficient frontier of a model");
    CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over r = N/T");
    CLI::App* universality =
        app.add_subcommand("universality", "q0 across families and targets");
    CLI::App* statmech =
        app.add_subcommand("statmech-check", "thermal weights and zero-T limit");
    CLI::App* hessian = app.add_subcommand("hessian", "saddle-point Hessian spectrum");
    for (CLI::App* sub : {frontier, sweep, universality, statmech, hessian}) {
        add_common(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = detail::load_config(flags.config_path);
        if (app.got_subcommand(frontier)) return detail::cmd_frontier(cfg, flags);
        if (app.got_subcommand(sweep)) return detail::cmd_sweep(cfg, flags);
        if (app.got_subcommand(universality)) return detail::cmd_universality(cfg, flags);
        if (app.got_subcommand(statmech)) return detail::cmd_statmech_check(cfg, flags);
        if (app.got_subcommand(hessian)) return detail::cmd_hessian(cfg, flags);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateReturns& e) {
        std::cerr << "degenerate returns: " << e.what() << "\n";
        return 2;
    } catch (const NotPositiveDefinite& e) {
        std::cerr << "not positive definite: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("mvest");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(int(argv.size()), argv.data());
}

}  // namespace mvest::cli
