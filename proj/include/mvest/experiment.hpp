#pragma once

// Monte Carlo harness: re-optimize on finite samples, measure the
// out-of-sample error q0 and the in-sample variance, sweep r = N/T and
// compare covariance families and return targets. Trials are pure
// functions of (model, t_obs, seed); sweeps derive per-trial seeds as
// base_seed XOR trial_index and aggregate in index order, so results are
// bit-identical no matter how many threads run the trials.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mvest/errors.hpp"
#include "mvest/market_model.hpp"
#include "mvest/markowitz.hpp"
#include "mvest/sampling.hpp"

namespace mvest {

enum class Mode { global_min, full_markowitz };

inline const char* to_string(Mode m) {
    return m == Mode::global_min ? "global_min" : "full_markowitz";
}

/// Minimum sample length per mode: centering costs one rank; the return
/// constraint in full mode costs one more.
inline int min_t_obs(Mode mode, int n_assets) {
    return mode == Mode::full_markowitz ? n_assets + 2 : n_assets + 1;
}

enum class SingularPolicy { abort, skip_and_count };

struct TrialRecord {
    std::uint64_t seed = 0;
    double r = 0.0;  // N / t_obs
    double q0 = 0.0;
    double in_sample_variance = 0.0;
    double in_sample_ratio = 0.0;
    double target_return = 0.0;
    Mode mode = Mode::full_markowitz;
};

/// Re-optimize with given sample estimators (sample means in the return
/// constraint, same numeric target, budget 1) and measure
///   q0              = w_hat' Sigma w_hat / w*' Sigma w*   (true Sigma in both)
///   in_sample_var   = w_hat' Sigma_hat w_hat.
/// Raises SingularSampleCovariance when the sample covariance cannot be
/// factorized, the regime beyond the r -> 1 boundary.
inline TrialRecord run_trial(const MarketModel& model, const SampleEstimators& est,
                             int t_obs, double target_return, Mode mode,
                             std::uint64_t seed) {
    const PortfolioSolution truth = (mode == Mode::full_markowitz)
                                        ? solve_exact(model, target_return, 1.0)
                                        : solve_global_min(model, 1.0);
    Eigen::VectorXd w_hat;
    try {
        const MarketModel est_model(est.cov_hat, est.mean_hat);
        w_hat = (mode == Mode::full_markowitz)
                    ? solve_exact(est_model, target_return, 1.0).weights
                    : solve_global_min(est_model, 1.0).weights;
    } catch (const NotPositiveDefinite&) {
        throw SingularSampleCovariance("sample covariance is not positive definite");
    } catch (const DegenerateReturns&) {
        throw SingularSampleCovariance("sample means are collinear with ones");
    }

    TrialRecord rec;
    rec.seed = seed;
    rec.r = double(model.n_assets()) / double(t_obs);
    rec.q0 = w_hat.dot(model.covariance() * w_hat) / truth.variance;
    rec.in_sample_variance = w_hat.dot(est.cov_hat * w_hat);
    rec.in_sample_ratio = rec.in_sample_variance / truth.variance;
    rec.target_return = truth.target_return;
    rec.mode = mode;
    return rec;
}

/// One full Monte Carlo trial from a fresh seed-keyed sample.
inline TrialRecord run_trial(const MarketModel& model, int t_obs, double target_return,
                             Mode mode, std::uint64_t seed,
                             Divisor divisor = Divisor::T) {
    if (t_obs < min_t_obs(mode, model.n_assets())) {
        throw std::invalid_argument("t_obs too small for the requested mode");
    }
    const SampleEstimators est = estimate(generate(model, t_obs, seed), divisor);
    return run_trial(model, est, t_obs, target_return, mode, seed);
}

/// Per-r aggregates of a sweep.
struct SweepPoint {
    double r_requested = 0.0;
    int t_obs = 0;
    double r_effective = 0.0;  // n_assets / t_obs
    double mean_q0 = 0.0;
    double se_q0 = 0.0;
    double mean_in_ratio = 0.0;
    double se_in_ratio = 0.0;
    int n_done = 0;
    int n_skipped = 0;
    int n_q0_below_one = 0;  // diagnostic: q0 >= 1 can fail in full mode
};

struct SweepResult {
    std::string family_label;
    double target_return = 0.0;
    Mode mode = Mode::full_markowitz;
    int n_assets = 0;
    int n_trials = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> r_grid;
    std::vector<SweepPoint> points;
};

struct SweepOptions {
    Divisor divisor = Divisor::T;
    SingularPolicy policy = SingularPolicy::skip_and_count;
    int threads = 1;
};

namespace detail {

/// Kahan-compensated sum over a fixed index order.
inline double kahan_sum(const std::vector<double>& xs) {
    double sum = 0.0, comp = 0.0;
    for (const double x : xs) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

inline void mean_se(const std::vector<double>& xs, double& mean, double& se) {
    const std::size_t n = xs.size();
    if (n == 0) {
        mean = se = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    mean = kahan_sum(xs) / double(n);
    if (n < 2) {
        se = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
    se = std::sqrt(kahan_sum(sq) / double(n - 1)) / std::sqrt(double(n));
}

}  // namespace detail

/// Sweep the aspect ratio r = N/T. For each grid value, T = round(N/r) and
/// n_trials independent trials run with seeds base_seed XOR trial_index.
/// Singular trials follow the policy: abort rethrows, skip_and_count
/// drops them and reports the count.
inline SweepResult run_sweep(const CovarianceFamily& family, const MeanSpec& means,
                             int n_assets, const std::vector<double>& r_grid,
                             double target_return, Mode mode, int n_trials,
                             std::uint64_t base_seed, const SweepOptions& opts = {}) {
    if (n_trials < 2) throw std::invalid_argument("n_trials must be at least 2");
    if (r_grid.empty()) throw std::invalid_argument("r_grid must not be empty");
    const MarketModel model = make_family(family, n_assets, means);

    SweepResult result;
    result.family_label = family.label();
    result.mode = mode;
    result.n_assets = n_assets;
    result.n_trials = n_trials;
    result.base_seed = base_seed;
    result.r_grid = r_grid;
    result.target_return =
        (mode == Mode::full_markowitz) ? target_return
                                       : solve_global_min(model, 1.0).target_return;

    for (const double r : r_grid) {
        if (!(r > 0.0 && r < 1.0)) {
            throw std::invalid_argument("every r in the grid must lie in (0,1)");
        }
        const int t_obs = int(std::llround(double(n_assets) / r));
        if (t_obs < min_t_obs(mode, n_assets)) {
            throw std::invalid_argument("r too close to 1: t_obs below the feasible minimum");
        }

        std::vector<std::optional<TrialRecord>> records(n_trials);
        std::exception_ptr failure;
        std::mutex failure_mutex;

        auto worker = [&](int begin, int end) {
            for (int k = begin; k < end; ++k) {
                try {
                    records[k] = run_trial(model, t_obs, target_return, mode,
                                           base_seed ^ std::uint64_t(k), opts.divisor);
                } catch (const SingularSampleCovariance&) {
                    if (opts.policy == SingularPolicy::abort) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                    records[k] = std::nullopt;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };

        const int threads = std::max(1, std::min(opts.threads, n_trials));
        if (threads == 1) {
            worker(0, n_trials);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(threads);
            const int chunk = (n_trials + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                const int begin = t * chunk;
                const int end = std::min(n_trials, begin + chunk);
                if (begin < end) pool.emplace_back(worker, begin, end);
            }
            for (auto& th : pool) th.join();
        }
        if (failure) std::rethrow_exception(failure);

        SweepPoint point;
        point.r_requested = r;
        point.t_obs = t_obs;
        point.r_effective = double(n_assets) / double(t_obs);
        std::vector<double> q0s, ratios;
        q0s.reserve(n_trials);
        ratios.reserve(n_trials);
        for (const auto& rec : records) {
            if (!rec) {
                ++point.n_skipped;
                continue;
            }
            q0s.push_back(rec->q0);
            ratios.push_back(rec->in_sample_ratio);
            if (rec->q0 < 1.0) ++point.n_q0_below_one;
        }
        point.n_done = int(q0s.size());
        detail::mean_se(q0s, point.mean_q0, point.se_q0);
        detail::mean_se(ratios, point.mean_in_ratio, point.se_in_ratio);
        result.points.push_back(std::move(point));
    }
    return result;
}

/// Identical-shape single-r sweeps for every (family, target) cell, all
/// with the same base seed so cells share their random numbers and differ
/// only through the model.
inline std::vector<SweepResult> universality_battery(
    int n_assets, double r, const std::vector<CovarianceFamily>& families,
    const MeanSpec& means, const std::vector<double>& targets, Mode mode, int n_trials,
    std::uint64_t base_seed, const SweepOptions& opts = {}) {
    if (families.size() < 2 && targets.size() < 2) {
        throw std::invalid_argument("universality needs at least 2 families or 2 targets");
    }
    std::vector<SweepResult> cells;
    cells.reserve(families.size() * targets.size());
    for (const auto& family : families) {
        for (const double target : targets) {
            cells.push_back(run_sweep(family, means, n_assets, {r}, target, mode, n_trials,
                                      base_seed, opts));
        }
    }
    return cells;
}

struct DivergenceFit {
    double slope = 0.0;      // expected 1 against log(1/(1-r))
    double intercept = 0.0;  // expected 0
    std::vector<double> pointwise_rel_error;  // |mean_q0 (1-r) - 1| per point
};

/// Least-squares fit of log(mean_q0) against log(1/(1-r)) over the grid
/// points with r <= 0.95. Needs at least 4 usable points.
inline DivergenceFit divergence_fit(const SweepResult& sweep) {
    std::vector<double> xs, ys;
    DivergenceFit fit;
    for (const auto& p : sweep.points) {
        if (!(p.r_effective > 0.0 && p.r_effective <= 0.95)) continue;
        if (!(p.mean_q0 > 0.0) || !std::isfinite(p.mean_q0)) continue;
        xs.push_back(-std::log1p(-p.r_effective));  // log(1/(1-r))
        ys.push_back(std::log(p.mean_q0));
        fit.pointwise_rel_error.push_back(std::abs(p.mean_q0 * (1.0 - p.r_effective) - 1.0));
    }
    if (xs.size() < 4) {
        throw InsufficientPoints("divergence fit needs >= 4 grid points with r in (0, 0.95]");
    }
    const double n = double(xs.size());
    const double xbar = detail::kahan_sum(xs) / n;
    const double ybar = detail::kahan_sum(ys) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
    }
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    return fit;
}

}  // namespace mvest
