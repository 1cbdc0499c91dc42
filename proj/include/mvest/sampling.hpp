#pragma once

// Finite Gaussian samples from a true model, and the sample estimators the
// estimated optimization consumes. Sample entry (i,t) is mu_i plus row i of
// D Z, where Z(i,t) is draw number i*T + t of the normal stream keyed by
// (seed, domain 0); identical (model, t_obs, seed) is bit-identical output.

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>

#include "mvest/errors.hpp"
#include "mvest/market_model.hpp"
#include "mvest/rng.hpp"

namespace mvest {

/// Philox domain of the sample-noise stream.
inline constexpr std::uint64_t kSampleDomain = 0;

struct SampleSet {
    Eigen::MatrixXd returns;  // N x T
    int n_assets = 0;
    int n_obs = 0;
    std::uint64_t seed = 0;
};

enum class Divisor { T, TMinus1 };

struct SampleEstimators {
    Eigen::VectorXd mean_hat;
    Eigen::MatrixXd cov_hat;
    Divisor divisor = Divisor::T;
};

inline SampleSet generate(const MarketModel& model, int t_obs, std::uint64_t seed) {
    if (t_obs < 2) throw std::invalid_argument("t_obs must be at least 2");
    const int n = model.n_assets();
    const rng::NormalStream stream(seed, kSampleDomain);
    Eigen::MatrixXd z(n, t_obs);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t base = std::uint64_t(i) * std::uint64_t(t_obs);
        for (int t = 0; t < t_obs; ++t) z(i, t) = stream(base + t);
    }
    SampleSet s;
    s.returns = model.cholesky_lower() * z;
    s.returns.colwise() += model.means();
    s.n_assets = n;
    s.n_obs = t_obs;
    s.seed = seed;
    return s;
}

/// Sample mean and centered covariance. Divisor T matches the convention
/// in which the in-sample factor is exactly (1-r); TMinus1 is the unbiased
/// finite-sample variant. The result is exactly symmetric.
inline SampleEstimators estimate(const SampleSet& sample, Divisor divisor = Divisor::T) {
    SampleEstimators est;
    est.divisor = divisor;
    est.mean_hat = sample.returns.rowwise().mean();
    Eigen::MatrixXd centered = sample.returns.colwise() - est.mean_hat;
    const double div =
        (divisor == Divisor::T) ? double(sample.n_obs) : double(sample.n_obs - 1);
    Eigen::MatrixXd m = (centered * centered.transpose()) / div;
    est.cov_hat = (m + m.transpose()) / 2.0;
    return est;
}

/// CSV dump: assets as rows, observations as columns.
inline void dump_csv(const SampleSet& sample, std::ostream& out) {
    out << "# N=" << sample.n_assets << " T=" << sample.n_obs << " seed=" << sample.seed
        << "\n";
    char buf[32];
    for (int i = 0; i < sample.n_assets; ++i) {
        for (int t = 0; t < sample.n_obs; ++t) {
            std::snprintf(buf, sizeof(buf), "%.17g", sample.returns(i, t));
            out << (t ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace mvest
