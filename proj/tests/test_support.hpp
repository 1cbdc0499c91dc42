#pragma once

// Shared fixtures: deterministic random market models for property and
// acceptance tests. Sized in percent units (vols 10..30, means 1..10) so
// they look like annualized return data.

#include <Eigen/Dense>

#include <cstdint>

#include "mvest/market_model.hpp"
#include "mvest/rng.hpp"

namespace testsup {

inline double unit(std::uint64_t seed, std::uint64_t k) {
    return mvest::rng::unit_double(mvest::rng::philox4x64(seed, 900, k >> 2, 0)[k & 3]);
}

/// Deterministic "random" SPD model: one of three correlation shapes
/// (equicorrelation, Toeplitz, whitened Wishart + ridge), scaled by
/// per-asset volatilities, with positive non-collinear means.
inline mvest::MarketModel random_model(int n, std::uint64_t seed) {
    Eigen::MatrixXd corr(n, n);
    switch (seed % 3) {
        case 0: {
            const double rho = 0.6 * unit(seed, 0);
            corr = Eigen::MatrixXd::Constant(n, n, rho) +
                   (1.0 - rho) * Eigen::MatrixXd::Identity(n, n);
            break;
        }
        case 1: {
            const double rho = -0.5 + 1.3 * unit(seed, 0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) corr(i, j) = std::pow(rho, std::abs(i - j));
            break;
        }
        default: {
            const mvest::rng::NormalStream g(seed, 901);
            Eigen::MatrixXd w(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) w(i, j) = g(std::uint64_t(i) * n + j);
            Eigen::MatrixXd m = w * w.transpose() + double(n) * Eigen::MatrixXd::Identity(n, n);
            const Eigen::VectorXd d = m.diagonal().cwiseSqrt().cwiseInverse();
            corr = d.asDiagonal() * m * d.asDiagonal();
            break;
        }
    }
    Eigen::VectorXd vols(n), mu(n);
    for (int i = 0; i < n; ++i) {
        vols[i] = 10.0 + 20.0 * unit(seed, 16 + 2 * std::uint64_t(i));
        mu[i] = 1.0 + 9.0 * unit(seed, 17 + 2 * std::uint64_t(i));
    }
    Eigen::MatrixXd sigma = vols.asDiagonal() * corr * vols.asDiagonal();
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();
    return mvest::MarketModel(std::move(sigma), std::move(mu));
}

}  // namespace testsup
