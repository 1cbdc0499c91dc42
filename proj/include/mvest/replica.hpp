#pragma once

// Closed-form results of the replica treatment of sample-based variance
// optimization in the high-dimensional limit (N, T -> infinity at fixed
// r = N/T < 1): the estimation-error law E[q0] = 1/(1-r), the in-sample
// factor (1-r), the replica-symmetric saddle point, and the spectrum of
// the Hessian at the saddle with its stability classifier.
//
// The replica count n is kept as a real parameter (physical limit n -> 0)
// so the integer-n numeric diagonalization and the n -> 0 evaluation share
// one code path. n enters the conjugate overlap and the Hessian through
// the factor beta*r*nu*n + 1; the direct overlap matrix carries no n.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mvest/errors.hpp"

namespace mvest {

struct ReplicaPrediction {
    double r = 0.0;
    double expected_q0 = 0.0;      // 1/(1-r)
    double in_sample_factor = 0.0; // 1-r
};

/// Estimation-error law for 0 < r < 1. Outside that interval the theory
/// has no finite prediction (r = 1 is the critical point) and the call
/// raises OutOfDomain.
inline ReplicaPrediction predict(double r) {
    if (!(r > 0.0 && r < 1.0)) {
        throw OutOfDomain("prediction requires 0 < r < 1");
    }
    ReplicaPrediction p;
    p.r = r;
    p.in_sample_factor = 1.0 - r;
    p.expected_q0 = 1.0 / p.in_sample_factor;
    return p;
}

/// Replica-symmetric saddle point: element values of the overlap matrix Q
/// and its conjugate. The conjugate off-diagonal is fixed by the
/// stationarity condition Qhat = beta (beta r Q + I)^(-1), which makes it
/// negative and places n inside beta*r*nu*n + 1.
struct SaddlePoint {
    double beta = 0.0;
    double r = 0.0;
    double nu = 0.0;         // nu(mu) = lim N sigma*^2(mu)
    double n_replicas = 0.0;
    double q_diag = 0.0;     // (nu + 1/beta) / (1-r)
    double q_offdiag = 0.0;  // nu / (1-r)
    double qhat_diag = 0.0;
    double qhat_offdiag = 0.0;
};

inline SaddlePoint saddle_point(double beta, double r, double nu, double n = 0.0) {
    if (!(beta > 0.0 && r > 0.0 && r < 1.0 && nu > 0.0 && n >= 0.0)) {
        throw OutOfDomain("saddle point requires beta > 0, 0 < r < 1, nu > 0, n >= 0");
    }
    SaddlePoint sp;
    sp.beta = beta;
    sp.r = r;
    sp.nu = nu;
    sp.n_replicas = n;
    sp.q_diag = (nu + 1.0 / beta) / (1.0 - r);
    sp.q_offdiag = nu / (1.0 - r);
    const double brn = beta * r * nu;
    sp.qhat_offdiag = -beta * (1.0 - r) * brn / (brn * n + 1.0);
    sp.qhat_diag = beta * (1.0 - r) + sp.qhat_offdiag;
    return sp;
}

/// The three distinct eigenvalues of the Hessian H^{ab,cd} = R^{ac} R^{bd}
/// at the saddle, with their multiplicities 1, 2(n-1) and (n-1)^2. All are
/// positive for r < 1, vanish together at r = 1 and turn negative beyond.
struct HessianSpectrum {
    double lambda1 = 0.0;  // beta^2 (1-r)^3 / (beta r nu n + 1)^2
    double lambda2 = 0.0;  // beta^2 (1-r)^3 / (beta r nu n + 1)
    double lambda3 = 0.0;  // beta^2 (1-r)^3
    double mult1 = 1.0;
    double mult2 = 0.0;  // 2(n-1)
    double mult3 = 0.0;  // (n-1)^2
    bool stable = false;
};

inline HessianSpectrum hessian_spectrum(double beta, double r, double nu, double n = 0.0) {
    if (!(beta > 0.0 && r > 0.0 && nu > 0.0 && n >= 0.0)) {
        throw OutOfDomain("hessian spectrum requires beta > 0, r > 0, nu > 0, n >= 0");
    }
    const double one_minus_r = 1.0 - r;
    const double base = beta * beta * one_minus_r * one_minus_r * one_minus_r;
    const double denom = beta * r * nu * n + 1.0;
    HessianSpectrum h;
    h.lambda1 = base / (denom * denom);
    h.lambda2 = base / denom;
    h.lambda3 = base;
    h.mult2 = 2.0 * (n - 1.0);
    h.mult3 = (n - 1.0) * (n - 1.0);
    h.stable = std::min({h.lambda1, h.lambda2, h.lambda3}) > 0.0;
    return h;
}

struct HessianCheckReport {
    int n = 0;
    std::vector<double> numeric;   // n^2 eigenvalues, ascending
    std::vector<double> analytic;  // expected multiset, ascending
    double max_rel_error = 0.0;
    bool multiplicities_ok = false;

    bool pass(double tol = 1e-9) const { return multiplicities_ok && max_rel_error < tol; }
};

/// Build the n^2 x n^2 Hessian from R^{ab} = rho + drho delta^{ab},
/// diagonalize it numerically and compare against the analytic eigenvalues
/// and multiplicities. Only meaningful at small integer n and r < 1.
inline HessianCheckReport hessian_numeric_check(double beta, double r, double nu, int n) {
    if (n < 2 || n > 6) throw std::invalid_argument("numeric check expects 2 <= n <= 6");
    if (!(beta > 0.0 && r > 0.0 && r < 1.0 && nu > 0.0)) {
        throw OutOfDomain("numeric check requires beta > 0, 0 < r < 1, nu > 0");
    }
    const double drho = beta * std::pow(1.0 - r, 1.5);
    const double brn = beta * r * nu;
    const double rho = -drho * brn / (brn * n + 1.0);

    Eigen::MatrixXd rmat = Eigen::MatrixXd::Constant(n, n, rho) +
                           drho * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd h(n * n, n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) h(a * n + b, c * n + d) = rmat(a, c) * rmat(b, d);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);

    HessianCheckReport rep;
    rep.n = n;
    rep.numeric.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + n * n);

    const auto spec = hessian_spectrum(beta, r, nu, double(n));
    // lambda1 <= lambda2 <= lambda3 because beta*r*nu*n + 1 >= 1
    rep.analytic.reserve(n * n);
    rep.analytic.insert(rep.analytic.end(), 1, spec.lambda1);
    rep.analytic.insert(rep.analytic.end(), 2 * (n - 1), spec.lambda2);
    rep.analytic.insert(rep.analytic.end(), (n - 1) * (n - 1), spec.lambda3);

    for (int i = 0; i < n * n; ++i) {
        const double denom = std::max(std::abs(rep.analytic[i]), 1e-300);
        rep.max_rel_error =
            std::max(rep.max_rel_error, std::abs(rep.numeric[i] - rep.analytic[i]) / denom);
    }

    // count numeric eigenvalues inside each analytic band; when bands merge
    // (e.g. rho ~ 0) the combined count is checked instead
    rep.multiplicities_ok = true;
    const double scale = std::abs(spec.lambda3);
    std::vector<std::pair<double, int>> bands = {{spec.lambda1, 1},
                                                 {spec.lambda2, 2 * (n - 1)},
                                                 {spec.lambda3, (n - 1) * (n - 1)}};
    std::vector<std::pair<double, int>> merged;
    for (const auto& b : bands) {
        if (!merged.empty() && std::abs(b.first - merged.back().first) < 1e-6 * scale) {
            merged.back().second += b.second;
        } else {
            merged.push_back(b);
        }
    }
    for (const auto& [value, count] : merged) {
        int found = 0;
        for (const double ev : rep.numeric) {
            if (std::abs(ev - value) < 1e-6 * scale) ++found;
        }
        if (found != count) rep.multiplicities_ok = false;
    }
    return rep;
}

}  // namespace mvest
