#pragma once

// Closed-form solution of the constrained variance minimization
//
//     min w' Sigma w   s.t.   sum_i w_i = budget,   mu' w = target
//
// for a known SPD covariance. Everything goes through Cholesky solves;
// the inverse covariance is never formed.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mvest/errors.hpp"
#include "mvest/market_model.hpp"

namespace mvest {

/// Grand sums of the inverse covariance against the ones vector and the
/// means: a = 1'S^-1 1, b = 1'S^-1 mu, c = mu'S^-1 mu.
struct AbcScalars {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double discriminant = 0.0;  // a*c - b*b, zero iff mu is collinear with ones

    bool degenerate() const { return !(discriminant > 1e-10 * a * c); }
};

struct PortfolioSolution {
    Eigen::VectorXd weights;
    double lambda = 0.0;  // budget multiplier
    double eta = 0.0;     // return multiplier
    double variance = 0.0;
    double target_return = 0.0;
};

struct FrontierPoint {
    double target_return = 0.0;
    double variance = 0.0;
    bool is_efficient = false;  // target above the apex B/A
};

namespace detail {

/// The two SPD solves shared by every closed-form operation.
struct AbcSolves {
    Eigen::VectorXd x;  // S^-1 1
    Eigen::VectorXd y;  // S^-1 mu
    AbcScalars abc;
};

inline AbcSolves abc_solves(const MarketModel& model) {
    AbcSolves s;
    s.x = model.solve_spd(Eigen::VectorXd::Ones(model.n_assets()));
    s.y = model.solve_spd(model.means());
    s.abc.a = s.x.sum();
    s.abc.b = s.y.sum();
    s.abc.c = model.means().dot(s.y);
    s.abc.discriminant = s.abc.a * s.abc.c - s.abc.b * s.abc.b;
    return s;
}

}  // namespace detail

/// Lower-triangular D with D D' = Sigma (pivot-checked at model build).
inline Eigen::MatrixXd cholesky_factor(const MarketModel& model) {
    return model.cholesky_lower();
}

inline AbcScalars compute_abc(const MarketModel& model) {
    return detail::abc_solves(model).abc;
}

/// Minimal variance attainable at `target_return`, for a given budget.
/// With budget 1 this is the efficient-frontier parabola
///   A/(AC-B^2) (mu - B/A)^2 + 1/A.
inline double frontier_variance(const AbcScalars& abc, double target_return,
                                double budget = 1.0) {
    return (abc.a * target_return * target_return -
            2.0 * abc.b * budget * target_return + abc.c * budget * budget) /
           abc.discriminant;
}

/// Closed-form constrained minimum (Lagrange multipliers through the two
/// SPD solves). Throws DegenerateReturns when AC - B^2 vanishes, i.e. the
/// means are collinear with the ones vector.
inline PortfolioSolution solve_exact(const MarketModel& model, double target_return,
                                     double budget) {
    if (budget == 0.0) throw std::invalid_argument("budget must be nonzero");
    const auto s = detail::abc_solves(model);
    if (s.abc.degenerate()) {
        throw DegenerateReturns("AC - B^2 is numerically zero: means are collinear with ones");
    }
    PortfolioSolution sol;
    sol.lambda = (s.abc.c * budget - s.abc.b * target_return) / s.abc.discriminant;
    sol.eta = (s.abc.a * target_return - s.abc.b * budget) / s.abc.discriminant;
    sol.weights = sol.lambda * s.x + sol.eta * s.y;
    sol.variance = frontier_variance(s.abc, target_return, budget);
    sol.target_return = target_return;
    return sol;
}

/// Budget-only special case: weights proportional to S^-1 1, variance
/// budget^2 / A. The return constraint is dropped (eta = 0).
inline PortfolioSolution solve_global_min(const MarketModel& model, double budget) {
    if (budget == 0.0) throw std::invalid_argument("budget must be nonzero");
    const Eigen::VectorXd x = model.solve_spd(Eigen::VectorXd::Ones(model.n_assets()));
    const double a = x.sum();
    PortfolioSolution sol;
    sol.lambda = budget / a;
    sol.eta = 0.0;
    sol.weights = sol.lambda * x;
    sol.variance = budget * budget / a;
    sol.target_return = model.means().dot(sol.weights);
    return sol;
}

/// Frontier parabola sampled on a grid of target returns (budget 1).
inline std::vector<FrontierPoint> frontier(const MarketModel& model,
                                           const std::vector<double>& return_grid) {
    const auto abc = compute_abc(model);
    if (abc.degenerate()) {
        throw DegenerateReturns("AC - B^2 is numerically zero: means are collinear with ones");
    }
    const double apex = abc.b / abc.a;
    std::vector<FrontierPoint> points;
    points.reserve(return_grid.size());
    for (const double mu : return_grid) {
        points.push_back({mu, frontier_variance(abc, mu), mu > apex});
    }
    return points;
}

/// Independent oracle: assemble and solve the dense (N+2)x(N+2) KKT system
///
///   [ Sigma  -1  -mu ] [ w   ]   [ 0      ]
///   [ 1'      0   0  ] [ lam ] = [ budget ]
///   [ mu'     0   0  ] [ eta ]   [ target ]
///
/// with full-pivot LU. Shares no code with solve_exact beyond the model.
inline PortfolioSolution brute_force_qp(const MarketModel& model, double target_return,
                                        double budget) {
    const int n = model.n_assets();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 2, n + 2);
    kkt.topLeftCorner(n, n) = model.covariance();
    kkt.block(0, n, n, 1) = -Eigen::VectorXd::Ones(n);
    kkt.block(0, n + 1, n, 1) = -model.means();
    kkt.block(n, 0, 1, n) = Eigen::RowVectorXd::Ones(n);
    kkt.block(n + 1, 0, 1, n) = model.means().transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 2);
    rhs[n] = budget;
    rhs[n + 1] = target_return;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) {
        throw SingularKkt("KKT system is numerically singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    PortfolioSolution out;
    out.weights = sol.head(n);
    out.lambda = sol[n];
    out.eta = sol[n + 1];
    out.variance = out.weights.dot(model.covariance() * out.weights);
    out.target_return = target_return;
    return out;
}

}  // namespace mvest
