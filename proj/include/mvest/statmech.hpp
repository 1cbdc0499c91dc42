#pragma once

// Finite-temperature formulation of the constrained variance minimization:
// the portfolio weights as thermal averages of a Boltzmann ensemble whose
// Hamiltonian is half the portfolio variance plus external fields, under
// both equality constraints (budget 1). The free energy is closed-form;
// its field gradient reproduces the optimal weights at any temperature and
// twice its zero-temperature limit is the frontier variance.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "mvest/errors.hpp"
#include "mvest/market_model.hpp"
#include "mvest/markowitz.hpp"

namespace mvest {

struct ThermalState {
    double beta = 0.0;
    Eigen::VectorXd fields;
    double free_energy = 0.0;
    Eigen::VectorXd thermal_weights;  // dF/dh at the given fields; beta-free
};

namespace detail {

struct FieldTerms {
    AbcSolves s;
    Eigen::VectorXd sinv_h;  // S^-1 h (empty when h = 0)
    double u = 0.0;          // 1 + 1' S^-1 h
    double v = 0.0;          // target + mu' S^-1 h
};

inline FieldTerms field_terms(const MarketModel& model, double target_return,
                              const Eigen::VectorXd& fields) {
    FieldTerms t;
    t.s = abc_solves(model);
    if (t.s.abc.degenerate()) {
        throw DegenerateReturns("AC - B^2 is numerically zero: means are collinear with ones");
    }
    t.u = 1.0;
    t.v = target_return;
    if (fields.size() != 0) {
        if (fields.size() != model.n_assets()) {
            throw std::invalid_argument("field vector length must match n_assets");
        }
        if (!fields.isZero(0.0)) {
            t.sinv_h = model.solve_spd(fields);
            t.u += t.s.x.dot(fields);
            t.v += t.s.y.dot(fields);
        }
    }
    return t;
}

}  // namespace detail

/// Closed-form free energy F(beta, h) at budget 1. The additive
/// -(N/2beta) ln(2pi/beta) + (1/2beta) Tr ln Sigma - (1/2beta) ln(AC-B^2)
/// terms are kept as printed so 2 F(beta -> inf) equals the frontier
/// variance with no renormalization.
inline double free_energy(const MarketModel& model, double target_return,
                          const Eigen::VectorXd& fields, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    const auto t = detail::field_terms(model, target_return, fields);
    const double n = model.n_assets();
    double f = -(n / (2.0 * beta)) * std::log(2.0 * std::numbers::pi / beta) +
               model.trace_log() / (2.0 * beta) -
               std::log(t.s.abc.discriminant) / (2.0 * beta);
    if (t.sinv_h.size() != 0) {
        f -= 0.5 * fields.dot(t.sinv_h);
    }
    f += 0.5 *
         (t.s.abc.c * t.u * t.u - 2.0 * t.s.abc.b * t.u * t.v + t.s.abc.a * t.v * t.v) /
         t.s.abc.discriminant;
    return f;
}

/// Analytic dF/dh. Carries no beta dependence: the thermal average of the
/// weights is the same at every temperature.
inline Eigen::VectorXd free_energy_gradient(const MarketModel& model, double target_return,
                                            const Eigen::VectorXd& fields, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    const auto t = detail::field_terms(model, target_return, fields);
    Eigen::VectorXd g =
        (t.s.abc.c * t.u - t.s.abc.b * t.v) / t.s.abc.discriminant * t.s.x +
        (t.s.abc.a * t.v - t.s.abc.b * t.u) / t.s.abc.discriminant * t.s.y;
    if (t.sinv_h.size() != 0) g -= t.sinv_h;
    return g;
}

/// Thermal weights <w_i> = dF/dh at h = 0; equal to the exact optimal
/// weights at budget 1 for any beta.
inline Eigen::VectorXd thermal_weights(const MarketModel& model, double target_return,
                                       double beta) {
    return free_energy_gradient(model, target_return, Eigen::VectorXd(), beta);
}

inline ThermalState thermal_state(const MarketModel& model, double target_return,
                                  const Eigen::VectorXd& fields, double beta) {
    ThermalState st;
    st.beta = beta;
    st.fields = fields.size() ? fields : Eigen::VectorXd::Zero(model.n_assets());
    st.free_energy = free_energy(model, target_return, fields, beta);
    st.thermal_weights = free_energy_gradient(model, target_return, fields, beta);
    return st;
}

}  // namespace mvest
