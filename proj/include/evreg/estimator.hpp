#pragma once

// Zero-order-hold luminosity estimator driven purely by pixel events.
//
// With luminosity bounds 0 < m <= y <= M and contrast ratio rho, the
// estimator keeps its own reference q_hat that mirrors every event jump of
// the true trigger reference q.  Because both jump identically, the ratio
// q_hat / q is a constant of the motion fixed by the initial guess; choosing
// q_hat(0) = 2mM / (M + m) makes the worst-case relative reference error
// delta_q = (M - m) / (M + m).  Scaling by
//   lambda = (M + m) rho / (M + m rho^2)
// centers the multiplicative sector rho*y <= q <= y/rho, so the held output
// z = lambda * q_hat satisfies |z - y| <= delta_z * y with
//   delta_z = (M - m rho^2) / (M + m rho^2)
// at all times, not just at event instants.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "evreg/dvs.hpp"

namespace evreg {

struct EstimatorError : std::runtime_error {
  explicit EstimatorError(const std::string& what) : std::runtime_error(what) {}
};

struct PixelBounds {
  double m;
  double M;
};

inline void validate_bounds(const PixelBounds& b) {
  if (!(b.m > 0.0) || !(b.M >= b.m)) {
    throw EstimatorError("pixel bounds must satisfy 0 < m <= M, got m=" +
                         std::to_string(b.m) + " M=" + std::to_string(b.M));
  }
}

struct EstimatorGains {
  double q_hat0;      // initial reference guess 2mM/(M+m)
  double delta_q;     // reference uncertainty (M-m)/(M+m)
  double lambda;      // output scaling (M+m)rho/(M+m rho^2)
  double delta_z;     // relative output error bound (M-m rho^2)/(M+m rho^2)
  double lambda_bar;  // lambda * q_hat0 = 2mM rho/(M+m rho^2)
};

inline EstimatorGains init_gains(const PixelBounds& bounds, double rho) {
  validate_bounds(bounds);
  if (!(rho > 0.0 && rho < 1.0)) {
    throw EstimatorError("init_gains: rho must lie in (0, 1)");
  }
  const double m = bounds.m, M = bounds.M;
  EstimatorGains g;
  g.q_hat0 = 2.0 * m * M / (M + m);
  g.delta_q = (M - m) / (M + m);
  g.lambda = (M + m) * rho / (M + m * rho * rho);
  g.delta_z = (M - m * rho * rho) / (M + m * rho * rho);
  g.lambda_bar = g.lambda * g.q_hat0;
  return g;
}

// Harmonic-mean special case m = M: lambda collapses to 2 rho / (1 + rho^2).
inline double lambda_harmonic(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw EstimatorError("lambda_harmonic: rho must lie in (0, 1)");
  }
  return 2.0 * rho / (1.0 + rho * rho);
}

struct EstimatorState {
  double q_hat;
};

inline EstimatorState init_state(const EstimatorGains& gains) {
  return EstimatorState{gains.q_hat0};
}

// Mirror one event: the estimator reference jumps exactly like the pixel's.
inline void update_estimate(EstimatorState& state, int polarity, double rho) {
  if (polarity != -1 && polarity != 1) {
    throw EstimatorError("update_estimate: polarity must be -1 or +1");
  }
  state.q_hat *= std::pow(rho, -polarity);
}

inline double output_estimate(const EstimatorGains& gains,
                              const EstimatorState& state) {
  return gains.lambda * state.q_hat;
}

// Measurement handed to the controller: z shifted by the pixel's set-point
// luminosity.
inline double shift_output(double z, double shift) { return z - shift; }

// Executable form of the sector containment rho*y <= q <= y/rho for positive
// luminosity, with multiplicative slack for accumulated rounding.
inline bool sector_check(double q, double y, double rho, double slack = 1e-9) {
  if (!(y > 0.0)) throw EstimatorError("sector_check: y must be positive");
  return q >= rho * y * (1.0 - slack) && q <= (y / rho) * (1.0 + slack);
}

struct RhoLambda {
  double rho;
  double lambda_bar;
};

// Smallest contrast ratio meeting a relative-error budget, closed form:
// feasibility of delta_z(rho) <= delta_bar requires
// rho >= sqrt((M/m)(1-delta_bar)/(1+delta_bar)).
inline RhoLambda optimal_rho_lambda(const PixelBounds& bounds, double delta_bar) {
  validate_bounds(bounds);
  if (!(delta_bar > 0.0 && delta_bar < 1.0)) {
    throw EstimatorError("optimal_rho_lambda: delta_bar must lie in (0, 1)");
  }
  const double m = bounds.m, M = bounds.M;
  const double delta_q = (M - m) / (M + m);
  if (delta_bar <= delta_q) {
    throw EstimatorError(
        "optimal_rho_lambda: infeasible, delta_bar <= delta_q = (M-m)/(M+m)");
  }
  const double rho = std::sqrt((M / m) * (1.0 - delta_bar) / (1.0 + delta_bar));
  const double lambda_bar = 2.0 * m * M * rho / (M + m * rho * rho);
  return RhoLambda{rho, lambda_bar};
}

// Independent grid-search oracle for the same optimization: minimize rho over
// (0,1) subject to max{1 - lambda_bar*rho/M, lambda_bar/(m*rho) - 1} <=
// delta_bar with lambda_bar ranging over (0, 2M].  The rho axis is quantized
// to `grid` points; at each rho the lambda_bar constraint set is the interval
// [M(1-delta_bar)/rho, m*rho*(1+delta_bar)] intersected with the axis range,
// and the reported lambda_bar is the interval midpoint snapped to the
// lambda_bar grid.  Certifies the closed forms above without using them.
inline RhoLambda brute_force_rho_lambda(const PixelBounds& bounds, double delta_bar,
                                        int grid = 1000) {
  validate_bounds(bounds);
  if (!(delta_bar > 0.0 && delta_bar < 1.0)) {
    throw EstimatorError("brute_force_rho_lambda: delta_bar must lie in (0, 1)");
  }
  if (grid < 1000) {
    throw EstimatorError("brute_force_rho_lambda: need at least 1000 grid points");
  }
  const double m = bounds.m, M = bounds.M;
  const double rho_step = 1.0 / static_cast<double>(grid);
  const double lam_step = 2.0 * M / static_cast<double>(grid);
  for (int i = 1; i < grid; ++i) {
    const double rho = static_cast<double>(i) * rho_step;
    const double lam_lo = std::max(M * (1.0 - delta_bar) / rho, lam_step);
    const double lam_hi = std::min(m * rho * (1.0 + delta_bar), 2.0 * M);
    if (lam_lo > lam_hi) continue;
    const double mid = 0.5 * (lam_lo + lam_hi);
    double snapped = std::round(mid / lam_step) * lam_step;
    snapped = std::clamp(snapped, lam_lo, lam_hi);
    return RhoLambda{rho, snapped};
  }
  throw EstimatorError(
      "brute_force_rho_lambda: infeasible, no rho in (0, 1) meets the budget "
      "(delta_bar <= (M-m)/(M+m))");
}

}  // namespace evreg
