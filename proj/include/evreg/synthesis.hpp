#pragma once

// Robust-control layer: assembles the generalized plant that models the
// event-based estimator as a multiplicative uncertainty on every pixel
// output, synthesizes a stabilizing output-feedback controller by two-Riccati
// gamma iteration, extracts the closed-loop gains needed by the small-gain
// argument, and converts the tolerated uncertainty into the largest usable
// event threshold.
//
// Plant partition (r pixels, n states, m inputs; disturbance w = (w1, w2)
// with w1 of size n*r acting through the pixel stack and w2 of size r acting
// directly on the measurements):
//
//   x'  = A x + B2 u                      (B1 = 0: disturbances enter only
//   zp  = [x; ...; x]  (+ eps_u * u rows)  through the measurement channel)
//   zbar= Czbar x + [Dzw1  I] w
//
// The eps_u rows regularize the control feedthrough so the synthesis
// equations are nonsingular; gains are always reported for the raw zp rows.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evreg/estimator.hpp"
#include "evreg/linalg.hpp"
#include "evreg/plant.hpp"
#include "evreg/state_space.hpp"

namespace evreg {

struct SynthesisError : std::runtime_error {
  explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

struct GeneralizedPlant {
  Matrix a;    // n x n
  Matrix b1;   // n x (n*r + r), identically zero
  Matrix b2;   // n x m
  Matrix c1;   // (n*r + m) x n, pixel stack over zero rows
  Matrix d11;  // zero
  Matrix d12;  // [0; eps_u I]
  Matrix c2;   // r x n, rows c'
  Matrix d21;  // [Dzw1  I]
  Vector d;    // r set-point luminosities c'(xd + dx_i)
  double eps_u;

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return b2.cols(); }
  Eigen::Index pixel_count() const { return c2.rows(); }
  Eigen::Index perf_rows() const { return states() * pixel_count(); }
  Eigen::Index dist_size() const { return perf_rows() + pixel_count(); }
};

inline GeneralizedPlant build_generalized_plant(const LtiPlant& plant,
                                                const Vector& xd,
                                                double eps_u = 1e-4) {
  validate_system(plant);
  if (xd.size() != plant.states()) {
    throw SynthesisError("build_generalized_plant: xd must have n entries");
  }
  if (plant.pixels() == 0) {
    throw SynthesisError("build_generalized_plant: need at least one pixel");
  }
  if (!(eps_u > 0.0)) {
    throw SynthesisError("build_generalized_plant: eps_u must be positive");
  }
  const Eigen::Index n = plant.states();
  const Eigen::Index m = plant.inputs();
  const Eigen::Index r = plant.pixels();

  GeneralizedPlant p;
  p.a = plant.a;
  p.b1 = Matrix::Zero(n, n * r + r);
  p.b2 = plant.b;
  p.c1 = Matrix::Zero(n * r + m, n);
  for (Eigen::Index i = 0; i < r; ++i) {
    p.c1.block(i * n, 0, n, n) = Matrix::Identity(n, n);
  }
  p.d11 = Matrix::Zero(n * r + m, n * r + r);
  p.d12 = Matrix::Zero(n * r + m, m);
  p.d12.bottomRows(m) = eps_u * Matrix::Identity(m, m);
  p.c2 = Matrix::Zero(r, n);
  p.d21 = Matrix::Zero(r, n * r + r);
  p.d = Vector(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    p.c2.row(i) = plant.c.transpose();
    p.d21.block(i, i * n, 1, n) = plant.c.transpose();
    p.d21(i, n * r + i) = 1.0;
    p.d(i) = plant.c.dot(xd + plant.offsets.row(i).transpose());
  }
  p.eps_u = eps_u;
  return p;
}

struct Controller {
  Matrix a;  // n x n
  Matrix b;  // n x r
  Matrix c;  // m x n
  Matrix d;  // m x r
  double gamma;
};

// Closed loop of the generalized plant with the controller u = K zbar.
// With raw = true the output map keeps only the n*r pixel-stack rows;
// otherwise the regularized rows are included (the objective the synthesis
// certifies).
inline StateSpace closed_loop(const GeneralizedPlant& p, const Controller& k,
                              bool raw = true) {
  const Eigen::Index n = p.states();
  const Eigen::Index nc = k.a.rows();
  StateSpace cl;
  cl.a = Matrix(n + nc, n + nc);
  cl.a << p.a + p.b2 * k.d * p.c2, p.b2 * k.c, k.b * p.c2, k.a;
  cl.b = Matrix(n + nc, p.dist_size());
  cl.b << p.b1 + p.b2 * k.d * p.d21, k.b * p.d21;
  if (raw) {
    cl.c = Matrix::Zero(p.perf_rows(), n + nc);
    cl.c.leftCols(n) = p.c1.topRows(p.perf_rows());
    cl.d = Matrix::Zero(p.perf_rows(), p.dist_size());
  } else {
    cl.c = Matrix(p.c1.rows(), n + nc);
    cl.c << p.c1 + p.d12 * k.d * p.c2, p.d12 * k.c;
    cl.d = p.d11 + p.d12 * k.d * p.d21;
  }
  return cl;
}

namespace detail {

struct RiccatiPair {
  Matrix x;
  Matrix y;
};

// Central controller for a gamma that passed the Riccati feasibility probe.
inline Controller central_controller(const GeneralizedPlant& p, double gamma,
                                     const RiccatiPair& pair) {
  const Eigen::Index n = p.states();
  const Matrix r1 = p.d12.transpose() * p.d12;
  const Matrix r2 = p.d21 * p.d21.transpose();
  const Matrix r1i = r1.partialPivLu().solve(Matrix::Identity(r1.rows(), r1.rows()));
  const Matrix r2i = r2.partialPivLu().solve(Matrix::Identity(r2.rows(), r2.rows()));
  const double g2 = gamma * gamma;

  const Matrix f = -r1i * p.b2.transpose() * pair.x;                  // m x n
  const Matrix l = -pair.y * p.c2.transpose() * r2i;                  // n x r
  const Matrix z = (Matrix::Identity(n, n) - (1.0 / g2) * pair.y * pair.x)
                       .partialPivLu()
                       .solve(Matrix::Identity(n, n));

  Controller k;
  k.a = p.a + (1.0 / g2) * (p.b1 * p.b1.transpose() * pair.x) + p.b2 * f +
        z * l * p.c2;
  k.b = -z * l;
  k.c = f;
  k.d = Matrix::Zero(p.inputs(), p.pixel_count());
  k.gamma = gamma;
  return k;
}

// One feasibility probe of the two-Riccati conditions at a given gamma.  The
// eigenvalue floors tolerate rounding noise on genuinely semidefinite
// solutions, so a stabilizing-branch solution that is negative but tiny in
// norm (it shrinks with gamma when B1 = 0) can slip through; the closing
// Hurwitz test on the assembled loop is what rejects those.
inline std::optional<RiccatiPair> gamma_feasible(const GeneralizedPlant& p,
                                                 double gamma) {
  const Matrix r1 = p.d12.transpose() * p.d12;
  const Matrix r2 = p.d21 * p.d21.transpose();
  const Matrix r1i = r1.partialPivLu().solve(Matrix::Identity(r1.rows(), r1.rows()));
  const Matrix r2i = r2.partialPivLu().solve(Matrix::Identity(r2.rows(), r2.rows()));
  const double g2 = gamma * gamma;
  try {
    const Matrix sx =
        p.b2 * r1i * p.b2.transpose() - (1.0 / g2) * (p.b1 * p.b1.transpose());
    const Matrix qx = p.c1.transpose() * p.c1;
    Matrix x = solve_care_general(p.a, sx, qx, /*require_hurwitz=*/true);
    const Matrix sy = p.c2.transpose() * r2i * p.c2 -
                      (1.0 / g2) * (p.c1.transpose() * p.c1);
    const Matrix qy = p.b1 * p.b1.transpose();
    Matrix y = solve_care_general(p.a.transpose(), sy, qy, /*require_hurwitz=*/true);
    const double floor_x = -1e-8 * std::max(1.0, x.norm());
    const double floor_y = -1e-8 * std::max(1.0, y.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> ex(x), ey(y);
    if (ex.eigenvalues().minCoeff() < floor_x) return std::nullopt;
    if (ey.eigenvalues().minCoeff() < floor_y) return std::nullopt;
    double coupling = 0.0;
    for (const auto& ev : eigenvalues(x * y)) {
      coupling = std::max(coupling, std::abs(ev));
    }
    if (coupling >= g2) return std::nullopt;
    RiccatiPair pair{std::move(x), std::move(y)};
    const Controller k = central_controller(p, gamma, pair);
    if (!is_hurwitz(closed_loop(p, k, /*raw=*/true).a)) return std::nullopt;
    return pair;
  } catch (const LinalgError&) {
    return std::nullopt;
  }
}

}  // namespace detail

// Two-Riccati synthesis with bisection on gamma over [1e-6, 1e6] (log scale,
// 60 iterations).  Returns the central controller at the smallest feasible
// gamma inflated by gamma_tol, after verifying internal stability and the
// achieved closed-loop norm against an independent computation.
inline Controller synthesize_controller(const GeneralizedPlant& p,
                                        double gamma_tol = 1e-3) {
  if (!(gamma_tol > 0.0 && gamma_tol < 1.0)) {
    throw SynthesisError("synthesize_controller: gamma_tol must lie in (0, 1)");
  }
  // Regularity: the rank-condition checks reduce to D12 / D21 full rank and
  // no imaginary-axis plant poles (B1 = 0 makes the w-to-state path trivial).
  if (numerical_rank(p.d12) < p.d12.cols()) {
    throw SynthesisError("synthesize_controller: D12 must have full column rank");
  }
  if (numerical_rank(p.d21) < p.d21.rows()) {
    throw SynthesisError("synthesize_controller: D21 must have full row rank");
  }
  for (const auto& ev : eigenvalues(p.a)) {
    if (std::abs(ev.real()) < 1e-9 * std::max(1.0, std::abs(ev))) {
      throw SynthesisError(
          "synthesize_controller: plant has an imaginary-axis eigenvalue; the "
          "synthesis equations are singular there");
    }
  }

  double lo = 1e-6, hi = 1e6;
  if (detail::gamma_feasible(p, lo)) {
    hi = lo;  // already feasible at the bottom of the bracket
  } else {
    if (!detail::gamma_feasible(p, hi)) {
      throw SynthesisError(
          "synthesize_controller: infeasible for every gamma up to 1e6");
    }
    for (int it = 0; it < 60 && hi / lo > 1.0 + 1e-9; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (detail::gamma_feasible(p, mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
  }

  const double gamma = hi * (1.0 + gamma_tol);
  auto pair = detail::gamma_feasible(p, gamma);
  if (!pair) {
    throw SynthesisError(
        "synthesize_controller: feasibility lost at the returned gamma");
  }
  const Controller k = detail::central_controller(p, gamma, *pair);

  const StateSpace cl = closed_loop(p, k, /*raw=*/false);
  if (!is_hurwitz(cl.a)) {
    throw SynthesisError("synthesize_controller: closed loop is not stable");
  }
  const double achieved = hinf_norm(cl, gamma_tol);
  if (achieved > gamma * (1.0 + 2.0 * gamma_tol)) {
    throw SynthesisError("synthesize_controller: independent norm check failed: " +
                         std::to_string(achieved) + " > " +
                         std::to_string(gamma * (1.0 + 2.0 * gamma_tol)));
  }
  return k;
}

struct ClosedLoopGains {
  double g1_dc;    // ||T_{w1 -> zp}(0)||_2
  double g2_dc;    // ||T_{w2 -> zp}(0)||_2
  double g1_hinf;  // ||T_{w1 -> zp}||_inf
};

// DC and H-infinity gains of the uncertainty loop, cross-validated against
// the resolvent-form expression zp = Czp (I - E Czbar)^{-1} E (Dzw1 w1 + w2)
// with E(s) = (sI - A)^{-1} B K(s) evaluated near s = 0.
inline ClosedLoopGains closed_loop_gains(const GeneralizedPlant& p,
                                         const Controller& k) {
  const StateSpace cl = closed_loop(p, k, /*raw=*/true);
  if (!is_hurwitz(cl.a)) {
    throw SynthesisError("closed_loop_gains: closed loop is not stable");
  }
  const Eigen::Index nr = p.perf_rows();
  const Matrix g0 = dc_gain(cl);
  ClosedLoopGains out;
  out.g1_dc = spectral_norm(Matrix(g0.leftCols(nr)));
  out.g2_dc = spectral_norm(Matrix(g0.rightCols(p.pixel_count())));

  StateSpace cl1 = cl;
  cl1.b = cl.b.leftCols(nr);
  cl1.d = cl.d.leftCols(nr);
  out.g1_hinf = hinf_norm(cl1);

  // resolvent cross-check at s = 1e-9
  const double s = 1e-9;
  const Eigen::Index n = p.states();
  const Matrix ks =
      k.c * (s * Matrix::Identity(k.a.rows(), k.a.rows()) - k.a)
                .partialPivLu()
                .solve(k.b) +
      k.d;
  const Matrix e =
      (s * Matrix::Identity(n, n) - p.a).partialPivLu().solve(p.b2 * ks);
  const Matrix core =
      (Matrix::Identity(n, n) - e * p.c2).partialPivLu().solve(e);
  const Matrix czp = p.c1.topRows(nr);
  const Matrix dzw1 = p.d21.leftCols(nr);
  const double g1_res = spectral_norm(Matrix(czp * core * dzw1));
  const double g2_res = spectral_norm(Matrix(czp * core));
  const auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
  };
  if (rel(g1_res, out.g1_dc) > 1e-4 || rel(g2_res, out.g2_dc) > 1e-4) {
    throw SynthesisError(
        "closed_loop_gains: state-space DC gains disagree with the resolvent "
        "form beyond 1e-4 relative");
  }
  return out;
}

inline bool small_gain_check(const ClosedLoopGains& gains, double delta) {
  return gains.g1_hinf * delta < 1.0;
}

// Largest tolerable relative estimation error for a steady-state error budget
// epsilon: the final-value bound gives
//   delta = epsilon / (G2_dc ||D|| / sqrt(r) + epsilon G1_dc),
// additionally capped by the small-gain limit 1/G1_hinf, with a 0.999 safety
// factor.  D = 0 degenerates to the pure small-gain budget.
inline double max_uncertainty(const ClosedLoopGains& gains, const Vector& d,
                              Eigen::Index r, double epsilon) {
  if (!(epsilon > 0.0)) throw SynthesisError("max_uncertainty: epsilon must be > 0");
  if (r <= 0) throw SynthesisError("max_uncertainty: r must be positive");
  const double dnorm = d.norm();
  double delta;
  const double denom =
      gains.g2_dc * dnorm / std::sqrt(static_cast<double>(r)) +
      epsilon * gains.g1_dc;
  if (denom <= 0.0) {
    delta = std::numeric_limits<double>::infinity();
  } else {
    delta = epsilon / denom;
  }
  if (gains.g1_hinf > 0.0) delta = std::min(delta, 1.0 / gains.g1_hinf);
  if (!std::isfinite(delta)) {
    throw SynthesisError(
        "max_uncertainty: unbounded budget (zero gains and zero offsets)");
  }
  return 0.999 * delta;
}

// Final-value bound on the steady-state regulation error when every pixel's
// relative estimation error is at most delta: the inverse of the budget used
// by max_uncertainty.  Valid only below the DC small-gain limit.
inline double steady_state_bound(const ClosedLoopGains& gains, const Vector& d,
                                 Eigen::Index r, double delta) {
  if (r <= 0) throw SynthesisError("steady_state_bound: r must be positive");
  if (!(delta >= 0.0)) throw SynthesisError("steady_state_bound: delta must be >= 0");
  const double contraction = 1.0 - delta * gains.g1_dc;
  if (contraction <= 0.0) {
    throw SynthesisError(
        "steady_state_bound: delta reaches the DC small-gain limit");
  }
  return delta * gains.g2_dc * d.norm() / std::sqrt(static_cast<double>(r)) /
         contraction;
}

// Exact steady-state regulation error of the loop when pixel i reports
// z_i = (1 + delta_i) y_i, delta constant.  Builds the perturbed closed-loop
// matrices directly and solves for the equilibrium; used to validate the
// final-value bound above against ground truth.
inline double perturbed_steady_state_error(const GeneralizedPlant& p,
                                           const Controller& k,
                                           const Vector& delta) {
  const Eigen::Index n = p.states();
  const Eigen::Index nc = k.a.rows();
  const Eigen::Index r = p.pixel_count();
  if (delta.size() != r) {
    throw SynthesisError("perturbed_steady_state_error: delta must have r entries");
  }
  const Matrix c2p = (Vector::Ones(r) + delta).asDiagonal() * p.c2;
  Matrix acl(n + nc, n + nc);
  acl << p.a + p.b2 * k.d * c2p, p.b2 * k.c, k.b * c2p, k.a;
  if (!is_hurwitz(acl)) {
    throw SynthesisError(
        "perturbed_steady_state_error: perturbed loop is unstable");
  }
  Matrix bcl(n + nc, r);
  bcl << p.b2 * k.d, k.b;
  const Vector w = delta.cwiseProduct(p.d);
  const Vector xi = acl.partialPivLu().solve(Vector(-bcl * w));
  return xi.head(n).norm();
}

struct ThresholdReport {
  double h_star;
  double rho_star;
  double delta_z_star;
  std::vector<double> per_pixel_delta_z;  // delta_z at rho_star, per pixel
};

// Largest event threshold whose worst-pixel estimation error stays within
// delta_z_star:  h* = log_b sqrt(min_i(m_i/M_i) (1+delta)/(1-delta)), with
// the matching contrast ratio rho* = b^{-h*}.
inline ThresholdReport max_threshold(const std::vector<PixelBounds>& bounds,
                                     double delta_z_star, double base) {
  if (bounds.empty()) throw SynthesisError("max_threshold: no pixel bounds");
  if (!(base > 1.0)) throw SynthesisError("max_threshold: base must be > 1");
  if (!(delta_z_star > 0.0 && delta_z_star < 1.0)) {
    throw SynthesisError("max_threshold: delta_z_star must lie in (0, 1)");
  }
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& b : bounds) {
    validate_bounds(b);
    min_ratio = std::min(min_ratio, b.m / b.M);
  }
  const double arg = min_ratio * (1.0 + delta_z_star) / (1.0 - delta_z_star);
  if (!(arg > 1.0)) {
    throw SynthesisError(
        "max_threshold: delta_z_star does not exceed the worst-pixel delta_q; "
        "no positive threshold exists");
  }
  ThresholdReport rep;
  rep.h_star = std::log(std::sqrt(arg)) / std::log(base);
  rep.rho_star =
      std::sqrt((1.0 / min_ratio) * (1.0 - delta_z_star) / (1.0 + delta_z_star));
  rep.delta_z_star = delta_z_star;
  rep.per_pixel_delta_z.reserve(bounds.size());
  for (const auto& b : bounds) {
    const double r2 = rep.rho_star * rep.rho_star;
    rep.per_pixel_delta_z.push_back((b.M - b.m * r2) / (b.M + b.m * r2));
  }
  return rep;
}

}  // namespace evreg
