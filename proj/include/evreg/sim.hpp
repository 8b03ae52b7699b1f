#pragma once

// Closed-loop hybrid simulation.  Between events the combined plant plus
// controller state flows linearly with a piecewise-constant input (the
// estimator outputs only change at events), so each segment is integrated
// exactly through one matrix exponential of the augmented system
//   d/dt [xi; v] = [[Acl, N], [0, 0]] [xi; v],   v = [zbar; 1],
// where the trailing 1 carries the constant drift left over when the
// set-point is not an exact equilibrium.  Event times are localized by
// bisection on the log-intensity guard.
//
// The luminosity model is extended to signed outputs by odd symmetry: the
// trigger compares magnitudes, and whenever a pixel output crosses zero the
// memorized value and its estimate flip sign together (their ratio, the
// quantity the estimator actually tracks, is preserved).  Inside a small
// band around zero the guard is suppressed, otherwise the log ratio blows up
// and the pixel fires without bound.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "evreg/dvs.hpp"
#include "evreg/estimator.hpp"
#include "evreg/linalg.hpp"
#include "evreg/plant.hpp"
#include "evreg/synthesis.hpp"

namespace evreg {

struct SimError : std::runtime_error {
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a single integration step needs more events than the cap,
// which in practice means the loop lost stability or the threshold is zero.
struct ZenoError : std::runtime_error {
  explicit ZenoError(const std::string& what) : std::runtime_error(what) {}
};

enum class Q0Policy {
  kEqualToOutput,  // camera memory starts exactly at the initial luminosity
  kMidpoint,       // starts at (m + M) / 2
  kExplicit,       // starts at user-provided values
};

struct SimConfig {
  double horizon = 5.0;
  double dt = 1e-4;
  double h = 0.1;                  // event threshold
  double base = 2.718281828459045; // log base of the trigger
  double zeno_band = 1e-4;         // |y| below this suppresses the guard
  double bisect_tol = 1e-10;       // event-time localization
  int max_events_per_step = 10000;
  int sample_stride = 1;           // record every k-th grid point
  double window_fraction = 0.2;    // trailing fraction used for tail stats
  Q0Policy q0_policy = Q0Policy::kEqualToOutput;
  std::vector<double> q0_values;   // used by kExplicit, one per pixel
};

struct EventRecord {
  double t;
  int pixel;  // zero-based
  int polarity;
  double q_before;
  double q_after;
};

struct SimSample {
  double t;
  Vector x;     // plant state in original coordinates
  Vector xc;    // controller state
  Vector u;     // control in original coordinates
  double err;   // ||x - xd||
  Vector y;     // pixel luminosities
  Vector z;     // estimator outputs lambda * qhat
  Vector zbar;  // shifted estimator outputs fed to the controller
  Vector q;     // memorized luminosities
};

struct SimResult {
  std::vector<EventRecord> events;
  std::vector<SimSample> samples;
  double err_max_tail = 0.0;
  double err_mean_tail = 0.0;
  double err_final = 0.0;
  Vector final_x;
  long sector_violations = 0;  // grid points where |q| left [rho|y|, |y|/rho]
  double max_ratio_drift = 0.0;  // worst relative drift of qhat/q per pixel
};

// Initial camera memory under the configured policy, sign-matched to the
// initial outputs and nudged off zero so the log guard is well defined.
inline Vector initial_memory(const LtiPlant& plant, const Vector& x0,
                             const std::vector<PixelBounds>& bounds,
                             const SimConfig& cfg) {
  const Eigen::Index r = plant.pixels();
  if (static_cast<Eigen::Index>(bounds.size()) != r) {
    throw SimError("initial_memory: need one luminosity bound pair per pixel");
  }
  const auto sgn = [](double v) { return v < 0.0 ? -1.0 : 1.0; };
  Vector q(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double y0 = luminosity_output(plant, x0, static_cast<int>(i));
    double q0;
    switch (cfg.q0_policy) {
      case Q0Policy::kEqualToOutput:
        q0 = y0;
        break;
      case Q0Policy::kMidpoint:
        q0 = sgn(y0) * 0.5 * (bounds[static_cast<size_t>(i)].m +
                              bounds[static_cast<size_t>(i)].M);
        break;
      case Q0Policy::kExplicit:
        if (static_cast<Eigen::Index>(cfg.q0_values.size()) != r) {
          throw SimError("initial_memory: q0_values must have one entry per pixel");
        }
        q0 = cfg.q0_values[static_cast<size_t>(i)];
        break;
      default:
        throw SimError("initial_memory: unknown q0 policy");
    }
    if (std::abs(q0) < cfg.zeno_band) q0 = sgn(q0) * cfg.zeno_band;
    q(i) = q0;
  }
  return q;
}

inline SimResult simulate(const LtiPlant& plant, const Vector& xd,
                          const Vector& x0, const Controller& k,
                          const std::vector<PixelBounds>& bounds,
                          const SimConfig& cfg) {
  validate_system(plant);
  const Eigen::Index n = plant.states();
  const Eigen::Index m = plant.inputs();
  const Eigen::Index r = plant.pixels();
  const Eigen::Index nc = k.a.rows();
  if (xd.size() != n || x0.size() != n) {
    throw SimError("simulate: xd and x0 must have n entries");
  }
  if (static_cast<Eigen::Index>(bounds.size()) != r) {
    throw SimError("simulate: need one luminosity bound pair per pixel");
  }
  if (k.b.cols() != r || k.c.rows() != m || k.d.rows() != m || k.d.cols() != r) {
    throw SimError("simulate: controller io sizes do not match the plant");
  }
  if (!(cfg.dt > 0.0) || !(cfg.horizon >= cfg.dt)) {
    throw SimError("simulate: need 0 < dt <= horizon");
  }
  if (!(cfg.zeno_band > 0.0) || !(cfg.bisect_tol > 0.0)) {
    throw SimError("simulate: zeno_band and bisect_tol must be positive");
  }
  if (!(cfg.window_fraction > 0.0 && cfg.window_fraction <= 1.0)) {
    throw SimError("simulate: window_fraction must lie in (0, 1]");
  }
  if (cfg.sample_stride < 1) throw SimError("simulate: sample_stride must be >= 1");
  const double rho = rho_from_threshold(cfg.h, cfg.base);

  std::vector<EstimatorGains> gains;
  gains.reserve(static_cast<size_t>(r));
  for (const auto& b : bounds) gains.push_back(init_gains(b, rho));

  Vector d(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    d(i) = plant.c.dot(xd + plant.offsets.row(i).transpose());
  }
  const Vector drift = drift_residual(plant, xd);
  const Vector shift = input_shift(plant, xd);

  const auto sgn = [](double v) { return v < 0.0 ? -1.0 : 1.0; };

  // Camera memory and its estimate, sign-extended to follow the output.
  Vector q = initial_memory(plant, x0, bounds, cfg);
  Vector qh(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    qh(i) = sgn(q(i)) * gains[static_cast<size_t>(i)].q_hat0;
  }
  Vector ratio0(r);
  for (Eigen::Index i = 0; i < r; ++i) ratio0(i) = qh(i) / q(i);

  // Augmented flow matrix; the exponential for a whole grid step is cached.
  const Eigen::Index ns = n + nc;
  const Eigen::Index na = ns + r + 1;
  Matrix flow = Matrix::Zero(na, na);
  flow.topLeftCorner(n, n) = plant.a;
  flow.block(0, n, n, nc) = plant.b * k.c;
  flow.block(n, n, nc, nc) = k.a;
  flow.block(0, ns, n, r) = plant.b * k.d;
  flow.block(n, ns, nc, r) = k.b;
  flow.block(0, ns + r, n, 1) = drift;
  const Matrix exp_dt = matrix_exponential(flow * cfg.dt);

  Vector xi = Vector::Zero(ns);
  xi.head(n) = x0 - xd;
  Vector zbar = Vector::Zero(r);
  const auto rebuild_zbar = [&]() {
    for (Eigen::Index i = 0; i < r; ++i) {
      zbar(i) = gains[static_cast<size_t>(i)].lambda * qh(i) - d(i);
    }
  };
  const auto pixel_output = [&](const Vector& state, Eigen::Index i) {
    return plant.c.dot(state.head(n)) + d(i);
  };
  const auto advance = [&](const Vector& state, double tau) {
    Vector aug(na);
    aug << state, zbar, 1.0;
    if (tau == cfg.dt) return Vector((exp_dt * aug).head(ns));
    return Vector((matrix_exponential(flow * tau) * aug).head(ns));
  };

  std::vector<bool> suppressed(static_cast<size_t>(r), false);
  // Band suppression and odd-symmetric sign tracking, applied at every
  // evaluation point before the guard is consulted.
  const auto sync_signs = [&](const Vector& state) {
    for (Eigen::Index i = 0; i < r; ++i) {
      const double yc = pixel_output(state, i);
      if (std::abs(yc) < cfg.zeno_band) {
        suppressed[static_cast<size_t>(i)] = true;
      } else {
        suppressed[static_cast<size_t>(i)] = false;
        if (sgn(yc) != sgn(q(i))) {
          q(i) = -q(i);
          qh(i) = -qh(i);
        }
      }
    }
    rebuild_zbar();
  };
  const auto crossed_pixel = [&](const Vector& state) -> Eigen::Index {
    for (Eigen::Index i = 0; i < r; ++i) {
      if (suppressed[static_cast<size_t>(i)]) continue;
      const double ratio = std::abs(pixel_output(state, i)) / std::abs(q(i));
      if (ratio >= 1.0 / rho || ratio <= rho) return i;
    }
    return -1;
  };

  SimResult out;
  const long steps = static_cast<long>(std::llround(cfg.horizon / cfg.dt));
  if (steps < 1) throw SimError("simulate: horizon shorter than one step");
  if (std::abs(static_cast<double>(steps) * cfg.dt - cfg.horizon) >
      1e-9 * std::max(1.0, cfg.horizon)) {
    throw SimError("simulate: horizon must be an integer multiple of dt");
  }
  const double tail_start = cfg.horizon * (1.0 - cfg.window_fraction) - 1e-12;
  long tail_count = 0;
  double tail_sum = 0.0;

  const auto fire = [&](Eigen::Index i, double t_now, int& fired) {
    const double ratio = std::abs(pixel_output(xi, i)) / std::abs(q(i));
    const int polarity = ratio >= 1.0 ? 1 : -1;
    const double factor = std::pow(rho, -polarity);
    const double before = q(i);
    q(i) *= factor;
    qh(i) *= factor;
    out.events.push_back({t_now, static_cast<int>(i), polarity, before, q(i)});
    rebuild_zbar();
    if (++fired >= cfg.max_events_per_step) {
      throw ZenoError("simulate: more than " +
                      std::to_string(cfg.max_events_per_step) +
                      " events inside one step at t=" + std::to_string(t_now));
    }
  };

  const auto record = [&](long step_index, double t_now) {
    // Tail statistics use every grid point regardless of the sample stride.
    const double err = xi.head(n).norm();
    if (t_now >= tail_start) {
      out.err_max_tail = std::max(out.err_max_tail, err);
      tail_sum += err;
      ++tail_count;
    }
    for (Eigen::Index i = 0; i < r; ++i) {
      const double drift_i = std::abs(qh(i) / q(i) - ratio0(i)) /
                             std::max(1.0, std::abs(ratio0(i)));
      out.max_ratio_drift = std::max(out.max_ratio_drift, drift_i);
      if (suppressed[static_cast<size_t>(i)]) continue;
      const double yc = pixel_output(xi, i);
      if (!sector_check(std::abs(q(i)), std::abs(yc), rho)) {
        ++out.sector_violations;
      }
    }
    if (step_index % cfg.sample_stride != 0 && step_index != steps) return;
    SimSample s;
    s.t = t_now;
    s.x = xi.head(n) + xd;
    s.xc = xi.tail(nc);
    s.u = k.c * xi.tail(nc) + k.d * zbar - shift;
    s.err = err;
    s.y = Vector(r);
    for (Eigen::Index i = 0; i < r; ++i) s.y(i) = pixel_output(xi, i);
    s.z = Vector(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      s.z(i) = gains[static_cast<size_t>(i)].lambda * qh(i);
    }
    s.zbar = zbar;
    s.q = q;
    out.samples.push_back(std::move(s));
  };

  for (long step = 0; step <= steps; ++step) {
    const double t_grid = cfg.dt * static_cast<double>(step);
    int fired = 0;
    sync_signs(xi);
    // Fire everything already past the guard before flowing or sampling.
    {
      Eigen::Index i;
      while ((i = crossed_pixel(xi)) >= 0) fire(i, t_grid, fired);
    }
    record(step, t_grid);
    if (step == steps) break;

    double remaining = cfg.dt;
    while (remaining > 0.0) {
      const Vector xi_end = advance(xi, remaining);
      // q is frozen along a flow segment, so the guard can be evaluated at
      // the candidate end state directly.
      if (crossed_pixel(xi_end) < 0) {
        xi = xi_end;
        break;
      }
      double lo = 0.0, hi = remaining;
      while (hi - lo > cfg.bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        if (crossed_pixel(advance(xi, mid)) >= 0) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      xi = advance(xi, hi);
      remaining -= hi;
      const double t_now = t_grid + (cfg.dt - remaining);
      sync_signs(xi);
      Eigen::Index i;
      while ((i = crossed_pixel(xi)) >= 0) fire(i, t_now, fired);
    }
  }

  out.err_final = xi.head(n).norm();
  out.final_x = xi.head(n) + xd;
  out.err_mean_tail = tail_count > 0 ? tail_sum / static_cast<double>(tail_count) : 0.0;
  return out;
}

}  // namespace evreg
