#pragma once

// End-to-end orchestration: validate the configured system, synthesize the
// controller (independent of the event threshold), derive uncertainty and
// threshold budgets, pick the operating threshold, run the hybrid loop and
// judge the tail error against the bound that the budgets promise.

#include <future>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evreg/config.hpp"
#include "evreg/dvs.hpp"
#include "evreg/estimator.hpp"
#include "evreg/io.hpp"
#include "evreg/plant.hpp"
#include "evreg/sim.hpp"
#include "evreg/synthesis.hpp"

namespace evreg {

struct PipelineError : std::runtime_error {
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

struct PipelineOptions {
  std::vector<int> pixels;  // one-based ids; empty keeps every pixel
  double h_override = 0.0;  // > 0 replaces h_fraction * h_star
};

struct PipelineResult {
  LtiPlant plant;  // after pixel selection
  std::vector<PixelBounds> bounds;
  Controller controller;
  ClosedLoopGains gains;
  ThresholdReport threshold;
  Vector d;
  double delta_z_star = 0.0;
  double h_used = 0.0;
  double rho_used = 0.0;
  double delta_used = 0.0;  // worst-pixel estimation error at rho_used
  double err_bound = 0.0;   // steady-state bound implied by delta_used
  SimResult sim;
  bool pass = false;
  RunReport report{};
};

namespace detail {

inline std::vector<int> to_zero_based(const std::vector<int>& one_based,
                                      Eigen::Index r) {
  std::vector<int> idx;
  idx.reserve(one_based.size());
  for (int p : one_based) {
    if (p < 1 || p > r) {
      throw PipelineError("pixel id " + std::to_string(p) +
                          " outside 1.." + std::to_string(r));
    }
    idx.push_back(p - 1);
  }
  return idx;
}

// Everything up to and including the threshold choice; shared by the
// simulate and threshold-only entry points.
inline PipelineResult front_half(const ExperimentConfig& cfg,
                                 const PipelineOptions& opt) {
  PipelineResult res;
  if (opt.pixels.empty()) {
    res.plant = cfg.plant;
    res.bounds = cfg.bounds;
  } else {
    const auto idx = to_zero_based(opt.pixels, cfg.plant.pixels());
    res.plant = select_pixels(cfg.plant, idx);
    for (int i : idx) res.bounds.push_back(cfg.bounds[static_cast<size_t>(i)]);
  }
  validate_system(res.plant);
  if (!check_setpoint_stabilizable(res.plant, cfg.xd)) {
    throw PipelineError(
        "set-point is not reachable as a forced equilibrium of the system");
  }
  const Eigen::Index r = res.plant.pixels();
  const GeneralizedPlant p =
      build_generalized_plant(res.plant, cfg.xd, cfg.epsilon_u);
  res.controller = synthesize_controller(p, cfg.gamma_tol);
  res.gains = closed_loop_gains(p, res.controller);
  res.d = p.d;
  res.delta_z_star = max_uncertainty(res.gains, p.d, r, cfg.epsilon);
  res.threshold = max_threshold(res.bounds, res.delta_z_star, cfg.base);
  res.h_used = opt.h_override > 0.0 ? opt.h_override
                                    : cfg.h_fraction * res.threshold.h_star;
  res.rho_used = rho_from_threshold(res.h_used, cfg.base);
  res.delta_used = 0.0;
  for (const auto& b : res.bounds) {
    const double r2 = res.rho_used * res.rho_used;
    res.delta_used =
        std::max(res.delta_used, (b.M - b.m * r2) / (b.M + b.m * r2));
  }
  res.report = RunReport{res.controller.gamma, res.gains.g1_dc,
                         res.gains.g2_dc,      res.gains.g1_hinf,
                         res.delta_z_star,     res.threshold.h_star,
                         res.threshold.rho_star, res.d.norm(),
                         cfg.epsilon};
  return res;
}

}  // namespace detail

inline PipelineResult run_pipeline(const ExperimentConfig& cfg,
                                   const PipelineOptions& opt = {}) {
  PipelineResult res = detail::front_half(cfg, opt);
  const Eigen::Index r = res.plant.pixels();
  res.err_bound = steady_state_bound(res.gains, res.d, r, res.delta_used);

  SimConfig sc = cfg.sim;
  sc.h = res.h_used;
  sc.base = cfg.base;

  // The estimator guarantee needs the camera memory to start inside the
  // luminosity bounds; reject configurations that violate it up front.
  {
    const Vector q0 = initial_memory(res.plant, cfg.x0, res.bounds, sc);
    std::string msg;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double y0 =
          luminosity_output(res.plant, cfg.x0, static_cast<int>(i));
      const auto bad = validate_initialization(
          std::abs(q0(i)), std::abs(y0), res.bounds[static_cast<size_t>(i)].m,
          res.bounds[static_cast<size_t>(i)].M, res.rho_used);
      for (const auto& v : bad) {
        msg += "\n  pixel " + std::to_string(i + 1) + ": " + v;
      }
    }
    if (!msg.empty()) throw PipelineError("initial camera memory rejected:" + msg);
  }

  res.sim = simulate(res.plant, cfg.xd, cfg.x0, res.controller, res.bounds, sc);
  res.pass = small_gain_check(res.gains, res.delta_used) &&
             res.sim.err_max_tail <= res.err_bound;
  return res;
}

// Threshold-only front half of the pipeline (no simulation).
inline PipelineResult run_threshold(const ExperimentConfig& cfg,
                                    const PipelineOptions& opt = {}) {
  return detail::front_half(cfg, opt);
}

// Full pipeline over nested leading-pixel subsets, one job per subset.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                       std::vector<int> sizes = {}) {
  const int rtot = static_cast<int>(cfg.plant.pixels());
  if (sizes.empty()) {
    for (int s : {1, 3, 9}) {
      if (s <= rtot) sizes.push_back(s);
    }
    if (sizes.empty() || sizes.back() != rtot) sizes.push_back(rtot);
  }
  std::vector<std::future<PipelineResult>> jobs;
  jobs.reserve(sizes.size());
  for (int s : sizes) {
    if (s < 1 || s > rtot) {
      throw PipelineError("sweep size " + std::to_string(s) + " outside 1.." +
                          std::to_string(rtot));
    }
    jobs.push_back(std::async(std::launch::async, [&cfg, s]() {
      PipelineOptions opt;
      for (int i = 1; i <= s; ++i) opt.pixels.push_back(i);
      return run_pipeline(cfg, opt);
    }));
  }
  std::vector<SweepRow> rows;
  rows.reserve(sizes.size());
  for (size_t i = 0; i < jobs.size(); ++i) {
    PipelineResult res = jobs[i].get();
    rows.push_back({sizes[i], res.threshold.h_star, res.sim.err_max_tail,
                    res.sim.err_mean_tail,
                    static_cast<long>(res.sim.events.size())});
  }
  return rows;
}

struct VerifyCheck {
  std::string name;
  bool ok;
  std::string detail;
};

// Configuration-level cross-checks runnable without a full synthesis: each
// one tests a closed-form quantity against an independent restatement.
inline std::vector<VerifyCheck> verify_formulas(const ExperimentConfig& cfg) {
  std::vector<VerifyCheck> out;

  {
    VerifyCheck c{"system and set-point validity", true, ""};
    try {
      validate_system(cfg.plant);
      if (!check_setpoint_stabilizable(cfg.plant, cfg.xd)) {
        c.ok = false;
        c.detail = "set-point failed the forced-equilibrium test";
      }
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  }

  {
    // The estimation-error formula must equal both one-sided worst cases.
    VerifyCheck c{"estimator gain identities", true, ""};
    for (size_t i = 0; i < cfg.bounds.size() && c.ok; ++i) {
      for (double rho : {0.3, 0.6, 0.9}) {
        const EstimatorGains g = init_gains(cfg.bounds[i], rho);
        const double upper = 1.0 - g.lambda * (1.0 - g.delta_q) * rho;
        const double lower = g.lambda * (1.0 + g.delta_q) / rho - 1.0;
        if (std::abs(upper - g.delta_z) > 1e-12 ||
            std::abs(lower - g.delta_z) > 1e-12) {
          c.ok = false;
          c.detail = "pixel " + std::to_string(i + 1) + " at rho " +
                     std::to_string(rho);
        }
      }
    }
    out.push_back(std::move(c));
  }

  {
    // Closed-form contrast ratio against a grid search over the guard
    // constraints alone.
    VerifyCheck c{"contrast-ratio closed form vs grid", true, ""};
    for (size_t i = 0; i < cfg.bounds.size() && c.ok; ++i) {
      const EstimatorGains g0 = init_gains(cfg.bounds[i], 0.5);
      const double delta_bar = 0.5 * (g0.delta_q + 1.0);
      try {
        const RhoLambda exact = optimal_rho_lambda(cfg.bounds[i], delta_bar);
        const RhoLambda grid = brute_force_rho_lambda(cfg.bounds[i], delta_bar);
        const double dl = 2.0 * cfg.bounds[i].M / 1000.0;
        if (std::abs(exact.rho - grid.rho) > 1.0 / 1000.0 + 1e-12 ||
            std::abs(exact.lambda_bar - grid.lambda_bar) > dl + 1e-12) {
          c.ok = false;
          c.detail = "pixel " + std::to_string(i + 1);
        }
      } catch (const std::exception& e) {
        c.ok = false;
        c.detail = e.what();
      }
    }
    out.push_back(std::move(c));
  }

  {
    // Trigger boundary round trip at the exact guard values.
    VerifyCheck c{"trigger guard round trip", true, ""};
    const double h = 0.25;
    const double rho = rho_from_threshold(h, cfg.base);
    const double q = 1.3;
    // a hair of slack keeps the comparison off last-ulp log/pow noise
    const auto hit_hi = evaluate_trigger(q, q / rho * (1.0 + 1e-12), h, cfg.base);
    const auto hit_lo = evaluate_trigger(q, q * rho * (1.0 - 1e-12), h, cfg.base);
    const auto quiet = evaluate_trigger(q, q * (1.0 + 1e-6), h, cfg.base);
    if (!(hit_hi.triggered && hit_hi.polarity == 1 && hit_lo.triggered &&
          hit_lo.polarity == -1 && !quiet.triggered)) {
      c.ok = false;
      c.detail = "guard evaluation disagrees with the threshold definition";
    }
    out.push_back(std::move(c));
  }

  return out;
}

}  // namespace evreg
