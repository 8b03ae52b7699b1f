#pragma once

// Experiment configuration: a flat key = value file with '#' comments.
// Matrices are bracketed, rows separated by ';', entries by ','.  The value
// 'e' is accepted for camera.base.  Parsing collects every problem it can
// find and reports them in a single error so a bad file round-trips once.
//
//   system.A = [2, 10; 0, 5]        # required, n x n
//   system.B = [1; 1]               # required, n x m
//   system.c = [0.894, 0.447]       # required, length n
//   setpoint.xd = [-0.2321, 0.0928] # required, length n
//   init.x0 = [0.0179, 0.3428]      # required, length n
//   pixels.offsets = [0, 0; ...]    # required, r x n
//   pixels.delta_y = 0.002          # bounds m = |y0| - d, M = |y0| + d
//   pixels.m = [...]  pixels.M = [...]   # or explicit bounds, length r
//   camera.base = e                 # default e
//   tolerance.epsilon = 0.05        # required
//   synthesis.epsilon_u = 1e-4
//   synthesis.gamma_tol = 1e-3
//   threshold.h_fraction = 0.9
//   sim.dt / sim.horizon / sim.zeno_band / sim.bisect_tol
//   sim.sample_stride / sim.window_fraction
//   sim.q0 = equal_to_y0 | midpoint | explicit
//   sim.q0_values = [...]           # required iff sim.q0 = explicit

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evreg/estimator.hpp"
#include "evreg/linalg.hpp"
#include "evreg/plant.hpp"
#include "evreg/sim.hpp"

namespace evreg {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
  LtiPlant plant;
  Vector xd;
  Vector x0;
  std::vector<PixelBounds> bounds;
  double base = 2.718281828459045;
  double epsilon = 0.0;
  double epsilon_u = 1e-4;
  double gamma_tol = 1e-3;
  double h_fraction = 0.9;
  SimConfig sim;  // sim.h and sim.base are filled in by the pipeline
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_number(const std::string& s, double& out) {
  try {
    size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

inline bool parse_matrix(const std::string& s, Matrix& out,
                         std::string& problem) {
  const std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
    problem = "expected [ ... ]";
    return false;
  }
  const std::string inner = t.substr(1, t.size() - 2);
  std::vector<std::vector<double>> rows;
  std::stringstream rs(inner);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> vals;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) {
      double v;
      if (!parse_number(trim(cell), v)) {
        problem = "bad number '" + trim(cell) + "'";
        return false;
      }
      vals.push_back(v);
    }
    if (vals.empty()) {
      problem = "empty row";
      return false;
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) {
    problem = "empty matrix";
    return false;
  }
  const size_t cols = rows.front().size();
  for (const auto& rr : rows) {
    if (rr.size() != cols) {
      problem = "ragged rows";
      return false;
    }
  }
  out.resize(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
  }
  return true;
}

// A vector value may be written as a single row or a single column.
inline bool parse_vector(const std::string& s, Vector& out,
                         std::string& problem) {
  Matrix m;
  if (!parse_matrix(s, m, problem)) return false;
  if (m.rows() != 1 && m.cols() != 1) {
    problem = "expected a single row or column";
    return false;
  }
  out = m.rows() == 1 ? Vector(m.row(0).transpose()) : Vector(m.col(0));
  return true;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::string> problems;
  std::map<std::string, std::string> kv;
  {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        problems.push_back("line " + std::to_string(lineno) +
                           ": expected key = value");
        continue;
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) {
        problems.push_back("line " + std::to_string(lineno) +
                           ": empty key or value");
        continue;
      }
      if (kv.count(key)) {
        problems.push_back("duplicate key '" + key + "'");
        continue;
      }
      kv[key] = value;
    }
  }

  static const std::set<std::string> known = {
      "system.A",          "system.B",        "system.c",
      "setpoint.xd",       "init.x0",         "pixels.offsets",
      "pixels.delta_y",    "pixels.m",        "pixels.M",
      "camera.base",       "tolerance.epsilon",
      "synthesis.epsilon_u", "synthesis.gamma_tol",
      "threshold.h_fraction",
      "sim.dt",            "sim.horizon",     "sim.zeno_band",
      "sim.bisect_tol",    "sim.sample_stride",
      "sim.window_fraction", "sim.q0",        "sim.q0_values"};
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!known.count(key)) problems.push_back("unknown key '" + key + "'");
  }

  const auto has = [&](const std::string& k) { return kv.count(k) > 0; };
  const auto get_matrix = [&](const std::string& k, Matrix& out) {
    std::string problem;
    if (!detail::parse_matrix(kv.at(k), out, problem)) {
      problems.push_back(k + ": " + problem);
      return false;
    }
    return true;
  };
  const auto get_vector = [&](const std::string& k, Vector& out) {
    std::string problem;
    if (!detail::parse_vector(kv.at(k), out, problem)) {
      problems.push_back(k + ": " + problem);
      return false;
    }
    return true;
  };
  const auto get_scalar = [&](const std::string& k, double& out) {
    if (!detail::parse_number(kv.at(k), out)) {
      problems.push_back(k + ": bad number '" + kv.at(k) + "'");
      return false;
    }
    return true;
  };

  ExperimentConfig cfg;
  Matrix a, b, offsets;
  Vector c;
  bool have_a = false, have_b = false, have_c = false, have_off = false;
  for (const char* req : {"system.A", "system.B", "system.c", "setpoint.xd",
                          "init.x0", "pixels.offsets", "tolerance.epsilon"}) {
    if (!has(req)) problems.push_back(std::string("missing required key '") +
                                      req + "'");
  }
  if (has("system.A")) have_a = get_matrix("system.A", a);
  if (has("system.B")) have_b = get_matrix("system.B", b);
  if (has("system.c")) have_c = get_vector("system.c", c);
  Vector xd, x0;
  bool have_xd = has("setpoint.xd") && get_vector("setpoint.xd", xd);
  bool have_x0 = has("init.x0") && get_vector("init.x0", x0);
  if (has("pixels.offsets")) have_off = get_matrix("pixels.offsets", offsets);

  if (have_a && a.rows() != a.cols()) {
    problems.push_back("system.A must be square");
    have_a = false;
  }
  const Eigen::Index n = have_a ? a.rows() : -1;
  if (have_a) {
    if (have_b && b.rows() != n) problems.push_back("system.B must have n rows");
    if (have_c && c.size() != n) problems.push_back("system.c must have n entries");
    if (have_xd && xd.size() != n) problems.push_back("setpoint.xd must have n entries");
    if (have_x0 && x0.size() != n) problems.push_back("init.x0 must have n entries");
    if (have_off && offsets.cols() != n) {
      problems.push_back("pixels.offsets must have n columns");
      have_off = false;
    }
  }
  const Eigen::Index r = have_off ? offsets.rows() : -1;

  if (has("camera.base")) {
    if (detail::trim(kv.at("camera.base")) == "e") {
      cfg.base = 2.718281828459045;
    } else if (double v; detail::parse_number(kv.at("camera.base"), v)) {
      if (v > 1.0) {
        cfg.base = v;
      } else {
        problems.push_back("camera.base must be > 1");
      }
    } else {
      problems.push_back("camera.base: expected a number or 'e'");
    }
  }
  if (has("tolerance.epsilon") && get_scalar("tolerance.epsilon", cfg.epsilon) &&
      !(cfg.epsilon > 0.0)) {
    problems.push_back("tolerance.epsilon must be > 0");
  }
  if (has("synthesis.epsilon_u") &&
      get_scalar("synthesis.epsilon_u", cfg.epsilon_u) && !(cfg.epsilon_u > 0.0)) {
    problems.push_back("synthesis.epsilon_u must be > 0");
  }
  if (has("synthesis.gamma_tol") &&
      get_scalar("synthesis.gamma_tol", cfg.gamma_tol) &&
      !(cfg.gamma_tol > 0.0 && cfg.gamma_tol < 1.0)) {
    problems.push_back("synthesis.gamma_tol must lie in (0, 1)");
  }
  if (has("threshold.h_fraction") &&
      get_scalar("threshold.h_fraction", cfg.h_fraction) &&
      !(cfg.h_fraction > 0.0 && cfg.h_fraction <= 1.0)) {
    problems.push_back("threshold.h_fraction must lie in (0, 1]");
  }
  if (has("sim.dt") && get_scalar("sim.dt", cfg.sim.dt) && !(cfg.sim.dt > 0.0)) {
    problems.push_back("sim.dt must be > 0");
  }
  if (has("sim.horizon") && get_scalar("sim.horizon", cfg.sim.horizon) &&
      !(cfg.sim.horizon > 0.0)) {
    problems.push_back("sim.horizon must be > 0");
  }
  if (has("sim.zeno_band") && get_scalar("sim.zeno_band", cfg.sim.zeno_band) &&
      !(cfg.sim.zeno_band > 0.0)) {
    problems.push_back("sim.zeno_band must be > 0");
  }
  if (has("sim.bisect_tol") && get_scalar("sim.bisect_tol", cfg.sim.bisect_tol) &&
      !(cfg.sim.bisect_tol > 0.0)) {
    problems.push_back("sim.bisect_tol must be > 0");
  }
  if (has("sim.sample_stride")) {
    double v;
    if (get_scalar("sim.sample_stride", v)) {
      if (v >= 1.0 && v == std::floor(v)) {
        cfg.sim.sample_stride = static_cast<int>(v);
      } else {
        problems.push_back("sim.sample_stride must be a positive integer");
      }
    }
  }
  if (has("sim.window_fraction") &&
      get_scalar("sim.window_fraction", cfg.sim.window_fraction) &&
      !(cfg.sim.window_fraction > 0.0 && cfg.sim.window_fraction <= 1.0)) {
    problems.push_back("sim.window_fraction must lie in (0, 1]");
  }
  if (has("sim.q0")) {
    const std::string p = detail::trim(kv.at("sim.q0"));
    if (p == "equal_to_y0") {
      cfg.sim.q0_policy = Q0Policy::kEqualToOutput;
    } else if (p == "midpoint") {
      cfg.sim.q0_policy = Q0Policy::kMidpoint;
    } else if (p == "explicit") {
      cfg.sim.q0_policy = Q0Policy::kExplicit;
    } else {
      problems.push_back("sim.q0 must be equal_to_y0, midpoint or explicit");
    }
  }
  if (has("sim.q0_values")) {
    Vector v;
    if (get_vector("sim.q0_values", v)) {
      cfg.sim.q0_values.assign(v.data(), v.data() + v.size());
      if (r > 0 && v.size() != r) {
        problems.push_back("sim.q0_values must have one entry per pixel");
      }
    }
    if (cfg.sim.q0_policy != Q0Policy::kExplicit) {
      problems.push_back("sim.q0_values requires sim.q0 = explicit");
    }
  } else if (cfg.sim.q0_policy == Q0Policy::kExplicit) {
    problems.push_back("sim.q0 = explicit requires sim.q0_values");
  }

  // Luminosity bounds come either from a symmetric band around the initial
  // outputs or from explicit per-pixel vectors, never both.
  const bool band = has("pixels.delta_y");
  const bool explicit_mm = has("pixels.m") || has("pixels.M");
  if (band && explicit_mm) {
    problems.push_back("give pixels.delta_y or pixels.m/pixels.M, not both");
  } else if (!band && !explicit_mm) {
    problems.push_back("missing luminosity bounds: pixels.delta_y or pixels.m/pixels.M");
  }

  if (have_a && have_b && have_c && have_off) {
    cfg.plant.a = a;
    cfg.plant.b = b;
    cfg.plant.c = c;
    cfg.plant.offsets = offsets;
  } else {
    problems.push_back("system/pixel definition incomplete; cannot assemble plant");
  }
  if (have_xd) cfg.xd = xd;
  if (have_x0) cfg.x0 = x0;

  if (problems.empty() && band) {
    double dy = 0.0;
    if (get_scalar("pixels.delta_y", dy) && !(dy > 0.0)) {
      problems.push_back("pixels.delta_y must be > 0");
    }
    if (problems.empty()) {
      for (Eigen::Index i = 0; i < r; ++i) {
        const double y0 =
            std::abs(luminosity_output(cfg.plant, cfg.x0, static_cast<int>(i)));
        if (y0 - dy <= 0.0) {
          problems.push_back("pixels.delta_y: pixel " + std::to_string(i + 1) +
                             " would get a non-positive lower bound");
          break;
        }
        cfg.bounds.push_back({y0 - dy, y0 + dy});
      }
    }
  } else if (problems.empty() && explicit_mm) {
    Vector mv, Mv;
    const bool ok_m = has("pixels.m") && get_vector("pixels.m", mv);
    const bool ok_M = has("pixels.M") && get_vector("pixels.M", Mv);
    if (!has("pixels.m") || !has("pixels.M")) {
      problems.push_back("pixels.m and pixels.M must both be given");
    } else if (ok_m && ok_M) {
      if (mv.size() != r || Mv.size() != r) {
        problems.push_back("pixels.m and pixels.M must have one entry per pixel");
      } else {
        for (Eigen::Index i = 0; i < r; ++i) {
          if (!(mv(i) > 0.0) || !(Mv(i) >= mv(i))) {
            problems.push_back("pixels bounds: need 0 < m <= M at pixel " +
                               std::to_string(i + 1));
            break;
          }
          cfg.bounds.push_back({mv(i), Mv(i)});
        }
      }
    }
  }

  if (!problems.empty()) {
    std::string msg = "configuration rejected:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  cfg.sim.base = cfg.base;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace evreg
