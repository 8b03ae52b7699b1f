#pragma once

// Continuous-time LTI plant observed through an array of logarithmic pixels.
// Each pixel i senses the scalar luminosity y_i = c'(x + dx_i) where dx_i is
// a fixed spatial offset.  The regulation target is a set-point xd whose
// drift A*xd must be cancellable through the input channel.

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evreg/linalg.hpp"

namespace evreg {

struct PlantError : std::runtime_error {
  explicit PlantError(const std::string& what) : std::runtime_error(what) {}
};

struct LtiPlant {
  Matrix a;        // n x n
  Matrix b;        // n x m
  Vector c;        // n (luminosity direction, shared by all pixels)
  Matrix offsets;  // r x n, row i = dx_i'

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return b.cols(); }
  Eigen::Index pixels() const { return offsets.rows(); }
};

// Restrict the pixel array to a subset (0-based indices, order preserved).
inline LtiPlant select_pixels(const LtiPlant& plant, const std::vector<int>& idx) {
  LtiPlant out = plant;
  out.offsets.resize(static_cast<Eigen::Index>(idx.size()), plant.offsets.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= plant.pixels()) {
      throw PlantError("select_pixels: index " + std::to_string(idx[k]) +
                       " out of range for " + std::to_string(plant.pixels()) +
                       " pixels");
    }
    out.offsets.row(static_cast<Eigen::Index>(k)) = plant.offsets.row(idx[k]);
  }
  return out;
}

// Structural checks: dimensions, PBH stabilizability of (A, B) and PBH
// detectability of (A, c').  Throws with every violation listed.
inline void validate_system(const LtiPlant& plant) {
  std::vector<std::string> bad;
  const Eigen::Index n = plant.a.rows();
  if (plant.a.cols() != n) bad.push_back("A must be square");
  if (plant.b.rows() != n) bad.push_back("B must have n rows");
  if (plant.c.size() != n) bad.push_back("c must have n entries");
  if (plant.offsets.size() != 0 && plant.offsets.cols() != n) {
    bad.push_back("pixel offsets must have n columns");
  }
  if (bad.empty()) {
    using Cplx = std::complex<double>;
    for (const auto& ev : eigenvalues(plant.a)) {
      if (ev.real() < 0.0) continue;  // only closed right-half-plane modes matter
      ComplexMatrix pbh_ctrl(n, n + plant.b.cols());
      pbh_ctrl << plant.a.cast<Cplx>() - ev * ComplexMatrix::Identity(n, n),
          plant.b.cast<Cplx>();
      if (numerical_rank(pbh_ctrl) < n) {
        std::ostringstream os;
        os << "(A, B) not stabilizable: PBH rank deficiency at eigenvalue " << ev;
        bad.push_back(os.str());
      }
      ComplexMatrix pbh_obs(n + 1, n);
      pbh_obs << plant.a.cast<Cplx>() - ev * ComplexMatrix::Identity(n, n),
          plant.c.transpose().cast<Cplx>();
      if (numerical_rank(pbh_obs) < n) {
        std::ostringstream os;
        os << "(A, c') not detectable: PBH rank deficiency at eigenvalue " << ev;
        bad.push_back(os.str());
      }
    }
  }
  if (!bad.empty()) {
    std::string msg = "validate_system:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw PlantError(msg);
  }
}

inline Matrix controllability_matrix(const LtiPlant& plant) {
  const Eigen::Index n = plant.states();
  Matrix ctrb(n, n * plant.inputs());
  Matrix block = plant.b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * plant.inputs(), plant.inputs()) = block;
    block = plant.a * block;
  }
  return ctrb;
}

// A set-point is admissible when (1) its drift A*xd lies in range(B), so a
// constant input can hold it, and (2) xd is reachable, i.e. lies in the range
// of the controllability matrix.  The drift test uses a relative residual
// tolerance (default 1e-3) so set-points quoted to a few decimals still
// qualify; the reachability test keeps the strict 1e-8 rank convention.
inline bool check_setpoint_stabilizable(const LtiPlant& plant, const Vector& xd,
                                        double drift_tol = 1e-3) {
  if (xd.size() != plant.states()) {
    throw PlantError("check_setpoint_stabilizable: xd must have n entries");
  }
  const Vector drift = plant.a * xd;
  const Vector residual = drift - plant.b * (pseudo_inverse(plant.b) * drift);
  if (residual.norm() > drift_tol * std::max(1.0, drift.norm())) return false;

  const Matrix ctrb = controllability_matrix(plant);
  Matrix augmented(plant.states(), ctrb.cols() + 1);
  augmented << ctrb, xd;
  return numerical_rank(augmented) == numerical_rank(ctrb);
}

// Luminosity seen by one pixel in original coordinates.
inline double luminosity_output(const LtiPlant& plant, const Vector& x_original,
                                Eigen::Index pixel) {
  if (pixel < 0 || pixel >= plant.pixels()) {
    throw PlantError("luminosity_output: pixel index out of range");
  }
  return plant.c.dot(x_original + plant.offsets.row(pixel).transpose());
}

// Constant input that cancels the set-point drift.
inline Vector input_shift(const LtiPlant& plant, const Vector& xd) {
  return pseudo_inverse(plant.b) * (plant.a * xd);
}

// Map a shifted-coordinates control back to the original plant input:
// u_original = u - B^+ A xd.
inline Vector to_original_control(const LtiPlant& plant, const Vector& u,
                                  const Vector& xd) {
  return u - input_shift(plant, xd);
}

// Residual drift (I - B B^+) A xd left over when the set-point only
// approximately satisfies the range condition.  Exactly zero for exactly
// stabilizable set-points; the simulator carries it as a constant
// disturbance so rounded set-points are reproduced faithfully.
inline Vector drift_residual(const LtiPlant& plant, const Vector& xd) {
  const Vector drift = plant.a * xd;
  return drift - plant.b * (pseudo_inverse(plant.b) * drift);
}

}  // namespace evreg
