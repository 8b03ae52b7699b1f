#pragma once

// Event-generation model of a single logarithmic pixel.  A pixel holds a
// trigger reference q and fires when the log-intensity gap
// tau = log_b(y) - log_b(q) reaches the threshold h in magnitude; the fired
// event carries polarity sign(tau) and the reference jumps to q * rho^{-p}
// with rho = b^{-h}, re-centering the partition cell around y.
//
// This model assumes strictly positive luminosity.  Signed outputs and the
// near-origin guard band are handled one level up, in the simulator.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace evreg {

struct DvsError : std::runtime_error {
  explicit DvsError(const std::string& what) : std::runtime_error(what) {}
};

struct DvsCamera {
  double h;    // event threshold, > 0
  double b;    // logarithm base, > 1
  double rho;  // contrast ratio b^{-h}, in (0, 1)
  int pixels;
};

struct PixelState {
  double q;  // trigger reference, positive under the camera model
};

struct RetinalEvent {
  double t;
  int pixel;
  int polarity;  // -1 or +1
};

inline double rho_from_threshold(double h, double b) {
  if (!(h > 0.0)) throw DvsError("rho_from_threshold: threshold h must be > 0");
  if (!(b > 1.0)) throw DvsError("rho_from_threshold: base b must be > 1");
  const double rho = std::pow(b, -h);
  if (!(rho > 0.0 && rho < 1.0)) {
    throw DvsError("rho_from_threshold: computed rho outside (0, 1)");
  }
  return rho;
}

inline DvsCamera make_camera(double h, double b, int pixels) {
  if (pixels <= 0) throw DvsError("make_camera: pixel count must be positive");
  return DvsCamera{h, b, rho_from_threshold(h, b), pixels};
}

struct TriggerResult {
  bool triggered;
  int polarity;  // 0 when not triggered
  double tau;    // log_b(y) - log_b(q)
};

inline TriggerResult evaluate_trigger(double q, double y, double h, double b) {
  if (!(y > 0.0)) {
    throw DvsError("evaluate_trigger: luminosity must be positive, got " +
                   std::to_string(y));
  }
  if (!(q > 0.0)) {
    throw DvsError("evaluate_trigger: trigger reference must be positive, got " +
                   std::to_string(q));
  }
  if (!(h > 0.0) || !(b > 1.0)) {
    throw DvsError("evaluate_trigger: need h > 0 and b > 1");
  }
  const double tau = std::log(y / q) / std::log(b);
  if (std::abs(tau) >= h) {
    return TriggerResult{true, tau >= 0.0 ? +1 : -1, tau};
  }
  return TriggerResult{false, 0, tau};
}

// Reference jump q <- q * rho^{-p}.  Two events of opposite polarity cancel.
inline void apply_event(PixelState& state, int polarity, double rho) {
  if (polarity != -1 && polarity != 1) {
    throw DvsError("apply_event: polarity must be -1 or +1");
  }
  if (!(rho > 0.0 && rho < 1.0)) {
    throw DvsError("apply_event: rho must lie in (0, 1)");
  }
  state.q *= std::pow(rho, -polarity);
}

/// Initialization contract for one pixel: q(0) and y(0) inside the luminosity
// bounds and no event pending at t = 0.  Returns the violations (empty when
// the assumption holds).
inline std::vector<std::string> validate_initialization(double q0, double y0,
                                                        double m, double big_m,
                                                        double rho) {
  std::vector<std::string> bad;
  if (!(m > 0.0) || !(big_m >= m)) {
    bad.push_back("bounds must satisfy 0 < m <= M");
    return bad;
  }
  if (!(q0 >= m && q0 <= big_m)) bad.push_back("q0 outside [m, M]");
  if (!(y0 >= m && y0 <= big_m)) bad.push_back("y0 outside [m, M]");
  if (!(rho > 0.0 && rho < 1.0)) {
    bad.push_back("rho outside (0, 1)");
    return bad;
  }
  if (!(y0 / q0 > rho && y0 / q0 < 1.0 / rho)) {
    bad.push_back("initial ratio y0/q0 already at or beyond the trigger guard");
  }
  return bad;
}

}  // namespace evreg
