#pragma once

// Continuous-time LTI state-space container plus the frequency-domain
// queries the synthesis pipeline needs: DC gain and H-infinity norm.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "evreg/linalg.hpp"

namespace evreg {

struct StateSpace {
  Matrix a;  // n x n
  Matrix b;  // n x m
  Matrix c;  // p x n
  Matrix d;  // p x m

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return b.cols(); }
  Eigen::Index outputs() const { return c.rows(); }

  void validate() const {
    if (a.rows() != a.cols()) throw LinalgError("StateSpace: A must be square");
    if (b.rows() != a.rows()) throw LinalgError("StateSpace: B row mismatch");
    if (c.cols() != a.rows()) throw LinalgError("StateSpace: C column mismatch");
    if (d.rows() != c.rows() || d.cols() != b.cols()) {
      throw LinalgError("StateSpace: D must be p x m");
    }
  }
};

// G(s) = C (sI - A)^{-1} B + D at one complex frequency.
inline ComplexMatrix evaluate(const StateSpace& ss, std::complex<double> s) {
  ss.validate();
  const Eigen::Index n = ss.states();
  if (n == 0) return ss.d.cast<std::complex<double>>();
  ComplexMatrix resolvent =
      (s * ComplexMatrix::Identity(n, n) - ss.a.cast<std::complex<double>>());
  ComplexMatrix x = resolvent.partialPivLu().solve(ss.b.cast<std::complex<double>>());
  return ss.c.cast<std::complex<double>>() * x + ss.d.cast<std::complex<double>>();
}

// DC gain D - C A^{-1} B.  A must be Hurwitz for the limit to exist.
inline Matrix dc_gain(const StateSpace& ss) {
  ss.validate();
  if (ss.states() == 0) return ss.d;
  if (!is_hurwitz(ss.a)) {
    throw LinalgError("dc_gain: A is not Hurwitz, steady-state gain undefined");
  }
  return ss.d - ss.c * ss.a.partialPivLu().solve(ss.b);
}

namespace detail {

// True iff gamma is a singular value of G(jw) for some finite w, decided by
// imaginary-axis eigenvalues of the associated Hamiltonian.
inline bool gain_crossed(const StateSpace& ss, double gamma,
                         std::vector<double>* frequencies = nullptr) {
  const Eigen::Index n = ss.states();
  const Eigen::Index m = ss.inputs();
  const Eigen::Index p = ss.outputs();
  const Matrix r = ss.d.transpose() * ss.d - gamma * gamma * Matrix::Identity(m, m);
  const Matrix s = ss.d * ss.d.transpose() - gamma * gamma * Matrix::Identity(p, p);
  const Matrix ri = r.partialPivLu().solve(Matrix::Identity(m, m));
  const Matrix si = s.partialPivLu().solve(Matrix::Identity(p, p));
  const Matrix abar = ss.a + ss.b * ri * ss.d.transpose() * ss.c;
  Matrix h(2 * n, 2 * n);
  h << abar, -gamma * ss.b * ri * ss.b.transpose(),
      gamma * ss.c.transpose() * si * ss.c, -abar.transpose();
  double scale = 0.0;
  const auto eigs = eigenvalues(h);
  for (const auto& ev : eigs) scale = std::max(scale, std::abs(ev));
  scale = std::max(scale, 1.0);
  bool crossed = false;
  for (const auto& ev : eigs) {
    if (std::abs(ev.real()) < 1e-8 * scale) {
      crossed = true;
      if (frequencies && std::abs(ev.imag()) > 0) {
        frequencies->push_back(std::abs(ev.imag()));
      }
    }
  }
  return crossed;
}

}  // namespace detail

// H-infinity norm by Hamiltonian bisection, refined with singular-value
// probes at the crossing frequencies the Hamiltonian reveals.  A must be
// Hurwitz; rel_tol is the relative accuracy of the returned value.
inline double hinf_norm(const StateSpace& ss, double rel_tol = 1e-3) {
  ss.validate();
  if (ss.states() == 0 || ss.b.size() == 0 || ss.c.size() == 0) {
    return spectral_norm(ss.d);
  }
  if (!is_hurwitz(ss.a)) {
    throw LinalgError("hinf_norm: A is not Hurwitz");
  }

  const auto probe = [&](double w) {
    return spectral_norm(evaluate(ss, std::complex<double>(0.0, w)));
  };

  // Lower bound from frequency samples keyed to the pole layout.
  double lo = spectral_norm(ss.d);
  lo = std::max(lo, probe(0.0));
  double pole_max = 1.0;
  for (const auto& ev : eigenvalues(ss.a)) {
    pole_max = std::max(pole_max, std::abs(ev));
    if (std::abs(ev.imag()) > 1e-12) lo = std::max(lo, probe(std::abs(ev.imag())));
    lo = std::max(lo, probe(std::abs(ev)));
  }
  for (double w = 1e-3; w <= pole_max * 10.0; w *= 2.51188643150958) {
    lo = std::max(lo, probe(w));
  }
  if (lo <= 0.0) return 0.0;  // zero transfer function

  double hi = lo * (1.0 + 1e-6);
  int guard = 0;
  while (detail::gain_crossed(ss, hi)) {
    hi *= 2.0;
    if (++guard > 120) throw LinalgError("hinf_norm: failed to bracket the norm");
  }
  while (hi - lo > rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    std::vector<double> freqs;
    if (detail::gain_crossed(ss, mid, &freqs)) {
      lo = mid;
      for (double w : freqs) lo = std::max(lo, probe(w));
      if (lo >= hi) hi = lo * (1.0 + 0.5 * rel_tol);
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace evreg
