#pragma once

// Dense linear-algebra kernels used across the library: matrix exponential,
// eigenvalues, spectral norm, Moore-Penrose pseudo-inverse, Lyapunov and
// continuous algebraic Riccati solvers.  Everything is double precision and
// sized for control problems (tens of states, not thousands).

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace evreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct LinalgError : std::runtime_error {
  explicit LinalgError(const std::string& what) : std::runtime_error(what) {}
};

inline Matrix matrix_exponential(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw LinalgError("matrix_exponential: matrix must be square, got " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  return m.exp();
}

inline std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw LinalgError("eigenvalues: matrix must be square");
  }
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw LinalgError("eigenvalues: QR iteration failed to converge");
  }
  std::vector<std::complex<double>> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = es.eigenvalues()[i];
  return out;
}

inline double max_real_eigenvalue(const Matrix& m) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(m)) worst = std::max(worst, ev.real());
  return worst;
}

inline bool is_hurwitz(const Matrix& m) { return max_real_eigenvalue(m) < 0.0; }

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline double spectral_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<ComplexMatrix>(m).singularValues()(0);
}

// Moore-Penrose inverse by SVD truncation.  Singular values below
// rel_tol * sigma_max (plus an absolute floor scaled by machine epsilon)
// are treated as zero.
inline Matrix pseudo_inverse(const Matrix& m, double rel_tol = 1e-12) {
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff =
      std::max(rel_tol * sv(0),
               std::numeric_limits<double>::epsilon() *
                   static_cast<double>(std::max(m.rows(), m.cols())) * sv(0));
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Numerical rank against the 1e-8 * sigma_max convention used by the
// range/PBH tests in this library.
inline Eigen::Index numerical_rank(const Matrix& m, double rel_tol = 1e-8) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

inline Eigen::Index numerical_rank(const ComplexMatrix& m, double rel_tol = 1e-8) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

// Solves F'X + XF = W for symmetric W via the Kronecker-product linear
// system.  Only intended for the small refinement systems below.
inline Matrix solve_lyapunov(const Matrix& f, const Matrix& w) {
  const Eigen::Index n = f.rows();
  if (f.cols() != n || w.rows() != n || w.cols() != n) {
    throw LinalgError("solve_lyapunov: dimension mismatch");
  }
  // Column-stacked vec: vec(F'X) = (I (x) F') vec(X), vec(XF) = (F' (x) I) vec(X).
  Matrix kron = Matrix::Zero(n * n, n * n);
  const Matrix ft = f.transpose();
  for (Eigen::Index i = 0; i < n; ++i) kron.block(i * n, i * n, n, n) = ft;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      kron.block(i * n, k * n, n, n) += ft(i, k) * Matrix::Identity(n, n);
    }
  }
  Vector rhs(n * n);
  for (Eigen::Index col = 0; col < n; ++col) rhs.segment(col * n, n) = w.col(col);
  Vector sol = kron.fullPivLu().solve(rhs);
  Matrix x(n, n);
  for (Eigen::Index col = 0; col < n; ++col) x.col(col) = sol.segment(col * n, n);
  return 0.5 * (x + x.transpose());
}

namespace detail {

// Stabilizing solution of A'X + XA - XSX + Q = 0 through the matrix sign
// function of the Hamiltonian [[A, S], [Q, -A']] with determinant scaling,
// followed by Newton polish (each step one Lyapunov solve).  S and Q are
// symmetric; S may be indefinite, which the H-infinity central equations
// require.
inline Matrix solve_care_sign(const Matrix& a, const Matrix& s, const Matrix& q) {
  const Eigen::Index n = a.rows();
  Matrix h(2 * n, 2 * n);
  h << a, s, q, -a.transpose();

  Matrix z = h;
  const double p = static_cast<double>(2 * n);
  bool converged = false;
  for (int it = 0; it < 120; ++it) {
    const double det = std::abs(z.determinant());
    if (!std::isfinite(det) || det == 0.0) {
      throw LinalgError("solve_care: Hamiltonian sign iteration became singular "
                        "(likely imaginary-axis eigenvalues)");
    }
    const double ck = std::pow(det, -1.0 / p);
    z *= ck;
    Matrix z_next = z - 0.5 * (z - z.inverse());
    const double step = (z_next - z).norm();
    z = z_next;
    if (step <= 1e-13 * std::max(1.0, z.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw LinalgError("solve_care: sign iteration did not converge; the "
                      "Hamiltonian appears to have imaginary-axis eigenvalues");
  }

  // ker(Z + I) is spanned by [I; -X].
  Matrix w11 = z.topLeftCorner(n, n);
  Matrix w12 = z.topRightCorner(n, n);
  Matrix w21 = z.bottomLeftCorner(n, n);
  Matrix w22 = z.bottomRightCorner(n, n);
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << w12, w22 + Matrix::Identity(n, n);
  rhs << w11 + Matrix::Identity(n, n), w21;
  Eigen::JacobiSVD<Matrix> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(n - 1) <
      1e-12 * std::max(1.0, svd.singularValues()(0))) {
    throw LinalgError("solve_care: stable subspace is deficient; no stabilizing "
                      "solution");
  }
  Matrix x = svd.solve(rhs);
  x = 0.5 * (x + x.transpose());

  // Newton refinement on the Riccati residual.
  if (n <= 32) {
    for (int pass = 0; pass < 3; ++pass) {
      const Matrix f = a - s * x;
      const Matrix res =
          a.transpose() * x + x * a - x * s * x + q;
      if (res.norm() <= 1e-14 * (1.0 + x.norm()) * (1.0 + x.norm())) break;
      const Matrix dx = solve_lyapunov(f, -res);
      x += dx;
      x = 0.5 * (x + x.transpose());
    }
  }
  return x;
}

}  // namespace detail

// Stabilizing solution of the general-form CARE  A'X + XA - XSX + Q = 0.
// Used directly by the H-infinity synthesis where S can be indefinite.
// The closed-loop matrix A - SX is verified Hurwitz and the residual is
// checked against the library-wide contract.
inline Matrix solve_care_general(const Matrix& a, const Matrix& s, const Matrix& q,
                                 bool require_hurwitz = true) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || s.rows() != n || s.cols() != n || q.rows() != n ||
      q.cols() != n) {
    throw LinalgError("solve_care_general: dimension mismatch");
  }
  const Matrix s_sym = 0.5 * (s + s.transpose());
  const Matrix q_sym = 0.5 * (q + q.transpose());
  // Balance the quadratic and constant terms first: with X = beta Y the
  // equation becomes A'Y + YA - Y(beta S)Y + Q/beta = 0 and beta =
  // sqrt(|Q|/|S|) gives both scaled terms equal norms.  Residuals of a badly
  // scaled equation cannot even be evaluated below eps |S| |X|^2 in floating
  // point, so the sign solve, the Newton polish and the residual contract all
  // operate on the balanced form.
  const double sn = s_sym.norm();
  const double qn = q_sym.norm();
  const double beta = (sn > 0.0 && qn > 0.0) ? std::sqrt(qn / sn) : 1.0;
  const Matrix s_bal = beta * s_sym;
  const Matrix q_bal = q_sym / beta;
  Matrix y = detail::solve_care_sign(a, s_bal, q_bal);
  const Matrix res = a.transpose() * y + y * a - y * s_bal * y + q_bal;
  const double budget = 1e-8 * (1.0 + y.norm()) * (1.0 + y.norm());
  if (res.norm() > budget) {
    throw LinalgError("solve_care_general: residual " + std::to_string(res.norm()) +
                      " exceeds contract " + std::to_string(budget));
  }
  Matrix x = beta * y;
  // A - S X equals A - (beta S) Y, so the stability test is scale-free.
  if (require_hurwitz && !is_hurwitz(a - s_sym * x)) {
    throw LinalgError("solve_care_general: computed solution is not stabilizing");
  }
  return x;
}

// LQR-form CARE  A'X + XA - XBR^{-1}B'X + Q = 0 with R symmetric positive
// definite.
inline Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                         const Matrix& r) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw LinalgError("solve_care: A must be square");
  if (b.rows() != n) throw LinalgError("solve_care: B row count mismatch");
  if (q.rows() != n || q.cols() != n) throw LinalgError("solve_care: Q must be n x n");
  if (r.rows() != b.cols() || r.cols() != b.cols()) {
    throw LinalgError("solve_care: R must be m x m");
  }
  Eigen::LLT<Matrix> llt(0.5 * (r + r.transpose()));
  if (llt.info() != Eigen::Success) {
    throw LinalgError("solve_care: R is not positive definite");
  }
  const Matrix s = b * llt.solve(b.transpose());
  return solve_care_general(a, s, q);
}

}  // namespace evreg
