#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rcscm/types.hpp"

namespace rcscm {

inline constexpr double kDefaultRankTol = 1e-10;

inline bool is_hermitian(const MatC& H, double rel_tol = 1e-12) {
  const double scale = std::max(H.norm(), 1.0);
  return (H - H.adjoint()).norm() <= rel_tol * scale;
}

struct EigResult {
  VecR values;   // ascending, real
  MatC vectors;  // orthonormal columns, vectors.col(k) pairs with values[k]
};

// Eigendecomposition of a Hermitian matrix. Throws on non-Hermitian input.
inline EigResult hermitian_eig(const MatC& H) {
  if (H.rows() != H.cols() || H.rows() < 1)
    throw InvalidInputError("hermitian_eig: matrix must be square and nonempty");
  if (!is_hermitian(H))
    throw InvalidInputError("hermitian_eig: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatC> es(H);
  if (es.info() != Eigen::Success)
    throw NumericalError("hermitian_eig: eigensolver failed to converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Moore-Penrose pseudoinverse of a Hermitian PSD matrix. Eigenvalues at or
// below rank_tol * lambda_max are treated as zero.
inline MatC pseudo_inverse_psd(const MatC& H, double rank_tol = kDefaultRankTol) {
  const EigResult eig = hermitian_eig(H);
  const Eigen::Index m = H.rows();
  const double lmax = std::max(eig.values(m - 1), 0.0);
  const double cutoff = rank_tol * lmax;
  if (eig.values(0) < -cutoff)
    throw InvalidInputError("pseudo_inverse_psd: matrix is not PSD (eigenvalue " +
                            std::to_string(eig.values(0)) + ")");
  MatC pinv = MatC::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (eig.values(k) > cutoff)
      pinv.noalias() +=
          (1.0 / eig.values(k)) * eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  }
  return pinv;
}

// Fixes the eigenvector phase so the first nonzero entry is real-positive
// (deterministic across eigensolver versions). Entries below 1e-8 of the
// largest magnitude are treated as zero when picking the pivot.
inline VecC normalize_phase(const VecC& v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  if (vmax == 0.0) return v;
  Eigen::Index pivot_idx = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::abs(v(k)) > 1e-8 * vmax) {
      pivot_idx = k;
      break;
    }
  }
  const cplx pivot = v(pivot_idx);
  return v * (std::conj(pivot) / std::abs(pivot));
}

// Unit eigenvector spanning the one-dimensional null space of a rank-(M-1)
// PSD matrix. Throws when the null space is not exactly one-dimensional.
inline VecC null_eigenvector(const MatC& R_prime, double rank_tol = kDefaultRankTol) {
  const EigResult eig = hermitian_eig(R_prime);
  const Eigen::Index m = R_prime.rows();
  const double lmax = std::max(eig.values(m - 1), 0.0);
  const double cutoff = rank_tol * std::max(lmax, 1e-300);
  Eigen::Index near_zero = 0;
  for (Eigen::Index k = 0; k < m; ++k)
    if (eig.values(k) <= cutoff) ++near_zero;
  if (near_zero != 1)
    throw InvalidInputError("null_eigenvector: expected exactly one near-zero "
                            "eigenvalue, found " + std::to_string(near_zero));
  return normalize_phase(eig.vectors.col(0));
}

// Inverse of (c * a a^H + d * R) given Rinv = R^{-1}, via the
// Sherman-Morrison identity. c and d are the target/noise variances.
inline MatC sherman_morrison_inverse(const MatC& Rinv, const VecC& a, double c,
                                     double d) {
  if (d <= 0.0)
    throw InvalidInputError("sherman_morrison_inverse: noise variance must be > 0");
  const VecC ra = Rinv * a;
  const double quad = std::real(a.dot(ra));  // a^H Rinv a
  const double gain = c / (d + c * quad);
  MatC out = Rinv;
  out.noalias() -= gain * ra * ra.adjoint();
  out *= (1.0 / d);
  return out;
}

// Inverse of (R' + lambda * b b^H) where R' is rank-deficient with null
// vector b: equals pinv(R') + (1/lambda) * b b^H.
inline MatC rank_one_restored_inverse(const MatC& R_prime_pinv, const VecC& b,
                                      double lambda) {
  if (lambda <= 0.0)
    throw InvalidInputError("rank_one_restored_inverse: lambda must be > 0");
  if (std::abs(b.norm() - 1.0) > 1e-10)
    throw InvalidInputError("rank_one_restored_inverse: b must be unit norm");
  const double residual = (R_prime_pinv * b).norm();
  const double scale = std::max(R_prime_pinv.norm(), 1.0);
  if (residual > 1e-8 * scale)
    throw InvalidInputError("rank_one_restored_inverse: b is not in the null "
                            "space of the pseudoinverse");
  return R_prime_pinv + (1.0 / lambda) * b * b.adjoint();
}

}  // namespace rcscm
