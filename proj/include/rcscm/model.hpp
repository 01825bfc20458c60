#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rcscm/ilrma.hpp"
#include "rcscm/linalg.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

// Fixed per-frequency quantities consumed by the EM solvers: target steering
// vector a_i, rank-(M-1) noise SCM R'_i with its pseudoinverse, and the unit
// null eigenvector b_i.
struct RcscmInputs {
  std::vector<VecC> a;
  std::vector<MatC> R_prime;
  std::vector<MatC> R_prime_pinv;
  std::vector<VecC> b;
  int n_h = 0;  // 0-based target source index

  Eigen::Index num_bins() const { return static_cast<Eigen::Index>(a.size()); }
  Eigen::Index mics() const { return a.empty() ? 0 : a[0].size(); }
};

// Free parameters of the model: target variance r_h, noise variance r_u
// (both I x J), and the restored eigenvalue lambda per frequency.
struct RcscmParams {
  MatR r_h;
  MatR r_u;
  VecR lambda;
};

// Inverse-gamma prior on r_h.
struct Hyperparams {
  double alpha = 1.1;
  double beta = 1e-16;
};

// Picks the target source as the one with the highest total back-projected
// image power. Overridable from the CLI when the heuristic is wrong.
inline int select_target_index(const DemixingSet& demix, const Spectrogram& X) {
  const Eigen::Index m = X.channels();
  VecR power = VecR::Zero(m);
  for (Eigen::Index i = 0; i < X.num_bins(); ++i) {
    const MatC y = demix.W[i] * X.bins[i];
    for (Eigen::Index n = 0; n < m; ++n)
      power(n) += y.row(n).squaredNorm() * demix.A[i].col(n).squaredNorm();
  }
  Eigen::Index best = 0;
  power.maxCoeff(&best);
  return static_cast<int>(best);
}

// Builds a_i, R'_i, b_i from the ILRMA demixing set. R'_i is the sum of the
// back-projected rank-1 SCMs of the M-1 non-target sources. n_h is 0-based.
inline RcscmInputs build_noise_scm(const DemixingSet& demix, const Spectrogram& X,
                                   int n_h, double rank_tol = kDefaultRankTol) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index m = X.channels();
  const Eigen::Index j = X.frames();
  if (n_h < 0 || n_h >= m)
    throw InvalidInputError("build_noise_scm: target index out of range");

  RcscmInputs in;
  in.n_h = n_h;
  in.a.resize(num_bins);
  in.R_prime.resize(num_bins);
  in.R_prime_pinv.resize(num_bins);
  in.b.resize(num_bins);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    in.a[i] = demix.A[i].col(n_h);
    const MatC y = demix.W[i] * X.bins[i];
    VecR mean_power = VecR::Zero(m);
    for (Eigen::Index n = 0; n < m; ++n)
      if (n != n_h) mean_power(n) = y.row(n).squaredNorm() / static_cast<double>(j);
    MatC rp = demix.A[i] * mean_power.asDiagonal().toDenseMatrix().cast<cplx>() *
              demix.A[i].adjoint();
    in.R_prime[i] = (rp + rp.adjoint()) / 2.0;
    try {
      in.b[i] = null_eigenvector(in.R_prime[i], rank_tol);
      in.R_prime_pinv[i] = pseudo_inverse_psd(in.R_prime[i], rank_tol);
    } catch (const InvalidInputError& e) {
      throw InvalidInputError("build_noise_scm: frequency bin " + std::to_string(i) +
                              ": " + e.what());
    }
  }
  return in;
}

// Initializes the free parameters from the ILRMA estimates: r_h from the
// target's NMF model, r_u from the quadratic form of the scale-fixed noise
// image against pinv(R'), lambda from the minimum nonzero eigenvalue of R'.
inline RcscmParams init_params(const RcscmInputs& in, const NmfModel& nmf,
                               const DemixingSet& demix, const Spectrogram& X) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index j = X.frames();
  const Eigen::Index m = X.channels();

  RcscmParams p;
  p.r_h = (nmf.T[in.n_h] * nmf.V[in.n_h]).cwiseMax(kEpsVar);
  p.r_u.resize(num_bins, j);
  p.lambda.resize(num_bins);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    for (Eigen::Index t = 0; t < j; ++t) {
      const VecC y_hat =
          scale_fixed_noise_image(demix.W[i], demix.A[i], X.bins[i].col(t), in.n_h);
      p.r_u(i, t) = std::max(std::real(y_hat.dot(in.R_prime_pinv[i] * y_hat)) / m,
                             kEpsVar);
    }
    const EigResult eig = hermitian_eig(in.R_prime[i]);
    const double cutoff = kDefaultRankTol * std::max(eig.values(m - 1), 0.0);
    double lmin = eig.values(m - 1);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (eig.values(k) > cutoff) {
        lmin = eig.values(k);
        break;
      }
    }
    p.lambda(i) = std::max(lmin, kEpsVar);
  }
  return p;
}

// Marginal log-posterior the EM ascends: complex Gaussian log-likelihood of
// x under R^(x) = r_h a a^H + r_u (R' + lambda b b^H) plus the inverse-gamma
// log-prior on r_h (constants from the prior normalization dropped).
inline double map_objective(const RcscmInputs& in, const RcscmParams& p,
                            const Hyperparams& hyper, const Spectrogram& X) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index j = X.frames();
  const Eigen::Index m = X.channels();
  double obj = 0.0;
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const MatC R_u =
        in.R_prime[i] + p.lambda(i) * in.b[i] * in.b[i].adjoint();
    for (Eigen::Index t = 0; t < j; ++t) {
      MatC R_x = p.r_h(i, t) * in.a[i] * in.a[i].adjoint() + p.r_u(i, t) * R_u;
      Eigen::LLT<MatC> llt(R_x);
      if (llt.info() != Eigen::Success)
        throw NumericalError("map_objective: R^(x) not PD at bin " +
                             std::to_string(i) + ", frame " + std::to_string(t));
      double logdet = m * std::log(M_PI);
      for (Eigen::Index k = 0; k < m; ++k)
        logdet += 2.0 * std::log(std::real(llt.matrixLLT()(k, k)));
      const VecC x = X.bins[i].col(t);
      const double quad = std::real(x.dot(llt.solve(x)));
      const double rh = p.r_h(i, t);
      obj += -logdet - quad - (hyper.alpha + 1.0) * std::log(rh) - hyper.beta / rh;
      if (!std::isfinite(obj))
        throw NumericalError("map_objective: non-finite at bin " + std::to_string(i) +
                             ", frame " + std::to_string(t));
    }
  }
  return obj;
}

}  // namespace rcscm
