#pragma once

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcscm/linalg.hpp"
#include "rcscm/parallel.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

// Per-frequency demixing matrices W_i (rows w_{i,m}^H) and their inverses
// A_i, whose columns are the estimated steering vectors.
struct DemixingSet {
  std::vector<MatC> W;
  std::vector<MatC> A;
};

// Low-rank NMF source model per output channel: r_{ij,n} = sum_k T[n](i,k) V[n](k,j).
struct NmfModel {
  std::vector<MatR> T;  // per source: I x K
  std::vector<MatR> V;  // per source: K x J
};

struct IlrmaResult {
  DemixingSet demix;
  NmfModel nmf;
};

// Floor for the NMF variance model r_{ij,n}. The scale normalization inside
// run_ilrma keeps the demixed powers at unit average, so 1e-12 is far below
// any meaningful variance. Without the floor a source whose demixed power
// vanishes at one bin enters a collapse feedback: r -> 0 inflates the
// weighted covariance U, the iterative-projection normalization then shrinks
// that demixing row toward zero, which drives the power and r down further
// until r^2 underflows (NaN from 0/0) or W becomes numerically singular.
inline constexpr double kNmfVarFloor = 1e-12;

struct SphereResult {
  Spectrogram whitened;
  std::vector<MatC> whitening;  // per-frequency Q_i with cov(Q_i x) = I
};

// PCA sphering: whitens each frequency bin so the sample covariance becomes
// the identity. Rank-deficient covariances are diagonally loaded
// (1e-10 * trace/M) instead of failing.
inline SphereResult sphere(const Spectrogram& X) {
  const Eigen::Index m = X.channels();
  const Eigen::Index j = X.frames();
  if (j <= m) throw InvalidInputError("sphere: need more frames than channels");

  SphereResult out;
  out.whitened = X;
  out.whitening.resize(X.num_bins());
  for (Eigen::Index i = 0; i < X.num_bins(); ++i) {
    MatC cov = X.bins[i] * X.bins[i].adjoint() / static_cast<double>(j);
    cov += (1e-10 * std::real(cov.trace()) / m) * MatC::Identity(m, m);
    const EigResult eig = hermitian_eig((cov + cov.adjoint()) / 2.0);
    MatC q = MatC::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double l = std::max(eig.values(k), 1e-300);
      q.noalias() += (1.0 / std::sqrt(l)) * eig.vectors.col(k) *
                     eig.vectors.col(k).adjoint();
    }
    out.whitening[i] = q;
    out.whitened.bins[i] = q * X.bins[i];
  }
  return out;
}

// Back-projected source image with the target channel n_h zeroed:
// A_i * (w_1^H x, ..., 0 at n_h, ..., w_M^H x)^T. n_h is 0-based.
inline VecC scale_fixed_noise_image(const MatC& W, const MatC& A, const VecC& x,
                                    int n_h) {
  VecC y = W * x;
  y(n_h) = cplx(0.0, 0.0);
  return A * y;
}

// Negative log-likelihood of the ILRMA model (up to an additive constant);
// used for the monotonicity checks.
inline double ilrma_objective(const DemixingSet& demix, const NmfModel& nmf,
                              const Spectrogram& X) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index j = X.frames();
  const Eigen::Index m = X.channels();
  double obj = 0.0;
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const MatC y = demix.W[i] * X.bins[i];
    for (Eigen::Index n = 0; n < m; ++n) {
      const VecR r = (nmf.T[n].row(i) * nmf.V[n]).transpose().cwiseMax(kNmfVarFloor);
      for (Eigen::Index t = 0; t < j; ++t)
        obj += std::norm(y(n, t)) / r(t) + std::log(r(t));
    }
    obj -= 2.0 * j * std::log(std::abs(demix.W[i].determinant()) + 1e-300);
  }
  return obj;
}

namespace detail {

// One pass of the standard multiplicative NMF updates for every source,
// given the current demixed power spectrograms P[n] (I x J).
inline void ilrma_nmf_update(const std::vector<MatR>& P, NmfModel* nmf) {
  const auto num_src = P.size();
  for (size_t n = 0; n < num_src; ++n) {
    MatR& T = nmf->T[n];
    MatR& V = nmf->V[n];
    MatR R = (T * V).cwiseMax(kNmfVarFloor);
    MatR PR2 = P[n].array() / (R.array() * R.array());
    MatR Rinv = R.cwiseInverse();
    T = (T.array() *
         ((PR2 * V.transpose()).array() / (Rinv * V.transpose()).array().max(1e-300))
             .sqrt())
            .cwiseMax(1e-300);
    R = (T * V).cwiseMax(kNmfVarFloor);
    PR2 = P[n].array() / (R.array() * R.array());
    Rinv = R.cwiseInverse();
    V = (V.array() *
         ((T.transpose() * PR2).array() / (T.transpose() * Rinv).array().max(1e-300))
             .sqrt())
            .cwiseMax(1e-300);
  }
}

inline void demixed_powers(const DemixingSet& demix, const Spectrogram& X,
                           std::vector<MatR>* P) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index m = X.channels();
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const MatC y = demix.W[i] * X.bins[i];
    for (Eigen::Index n = 0; n < m; ++n)
      (*P)[n].row(i) = y.row(n).cwiseAbs2().real();
  }
}

}  // namespace detail

// Gaussian ILRMA with iterative-projection spatial updates. Deterministic
// given the seed; NMF factors are drawn uniformly from (0.1, 1.0] and the
// demixing matrices start at the identity. Each iteration runs one pass of
// multiplicative NMF updates followed by one IP sweep over all sources, with
// per-source scale normalization folded back into T.
inline IlrmaResult run_ilrma(const Spectrogram& X, int K, int iters, uint64_t seed,
                             int threads = 1) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index j = X.frames();
  const Eigen::Index m = X.channels();
  if (K < 1) throw InvalidInputError("run_ilrma: K must be >= 1");
  if (iters < 0) throw InvalidInputError("run_ilrma: iters must be >= 0");

  IlrmaResult res;
  res.demix.W.assign(num_bins, MatC::Identity(m, m));
  res.demix.A.assign(num_bins, MatC::Identity(m, m));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  res.nmf.T.resize(m);
  res.nmf.V.resize(m);
  for (Eigen::Index n = 0; n < m; ++n) {
    res.nmf.T[n].resize(num_bins, K);
    res.nmf.V[n].resize(K, j);
    for (Eigen::Index i = 0; i < num_bins; ++i)
      for (int k = 0; k < K; ++k) res.nmf.T[n](i, k) = unif(rng);
    for (int k = 0; k < K; ++k)
      for (Eigen::Index t = 0; t < j; ++t) res.nmf.V[n](k, t) = unif(rng);
  }

  std::vector<MatR> P(m, MatR::Zero(num_bins, j));
  detail::demixed_powers(res.demix, X, &P);

  // Fit the NMF model to the initially demixed spectrograms, so the source
  // model is meaningful even at iters = 0.
  const int init_fit_passes = 30;
  for (int pass = 0; pass < init_fit_passes; ++pass)
    detail::ilrma_nmf_update(P, &res.nmf);

  for (int it = 0; it < iters; ++it) {
    detail::ilrma_nmf_update(P, &res.nmf);

    // Iterative-projection spatial update per frequency bin.
    std::vector<MatR> Rinv(m);  // 1/r_{ij,n}
    for (Eigen::Index n = 0; n < m; ++n)
      Rinv[n] = (res.nmf.T[n] * res.nmf.V[n]).cwiseMax(kNmfVarFloor).cwiseInverse();
    std::atomic<Eigen::Index> fail_bin{-1};
    parallel_for(0, num_bins, threads, [&](Eigen::Index i) {
      MatC& W = res.demix.W[i];
      for (Eigen::Index n = 0; n < m; ++n) {
        MatC U = MatC::Zero(m, m);
        for (Eigen::Index t = 0; t < j; ++t)
          U.noalias() += Rinv[n](i, t) * X.bins[i].col(t) * X.bins[i].col(t).adjoint();
        U /= static_cast<double>(j);
        MatC WU = W * U;
        Eigen::FullPivLU<MatC> lu(WU);
        if (!lu.isInvertible()) {
          // Diagonal-loading retry, then report the bin.
          WU += 1e-8 * std::max(WU.norm(), 1e-30) * MatC::Identity(m, m);
          lu.compute(WU);
          if (!lu.isInvertible()) {
            fail_bin.store(i);
            return;
          }
        }
        VecC w = lu.solve(VecC::Unit(m, n));
        const double norm2 = std::real(w.dot(U * w));
        w /= std::sqrt(std::max(norm2, 1e-300));
        W.row(n) = w.adjoint();
      }
    });
    if (fail_bin.load() >= 0)
      throw NumericalError("run_ilrma: singular spatial update at frequency bin " +
                           std::to_string(fail_bin.load()));

    // Scale normalization: keep the demixed powers at unit average so the
    // NMF factors do not drift; the scaling is folded into T.
    detail::demixed_powers(res.demix, X, &P);
    for (Eigen::Index n = 0; n < m; ++n) {
      const double mu = std::sqrt(P[n].mean());
      if (mu > 0.0 && std::isfinite(mu)) {
        for (Eigen::Index i = 0; i < num_bins; ++i) res.demix.W[i].row(n) /= mu;
        P[n] /= mu * mu;
        res.nmf.T[n] /= mu * mu;
      }
    }
  }

  for (Eigen::Index i = 0; i < num_bins; ++i) {
    Eigen::FullPivLU<MatC> lu(res.demix.W[i]);
    if (!lu.isInvertible())
      throw NumericalError("run_ilrma: singular demixing matrix at frequency bin " +
                           std::to_string(i));
    res.demix.A[i] = lu.inverse();
  }
  return res;
}

}  // namespace rcscm
