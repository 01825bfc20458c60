#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "rcscm/model.hpp"
#include "rcscm/parallel.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

struct SolverOptions {
  int iters = 200;
  bool compute_objective = false;
  bool record_trajectory = false;
  double rel_obj_tol = 0.0;  // early stop on relative objective change; 0 = off
  int threads = 1;
  double eps_var = kEpsVar;
  double gamma_fault = 0.0;  // test hook: additive corruption of gamma (accel only)
};

struct SolverResult {
  RcscmParams params;
  std::vector<double> objective;      // length iters+1 when enabled
  std::vector<double> iter_seconds;   // length = iterations actually run
  std::vector<RcscmParams> trajectory;  // post-iteration snapshots when enabled
};

// E-step sufficient statistics (Eq. E_hrh / E_hru).
struct SufficientStats {
  MatR hat_r_h;                           // I x J
  std::vector<std::vector<MatC>> hat_R_u;  // [i][j], M x M
};

namespace detail {

// Analytic inverse of a small Hermitian positive-definite matrix (S = 2, 3,
// or 4); returns false when the matrix is not positive definite. Exploits
// the Hermitian structure (real diagonal, conjugate symmetry, real
// determinant), which costs roughly half the flops of a general cofactor
// inverse. The size-4 case is a 2x2 block inversion via the Schur
// complement, whose positive definiteness together with the top-left
// block's is equivalent to that of the whole matrix.
template <int S>
inline bool hermitian_pd_inverse(const Eigen::Matrix<cplx, S, S>& R,
                                 Eigen::Matrix<cplx, S, S>* out) {
  static_assert(S == 2 || S == 3 || S == 4);
  if constexpr (S == 2) {
    const double a = std::real(R(0, 0));
    const double c = std::real(R(1, 1));
    const cplx b = R(0, 1);
    const double det = a * c - std::norm(b);
    if (!(a > 0.0) || !(det > 0.0)) return false;
    const double inv_det = 1.0 / det;
    (*out)(0, 0) = c * inv_det;
    (*out)(1, 1) = a * inv_det;
    (*out)(0, 1) = -b * inv_det;
    (*out)(1, 0) = -std::conj(b) * inv_det;
    return true;
  } else if constexpr (S == 3) {
    const double a = std::real(R(0, 0));
    const double b = std::real(R(1, 1));
    const double c = std::real(R(2, 2));
    const cplx d = R(0, 1), e = R(0, 2), f = R(1, 2);
    const double m00 = b * c - std::norm(f);
    const double m11 = a * c - std::norm(e);
    const double m22 = a * b - std::norm(d);
    const double det =
        std::real(a * m00 - d * (std::conj(d) * c - f * std::conj(e)) +
                  e * (std::conj(d) * std::conj(f) - b * std::conj(e)));
    if (!(a > 0.0) || !(m22 > 0.0) || !(det > 0.0)) return false;
    const double inv_det = 1.0 / det;
    (*out)(0, 0) = m00 * inv_det;
    (*out)(1, 1) = m11 * inv_det;
    (*out)(2, 2) = m22 * inv_det;
    (*out)(0, 1) = (e * std::conj(f) - d * c) * inv_det;
    (*out)(0, 2) = (d * f - e * b) * inv_det;
    (*out)(1, 2) = (e * std::conj(d) - a * f) * inv_det;
    (*out)(1, 0) = std::conj((*out)(0, 1));
    (*out)(2, 0) = std::conj((*out)(0, 2));
    (*out)(2, 1) = std::conj((*out)(1, 2));
    return true;
  } else {
    // 2x2 block inversion, fully unrolled into scalar arithmetic.
    const double a00 = std::real(R(0, 0));
    const double a11 = std::real(R(1, 1));
    const cplx a01 = R(0, 1);
    const double det_a = a00 * a11 - std::norm(a01);
    if (!(a00 > 0.0) || !(det_a > 0.0)) return false;
    const double ida = 1.0 / det_a;
    const double ai00 = a11 * ida;
    const double ai11 = a00 * ida;
    const cplx ai01 = -a01 * ida;
    const cplx ai10 = std::conj(ai01);

    // T = A^{-1} B with B = R(0..1, 2..3).
    const cplx t00 = ai00 * R(0, 2) + ai01 * R(1, 2);
    const cplx t01 = ai00 * R(0, 3) + ai01 * R(1, 3);
    const cplx t10 = ai10 * R(0, 2) + ai11 * R(1, 2);
    const cplx t11 = ai10 * R(0, 3) + ai11 * R(1, 3);

    // Schur complement Sc = C - B^H T (Hermitian).
    const double sc00 = std::real(R(2, 2)) -
                        std::real(std::conj(R(0, 2)) * t00 +
                                  std::conj(R(1, 2)) * t10);
    const double sc11 = std::real(R(3, 3)) -
                        std::real(std::conj(R(0, 3)) * t01 +
                                  std::conj(R(1, 3)) * t11);
    const cplx sc01 = R(2, 3) - std::conj(R(0, 2)) * t01 -
                      std::conj(R(1, 2)) * t11;
    const double det_s = sc00 * sc11 - std::norm(sc01);
    if (!(sc00 > 0.0) || !(det_s > 0.0)) return false;
    const double ids = 1.0 / det_s;
    const double si00 = sc11 * ids;
    const double si11 = sc00 * ids;
    const cplx si01 = -sc01 * ids;
    const cplx si10 = std::conj(si01);

    // U = T Sc^{-1}.
    const cplx u00 = t00 * si00 + t01 * si10;
    const cplx u01 = t00 * si01 + t01 * si11;
    const cplx u10 = t10 * si00 + t11 * si10;
    const cplx u11 = t10 * si01 + t11 * si11;

    // Top-left block A^{-1} + U T^H; its diagonal is real.
    (*out)(0, 0) = ai00 + std::real(u00 * std::conj(t00) + u01 * std::conj(t01));
    (*out)(1, 1) = ai11 + std::real(u10 * std::conj(t10) + u11 * std::conj(t11));
    (*out)(0, 1) = ai01 + u00 * std::conj(t10) + u01 * std::conj(t11);
    (*out)(1, 0) = std::conj((*out)(0, 1));
    (*out)(0, 2) = -u00;
    (*out)(0, 3) = -u01;
    (*out)(1, 2) = -u10;
    (*out)(1, 3) = -u11;
    (*out)(2, 0) = std::conj((*out)(0, 2));
    (*out)(3, 0) = std::conj((*out)(0, 3));
    (*out)(2, 1) = std::conj((*out)(1, 2));
    (*out)(3, 1) = std::conj((*out)(1, 3));
    (*out)(2, 2) = si00;
    (*out)(3, 3) = si11;
    (*out)(2, 3) = si01;
    (*out)(3, 2) = si10;
    return true;
  }
}

// E-step for one frequency bin: direct inversion of the per-slot covariance.
// Writes r-hat into hat_r_h row i and the M x M statistics into hat_R_u_row.
// Templated on the compile-time channel count S (Eigen::Dynamic for the
// generic case) so the common small array sizes run on fixed-size kernels;
// the arithmetic is identical for every instantiation.
template <int S>
inline void naive_e_step_bin_impl(const RcscmInputs& in, const RcscmParams& p,
                                  const Spectrogram& X, Eigen::Index i,
                                  MatR& hat_r_h, std::vector<MatC>& hat_R_u_row) {
  using Mat = Eigen::Matrix<cplx, S, S>;
  using Vec = Eigen::Matrix<cplx, S, 1>;
  const Eigen::Index m = X.channels();
  const Eigen::Index frames = X.frames();
  const Vec a = in.a[i];
  const Vec b = in.b[i];
  Mat R_u_tilde = in.R_prime[i];
  R_u_tilde.noalias() += p.lambda(i) * b * b.adjoint();

  const Mat ident = Mat::Identity(m, m);
  Mat R_x(m, m), R_x_inv(m, m), RuRxi(m, m);
  Vec rx_inv_a(m), ru_rxi_x(m);
  Eigen::LLT<Mat> llt(m);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const double rh = p.r_h(i, t);
    const double ru = p.r_u(i, t);
    const Eigen::Map<const Vec> x(X.bins[i].col(t).data(), m);

    if constexpr (S == Eigen::Dynamic) {
      R_x.noalias() = rh * a * a.adjoint();
      R_x.noalias() += ru * R_u_tilde;
      llt.compute(R_x);
      if (llt.info() != Eigen::Success)
        throw NumericalError("e_step: singular covariance at bin " +
                             std::to_string(i) + ", frame " + std::to_string(t));
      R_x_inv = ident;
      llt.matrixL().solveInPlace(R_x_inv);
      llt.matrixU().solveInPlace(R_x_inv);

      rx_inv_a.noalias() = R_x_inv * a;
      const double a_rxi_a = std::real(a.dot(rx_inv_a));
      const cplx x_rxi_a = x.dot(rx_inv_a);
      hat_r_h(i, t) = rh - rh * rh * a_rxi_a + std::norm(rh * x_rxi_a);

      RuRxi.noalias() = R_u_tilde * R_x_inv;
      Eigen::Map<Mat> hat(hat_R_u_row[t].data(), m, m);
      hat.noalias() = -(ru * ru) * RuRxi * R_u_tilde;
      hat.noalias() += ru * R_u_tilde;
      ru_rxi_x.noalias() = RuRxi * x;
      hat.noalias() += (ru * ru) * ru_rxi_x * ru_rxi_x.adjoint();
    } else {
      // Same arithmetic as the dynamic branch, but written as unrolled
      // scalar loops: at these sizes the expression-template machinery
      // costs several times the flops themselves.
      for (int c = 0; c < S; ++c) {
        const cplx ac = std::conj(a(c)) * rh;
        for (int r = c; r < S; ++r)
          R_x(r, c) = a(r) * ac + ru * R_u_tilde(r, c);
        for (int r = 0; r < c; ++r) R_x(r, c) = std::conj(R_x(c, r));
      }
      if (!hermitian_pd_inverse<S>(R_x, &R_x_inv))
        throw NumericalError("e_step: singular covariance at bin " +
                             std::to_string(i) + ", frame " + std::to_string(t));

      double a_rxi_a = 0.0;
      cplx x_rxi_a(0.0, 0.0);
      for (int r = 0; r < S; ++r) {
        cplx acc(0.0, 0.0);
        for (int c = 0; c < S; ++c) acc += R_x_inv(r, c) * a(c);
        rx_inv_a(r) = acc;
        a_rxi_a += std::real(std::conj(a(r)) * acc);
        x_rxi_a += std::conj(x(r)) * acc;
      }
      hat_r_h(i, t) = rh - rh * rh * a_rxi_a + std::norm(rh * x_rxi_a);

      // RuRxi = R_u_tilde * R_x_inv and its action on x in one pass.
      for (int r = 0; r < S; ++r) {
        cplx vx(0.0, 0.0);
        for (int c = 0; c < S; ++c) {
          cplx acc(0.0, 0.0);
          for (int k = 0; k < S; ++k) acc += R_u_tilde(r, k) * R_x_inv(k, c);
          RuRxi(r, c) = acc;
          vx += acc * x(c);
        }
        ru_rxi_x(r) = vx;
      }
      const double ru2 = ru * ru;
      Eigen::Map<Mat> hat(hat_R_u_row[t].data(), m, m);
      for (int c = 0; c < S; ++c) {
        for (int r = c; r < S; ++r) {
          cplx acc(0.0, 0.0);
          for (int k = 0; k < S; ++k) acc += RuRxi(r, k) * R_u_tilde(k, c);
          hat(r, c) = ru * R_u_tilde(r, c) - ru2 * acc +
                      ru2 * ru_rxi_x(r) * std::conj(ru_rxi_x(c));
        }
        for (int r = 0; r < c; ++r) hat(r, c) = std::conj(hat(c, r));
      }
    }
  }
}

inline void naive_e_step_bin(const RcscmInputs& in, const RcscmParams& p,
                             const Spectrogram& X, Eigen::Index i, MatR& hat_r_h,
                             std::vector<MatC>& hat_R_u_row) {
  switch (X.channels()) {
    case 2:
      return naive_e_step_bin_impl<2>(in, p, X, i, hat_r_h, hat_R_u_row);
    case 3:
      return naive_e_step_bin_impl<3>(in, p, X, i, hat_r_h, hat_R_u_row);
    case 4:
      return naive_e_step_bin_impl<4>(in, p, X, i, hat_r_h, hat_R_u_row);
    default:
      return naive_e_step_bin_impl<Eigen::Dynamic>(in, p, X, i, hat_r_h,
                                                   hat_R_u_row);
  }
}

}  // namespace detail

// Full E-step over all (i, j) slots.
inline SufficientStats e_step(const RcscmInputs& in, const RcscmParams& p,
                              const Spectrogram& X, int threads = 1) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();
  const Eigen::Index m = X.channels();
  SufficientStats stats;
  stats.hat_r_h.resize(num_bins, frames);
  stats.hat_R_u.assign(num_bins, std::vector<MatC>(frames, MatC(m, m)));
  parallel_for(0, num_bins, threads, [&](Eigen::Index i) {
    detail::naive_e_step_bin(in, p, X, i, stats.hat_r_h, stats.hat_R_u[i]);
  });
  return stats;
}

// M-step (Eq. M_rh, M_li, M_ru, in that order): r_u uses the new lambda.
inline RcscmParams m_step(const SufficientStats& stats, const RcscmInputs& in,
                          const RcscmParams& p_old, const Hyperparams& hyper,
                          int threads = 1, double eps_var = kEpsVar) {
  const Eigen::Index num_bins = in.num_bins();
  const Eigen::Index frames = stats.hat_r_h.cols();
  const Eigen::Index m = in.mics();

  RcscmParams p;
  p.r_h = ((stats.hat_r_h.array() + hyper.beta) / (hyper.alpha + 2.0))
              .cwiseMax(eps_var);
  p.r_u.resize(num_bins, frames);
  p.lambda.resize(num_bins);
  parallel_for(0, num_bins, threads, [&](Eigen::Index i) {
    double lam = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t)
      lam += std::real(in.b[i].dot(stats.hat_R_u[i][t] * in.b[i])) / p_old.r_u(i, t);
    lam /= static_cast<double>(frames);
    p.lambda(i) = std::max(lam, eps_var);

    const MatC R_u = in.R_prime[i] + p.lambda(i) * in.b[i] * in.b[i].adjoint();
    Eigen::LLT<MatC> llt(R_u);
    if (llt.info() != Eigen::Success)
      throw NumericalError("m_step: singular R^(u) at bin " + std::to_string(i));
    for (Eigen::Index t = 0; t < frames; ++t) {
      const double tr = std::real(llt.solve(stats.hat_R_u[i][t]).trace());
      p.r_u(i, t) = std::max(tr / m, eps_var);
    }
  });
  return p;
}

namespace detail {

// One fused E/M iteration over a single frequency bin. Arithmetic is
// identical to e_step followed by m_step; fusing just bounds the sufficient
// statistics storage to one bin (the full-tensor variant needs I*J M x M
// matrices, which is prohibitive at benchmark shapes).
template <int S>
inline void naive_iteration_bin_impl(const RcscmInputs& in,
                                     const RcscmParams& p_old,
                                     const Hyperparams& hyper, const Spectrogram& X,
                                     Eigen::Index i, double eps_var,
                                     RcscmParams* p_new,
                                     std::vector<MatC>& hat_R_u_row) {
  using Mat = Eigen::Matrix<cplx, S, S>;
  using Vec = Eigen::Matrix<cplx, S, 1>;
  const Eigen::Index frames = X.frames();
  const Eigen::Index m = X.channels();
  naive_e_step_bin_impl<S>(in, p_old, X, i, p_new->r_h, hat_R_u_row);

  // p_new->r_h row i currently holds r-hat; apply Eq. M_rh in place.
  p_new->r_h.row(i) =
      ((p_new->r_h.row(i).array() + hyper.beta) / (hyper.alpha + 2.0)).max(eps_var);

  const Vec b = in.b[i];
  double lam = 0.0;
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Map<const Mat> hat(hat_R_u_row[t].data(), m, m);
    if constexpr (S == Eigen::Dynamic) {
      lam += std::real(b.dot(hat * b)) / p_old.r_u(i, t);
    } else {
      // b^H hat b over the Hermitian hat: diagonal plus twice the real part
      // of the strict lower triangle.
      double q = 0.0;
      for (int c = 0; c < S; ++c) {
        q += std::real(hat(c, c)) * std::norm(b(c));
        for (int r = c + 1; r < S; ++r)
          q += 2.0 * std::real(std::conj(b(r)) * hat(r, c) * b(c));
      }
      lam += q / p_old.r_u(i, t);
    }
  }
  lam /= static_cast<double>(frames);
  p_new->lambda(i) = std::max(lam, eps_var);

  Mat R_u = in.R_prime[i];
  R_u.noalias() += p_new->lambda(i) * b * b.adjoint();
  Mat R_u_inv(m, m);
  if constexpr (S == Eigen::Dynamic) {
    Eigen::LLT<Mat> llt(R_u);
    if (llt.info() != Eigen::Success)
      throw NumericalError("m_step: singular R^(u) at bin " + std::to_string(i));
    R_u_inv = llt.solve(Mat::Identity(m, m));
  } else {
    if (!hermitian_pd_inverse<S>(R_u, &R_u_inv))
      throw NumericalError("m_step: singular R^(u) at bin " + std::to_string(i));
  }
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Map<const Mat> hat(hat_R_u_row[t].data(), m, m);
    double tr;
    if constexpr (S == Eigen::Dynamic) {
      tr = std::real(R_u_inv.transpose().cwiseProduct(hat).sum());
    } else {
      // trace(R_u_inv * hat) with both factors Hermitian: diagonal plus
      // twice the real part of the strict lower triangle.
      tr = 0.0;
      for (int c = 0; c < S; ++c) {
        tr += std::real(R_u_inv(c, c)) * std::real(hat(c, c));
        for (int r = c + 1; r < S; ++r)
          tr += 2.0 * std::real(R_u_inv(c, r) * hat(r, c));
      }
    }
    p_new->r_u(i, t) = std::max(tr / m, eps_var);
  }
}

inline void naive_iteration_bin(const RcscmInputs& in, const RcscmParams& p_old,
                                const Hyperparams& hyper, const Spectrogram& X,
                                Eigen::Index i, double eps_var, RcscmParams* p_new,
                                std::vector<MatC>& hat_R_u_row) {
  switch (X.channels()) {
    case 2:
      return naive_iteration_bin_impl<2>(in, p_old, hyper, X, i, eps_var, p_new,
                                         hat_R_u_row);
    case 3:
      return naive_iteration_bin_impl<3>(in, p_old, hyper, X, i, eps_var, p_new,
                                         hat_R_u_row);
    case 4:
      return naive_iteration_bin_impl<4>(in, p_old, hyper, X, i, eps_var, p_new,
                                         hat_R_u_row);
    default:
      return naive_iteration_bin_impl<Eigen::Dynamic>(in, p_old, hyper, X, i,
                                                      eps_var, p_new, hat_R_u_row);
  }
}

}  // namespace detail

// Reference EM backend with explicit per-slot matrix inversions, O(IJM^3)
// per iteration.
inline SolverResult run_naive(const RcscmInputs& in, const RcscmParams& params0,
                              const Hyperparams& hyper, const Spectrogram& X,
                              const SolverOptions& opt) {
  if (opt.iters < 0) throw InvalidInputError("run_naive: iters must be >= 0");
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();
  const Eigen::Index m = X.channels();
  SolverResult res;
  res.params = params0;
  if (opt.compute_objective)
    res.objective.push_back(map_objective(in, res.params, hyper, X));
  RcscmParams next;
  next.r_h.resize(num_bins, frames);
  next.r_u.resize(num_bins, frames);
  next.lambda.resize(num_bins);
  for (int it = 0; it < opt.iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for_chunks(0, num_bins, opt.threads, [&](Eigen::Index lo,
                                                      Eigen::Index hi) {
      std::vector<MatC> hat_R_u_row(frames, MatC(m, m));
      for (Eigen::Index i = lo; i < hi; ++i)
        detail::naive_iteration_bin(in, res.params, hyper, X, i, opt.eps_var, &next,
                                    hat_R_u_row);
    });
    std::swap(res.params, next);
    const auto t1 = std::chrono::steady_clock::now();
    res.iter_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    if (opt.record_trajectory) res.trajectory.push_back(res.params);
    if (opt.compute_objective) {
      res.objective.push_back(map_objective(in, res.params, hyper, X));
      const double prev = res.objective[res.objective.size() - 2];
      const double cur = res.objective.back();
      if (opt.rel_obj_tol > 0.0 &&
          std::abs(cur - prev) <= opt.rel_obj_tol * std::abs(prev))
        break;
    }
  }
  return res;
}

}  // namespace rcscm
