#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "rcscm/linalg.hpp"
#include "rcscm/model.hpp"
#include "rcscm/parallel.hpp"
#include "rcscm/solver_naive.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

// Precomputed inner products and per-iteration quadratic-form scalars used by
// the accelerated backends.
struct SolverScratch {
  // Fixed inner products, computed once before the iterations.
  VecC sigma_ab;   // sigma_i^(ab) = a^H b
  MatC sigma_bx;   // sigma_ij^(bx) = b^H x
  VecR tau_aa;     // tau_i^(aa) = a^H pinv(R') a
  MatC tau_ax;     // tau_ij^(ax) = a^H pinv(R') x
  MatR tau_xx;     // tau_ij^(xx) = x^H pinv(R') x
  // Per-iteration quadratic forms against (R^(u))^{-1} and its snapshot.
  VecR rho_aa, trho_aa;
  MatC rho_ax, trho_ax;
  MatR rho_xx;
  MatR gamma;  // gamma-tilde_ij
};

// sigma_i^(ab) and sigma_ij^(bx) (Algorithm 1/2, line 3).
inline void precompute_sigma(const RcscmInputs& in, const Spectrogram& X,
                             SolverScratch* s) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();
  s->sigma_ab.resize(num_bins);
  s->sigma_bx.resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    s->sigma_ab(i) = in.a[i].dot(in.b[i]);  // a^H b
    s->sigma_bx.row(i) = in.b[i].adjoint() * X.bins[i];
  }
}

// tau quadratic forms against pinv(R'), fixed across iterations
// (Algorithm 2, line 4).
inline void precompute_tau(const RcscmInputs& in, const Spectrogram& X,
                           SolverScratch* s) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();
  s->tau_aa.resize(num_bins);
  s->tau_ax.resize(num_bins, frames);
  s->tau_xx.resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const MatC& pinv = in.R_prime_pinv[i];
    const VecC pinv_a = pinv * in.a[i];
    s->tau_aa(i) = std::max(std::real(in.a[i].dot(pinv_a)), 0.0);
    s->tau_ax.row(i) = pinv_a.adjoint() * X.bins[i];
    for (Eigen::Index t = 0; t < frames; ++t) {
      const VecC x = X.bins[i].col(t);
      s->tau_xx(i, t) = std::max(std::real(x.dot(pinv * x)), 0.0);
    }
  }
}

// gamma-tilde_ij = r_h / (r_u + r_h * rho_aa), elementwise (Eq. tal).
inline void compute_gamma(const RcscmParams& tilde, const VecR& trho_aa,
                          SolverScratch* s) {
  const Eigen::Index num_bins = tilde.r_h.rows();
  const Eigen::Index frames = tilde.r_h.cols();
  s->gamma.resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i)
    for (Eigen::Index t = 0; t < frames; ++t)
      s->gamma(i, t) =
          tilde.r_h(i, t) / (tilde.r_u(i, t) + tilde.r_h(i, t) * trho_aa(i));
}

// First-stage rho quantities: one explicit M x M inversion of
// R^(u) = R' + lambda b b^H per frequency bin (Algorithm 1, lines 4/14).
inline void rho_first_stage(const RcscmInputs& in, const Spectrogram& X,
                            const VecR& lambda, VecR* rho_aa, MatC* rho_ax,
                            MatR* rho_xx, int threads = 1) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();
  const Eigen::Index m = X.channels();
  rho_aa->resize(num_bins);
  rho_ax->resize(num_bins, frames);
  if (rho_xx) rho_xx->resize(num_bins, frames);
  parallel_for(0, num_bins, threads, [&](Eigen::Index i) {
    if (lambda(i) <= 0.0)
      throw NumericalError("rho_first_stage: nonpositive lambda at bin " +
                           std::to_string(i));
    const MatC R_u = in.R_prime[i] + lambda(i) * in.b[i] * in.b[i].adjoint();
    Eigen::LLT<MatC> llt(R_u);
    if (llt.info() != Eigen::Success)
      throw NumericalError("rho_first_stage: singular R^(u) at bin " +
                           std::to_string(i));
    const MatC R_u_inv = llt.solve(MatC::Identity(m, m));
    const VecC ri_a = R_u_inv * in.a[i];
    (*rho_aa)(i) = std::real(in.a[i].dot(ri_a));
    rho_ax->row(i) = ri_a.adjoint() * X.bins[i];
    if (rho_xx) {
      for (Eigen::Index t = 0; t < frames; ++t) {
        const VecC x = X.bins[i].col(t);
        (*rho_xx)(i, t) = std::real(x.dot(R_u_inv * x));
      }
    }
  });
}

// Second-stage rho quantities by pure scalar expansion against the
// precomputed tau/sigma (Eq. riinv): no matrix or vector operation.
inline void rho_second_stage(const SolverScratch& s, const VecR& lambda, VecR* rho_aa,
                             MatC* rho_ax, MatR* rho_xx) {
  const Eigen::Index num_bins = s.tau_ax.rows();
  const Eigen::Index frames = s.tau_ax.cols();
  rho_aa->resize(num_bins);
  rho_ax->resize(num_bins, frames);
  if (rho_xx) rho_xx->resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const double inv_lam = 1.0 / lambda(i);
    (*rho_aa)(i) = s.tau_aa(i) + std::norm(s.sigma_ab(i)) * inv_lam;
    for (Eigen::Index t = 0; t < frames; ++t) {
      (*rho_ax)(i, t) = s.tau_ax(i, t) + s.sigma_ab(i) * s.sigma_bx(i, t) * inv_lam;
      if (rho_xx)
        (*rho_xx)(i, t) = s.tau_xx(i, t) + std::norm(s.sigma_bx(i, t)) * inv_lam;
    }
  }
}

// M-step scalar updates shared by both accelerated stages
// (Eq. 1st_rh / 1st_li / 1st_ru).

inline void update_rh(const SolverScratch& s, const RcscmParams& tilde,
                      const Hyperparams& hyper, double eps_var, MatR* r_h) {
  *r_h = ((s.gamma.array() *
           (tilde.r_u.array() + s.gamma.array() * s.trho_ax.array().abs2()) +
           hyper.beta) /
          (hyper.alpha + 2.0))
             .cwiseMax(eps_var);
}

inline void update_lambda(const SolverScratch& s, const RcscmParams& tilde,
                          double eps_var, VecR* lambda) {
  const Eigen::Index num_bins = tilde.r_h.rows();
  const Eigen::Index frames = tilde.r_h.cols();
  lambda->resize(num_bins);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    const double ab2 = std::norm(s.sigma_ab(i));
    double acc = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t) {
      const cplx resid = s.sigma_bx(i, t) -
                         s.gamma(i, t) * std::conj(s.sigma_ab(i)) * s.trho_ax(i, t);
      acc += s.gamma(i, t) * ab2 + std::norm(resid) / tilde.r_u(i, t);
    }
    (*lambda)(i) = std::max(acc / static_cast<double>(frames), eps_var);
  }
}

inline void update_ru(const SolverScratch& s, const RcscmParams& tilde,
                      Eigen::Index mics, double eps_var, MatR* r_u) {
  const Eigen::Index num_bins = tilde.r_h.rows();
  const Eigen::Index frames = tilde.r_h.cols();
  r_u->resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const double g = s.gamma(i, t);
      const double val =
          (g * s.rho_aa(i) * (tilde.r_u(i, t) + g * std::norm(s.trho_ax(i, t))) +
           s.rho_xx(i, t) -
           2.0 * g * std::real(s.trho_ax(i, t) * std::conj(s.rho_ax(i, t)))) /
          static_cast<double>(mics);
      (*r_u)(i, t) = std::max(val, eps_var);
    }
  }
}

namespace detail {

// Shared loop of Algorithms 1 and 2; the only difference is how the rho
// quantities are produced (explicit per-frequency inversion vs. scalar
// expansion from the precomputed tau/sigma).
inline SolverResult run_accelerated(const RcscmInputs& in, const RcscmParams& params0,
                                    const Hyperparams& hyper, const Spectrogram& X,
                                    const SolverOptions& opt, bool second_stage) {
  if (opt.iters < 0) throw InvalidInputError("run_accelerated: iters must be >= 0");
  SolverResult res;
  res.params = params0;
  if (opt.compute_objective)
    res.objective.push_back(map_objective(in, res.params, hyper, X));

  SolverScratch s;
  precompute_sigma(in, X, &s);
  if (second_stage) precompute_tau(in, X, &s);

  // Line 4: rho_aa / rho_ax for the initial parameters.
  if (second_stage)
    rho_second_stage(s, res.params.lambda, &s.rho_aa, &s.rho_ax, nullptr);
  else
    rho_first_stage(in, X, res.params.lambda, &s.rho_aa, &s.rho_ax, nullptr,
                    opt.threads);

  RcscmParams tilde;
  for (int it = 0; it < opt.iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();

    // Snapshot of parameters and rho quantities (lines 6-10).
    tilde = res.params;
    s.trho_aa = s.rho_aa;
    s.trho_ax = s.rho_ax;

    compute_gamma(tilde, s.trho_aa, &s);
    if (opt.gamma_fault != 0.0) s.gamma.array() += opt.gamma_fault;

    update_rh(s, tilde, hyper, opt.eps_var, &res.params.r_h);
    update_lambda(s, tilde, opt.eps_var, &res.params.lambda);

    // rho with the new lambda (Algorithm 1 line 14 / scalar expansion).
    if (second_stage)
      rho_second_stage(s, res.params.lambda, &s.rho_aa, &s.rho_ax, &s.rho_xx);
    else
      rho_first_stage(in, X, res.params.lambda, &s.rho_aa, &s.rho_ax, &s.rho_xx,
                      opt.threads);

    update_ru(s, tilde, in.mics(), opt.eps_var, &res.params.r_u);

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

}  // namespace detail

// First-stage acceleration (Sherman-Morrison expansion): O(IM^3 + IJM^2)
// per iteration.
inline SolverResult run_algorithm1(const RcscmInputs& in, const RcscmParams& params0,
                                   const Hyperparams& hyper, const Spectrogram& X,
                                   const SolverOptions& opt) {
  return detail::run_accelerated(in, params0, hyper, X, opt, /*second_stage=*/false);
}

// Second-stage acceleration (pseudoinverse scalar expansion): O(IJ) per
// iteration, no matrix or vector operation inside the loop.
inline SolverResult run_algorithm2(const RcscmInputs& in, const RcscmParams& params0,
                                   const Hyperparams& hyper, const Spectrogram& X,
                                   const SolverOptions& opt) {
  return detail::run_accelerated(in, params0, hyper, X, opt, /*second_stage=*/true);
}

}  // namespace rcscm
