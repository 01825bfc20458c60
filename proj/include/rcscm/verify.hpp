#pragma once

#include <random>

#include "rcscm/linalg.hpp"
#include "rcscm/model.hpp"
#include "rcscm/types.hpp"

// Seeded synthetic problem instances and trajectory comparison used by the
// backend-equivalence verification (cmd_verify and the test suite).

namespace rcscm {

struct VerifyInstance {
  RcscmInputs inputs;
  RcscmParams params;
  Spectrogram X;
};

// Random well-conditioned instance: rank-(M-1) noise SCMs from Gaussian
// factors, random steering vectors and observations, positive parameters.
inline VerifyInstance make_verify_instance(Eigen::Index bins, Eigen::Index frames,
                                           Eigen::Index mics, uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rand_cplx = [&] { return cplx(gauss(engine), gauss(engine)); };
  auto rand_matrix = [&](Eigen::Index r, Eigen::Index c) {
    MatC m(r, c);
    for (auto& e : m.reshaped()) e = rand_cplx();
    return m;
  };

  VerifyInstance inst;
  inst.X.bins.assign(bins, MatC());
  inst.inputs.n_h = 0;
  for (Eigen::Index i = 0; i < bins; ++i) {
    inst.X.bins[i] = rand_matrix(mics, frames);
    const MatC g = rand_matrix(mics, mics - 1);
    MatC rp = g * g.adjoint();
    inst.inputs.R_prime.push_back((rp + rp.adjoint()) / 2.0);
    inst.inputs.R_prime_pinv.push_back(pseudo_inverse_psd(inst.inputs.R_prime.back()));
    inst.inputs.b.push_back(null_eigenvector(inst.inputs.R_prime.back()));
    inst.inputs.a.push_back(rand_matrix(mics, 1));
  }
  inst.params.r_h.resize(bins, frames);
  inst.params.r_u.resize(bins, frames);
  inst.params.lambda.resize(bins);
  for (Eigen::Index i = 0; i < bins; ++i) {
    inst.params.lambda(i) = 0.1 + std::abs(gauss(engine));
    for (Eigen::Index t = 0; t < frames; ++t) {
      inst.params.r_h(i, t) = 0.1 + std::abs(gauss(engine));
      inst.params.r_u(i, t) = 0.1 + std::abs(gauss(engine));
    }
  }
  return inst;
}

// Maximum elementwise relative distance between two parameter sets, with an
// absolute floor at the variance floor (values are clamped there anyway).
inline double trajectory_distance(const RcscmParams& a, const RcscmParams& b) {
  auto mat = [](const MatR& x, const MatR& y) {
    return ((x - y).cwiseAbs().array() /
            x.cwiseAbs().array().max(y.cwiseAbs().array()).max(kEpsVar))
        .maxCoeff();
  };
  return std::max({mat(a.r_h, b.r_h), mat(a.r_u, b.r_u),
                   mat(MatR(a.lambda), MatR(b.lambda))});
}

}  // namespace rcscm
