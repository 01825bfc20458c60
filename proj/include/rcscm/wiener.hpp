#pragma once

#include <vector>

#include "rcscm/model.hpp"
#include "rcscm/solver_accel.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

struct ExtractionResult {
  Spectrogram image;  // M-channel target spatial image
  MatC dry;           // I x J dry source estimate s-hat
};

// Multichannel Wiener filter for the directional target:
// s-hat = r_h a^H (R^(x))^{-1} x, evaluated through the scalar expansions
// (gamma * rho_ax with the current lambda); image = s-hat * a.
inline ExtractionResult extract_target(const RcscmInputs& in, const RcscmParams& p,
                                       const Spectrogram& X) {
  const Eigen::Index num_bins = X.num_bins();
  const Eigen::Index frames = X.frames();

  SolverScratch s;
  precompute_sigma(in, X, &s);
  precompute_tau(in, X, &s);
  VecR rho_aa;
  MatC rho_ax;
  rho_second_stage(s, p.lambda, &rho_aa, &rho_ax, nullptr);

  ExtractionResult out;
  out.image = X;
  out.dry.resize(num_bins, frames);
  for (Eigen::Index i = 0; i < num_bins; ++i) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const double gamma =
          p.r_h(i, t) / (p.r_u(i, t) + p.r_h(i, t) * rho_aa(i));
      out.dry(i, t) = gamma * rho_ax(i, t);
    }
    out.image.bins[i] = in.a[i] * out.dry.row(i);
  }
  return out;
}

// Posterior-mean noise image: the complement x - target image.
inline Spectrogram extract_noise(const RcscmInputs& in, const RcscmParams& p,
                                 const Spectrogram& X) {
  const ExtractionResult target = extract_target(in, p, X);
  Spectrogram noise = X;
  for (Eigen::Index i = 0; i < X.num_bins(); ++i)
    noise.bins[i] = X.bins[i] - target.image.bins[i];
  return noise;
}

}  // namespace rcscm
