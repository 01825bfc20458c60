#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "rcscm/stft.hpp"
#include "rcscm/types.hpp"

namespace rcscm {

inline constexpr double kSpeedOfSound = 343.0;  // m/s

// Uniform linear array lying along the x axis; DOA measured from broadside.
struct ArrayGeometry {
  int mics = 4;
  // Kept below c / f_s (about 21 mm at 16 kHz) so the array is free of
  // spatial aliasing up to Nyquist even at endfire; with a wider spacing the
  // high-frequency steering vectors of distinct directions collide and the
  // covariance model can no longer tell target from noise there.
  double spacing_m = 0.0125;
};

struct Scenario {
  ArrayGeometry geometry;
  double target_doa_deg = 25.0;
  std::vector<double> noise_doas_deg;  // defaults set by default_scenario()
  double snr_db = 0.0;
  uint64_t seed = 0;
  double sample_rate = 16000.0;
  double duration_s = 6.0;
  double win_ms = 64.0;
  double hop_ms = 32.0;
};

// 19 noise directions at 10 degree intervals spanning -90..90, target off
// the grid at 25 degrees.
inline Scenario default_scenario() {
  Scenario sc;
  for (int k = 0; k < 19; ++k) sc.noise_doas_deg.push_back(-90.0 + 10.0 * k);
  return sc;
}

// Far-field plane-wave steering vector, unit first element.
inline VecC steering_vector(const ArrayGeometry& geom, double doa_deg, double freq,
                            double sample_rate) {
  if (freq > sample_rate / 2.0 + 1e-9)
    throw InvalidInputError("steering_vector: frequency above Nyquist");
  if (std::abs(doa_deg) > 90.0 + 1e-9)
    throw InvalidInputError("steering_vector: |doa| must be <= 90 degrees");
  const double sin_theta = std::sin(doa_deg * M_PI / 180.0);
  VecC a(geom.mics);
  for (int m = 0; m < geom.mics; ++m) {
    const double delay = m * geom.spacing_m * sin_theta / kSpeedOfSound;
    a(m) = std::exp(cplx(0.0, -2.0 * M_PI * freq * delay));
  }
  return a;
}

namespace detail {

// Applies a steering vector per frequency bin to a mono waveform
// (anechoic instantaneous mixing in the STFT domain).
inline Waveform spatialize(const Waveform& mono, const Scenario& sc, double doa_deg) {
  const Spectrogram s = stft_analyze(mono, sc.win_ms, sc.hop_ms);
  const int win = s.win_samples;
  Spectrogram multi = s;
  for (Eigen::Index i = 0; i < s.num_bins(); ++i) {
    const double freq = static_cast<double>(i) * sc.sample_rate / win;
    const VecC a = steering_vector(sc.geometry, doa_deg, freq, sc.sample_rate);
    multi.bins[i] = a * s.bins[i].row(0);
  }
  return stft_synthesize(multi, sc.win_ms, sc.hop_ms);
}

inline double broadband_power(const Waveform& w) {
  return w.samples.squaredNorm() / static_cast<double>(w.num_samples());
}

}  // namespace detail

// Seeded Gaussian noise, one channel.
inline Waveform gaussian_noise(Eigen::Index n, double sample_rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(1, n);
  for (Eigen::Index s = 0; s < n; ++s) w.samples(0, s) = dist(rng);
  return w;
}

// Speech-like test material: Gaussian noise shaped by a slowly varying
// random envelope plus a gentle spectral tilt, so the source is strongly
// nonstationary (which the ILRMA stage needs) without shipping audio assets.
inline Waveform modulated_source(Eigen::Index n, double sample_rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  // Random envelope: squared mixture of slow sinusoids, in [0, ~1].
  const int num_partials = 6;
  std::vector<double> env_freq(num_partials), env_phase(num_partials);
  for (int k = 0; k < num_partials; ++k) {
    env_freq[k] = 0.4 + 3.6 * (k + 1) / num_partials *
                            std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    env_phase[k] = phase(rng);
  }

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = MatR::Zero(1, n);
  double lp = 0.0;  // one-pole lowpass for spectral tilt
  const double pole = 0.6;
  for (Eigen::Index s = 0; s < n; ++s) {
    const double t = s / sample_rate;
    double env = 0.0;
    for (int k = 0; k < num_partials; ++k)
      env += std::sin(2.0 * M_PI * env_freq[k] * t + env_phase[k]);
    env = env * env / (num_partials * num_partials) * num_partials;
    lp = pole * lp + (1.0 - pole) * dist(rng);
    w.samples(0, s) = env * lp;
  }
  return w;
}

struct MixtureResult {
  Waveform mixture;
  Waveform target_image;
  Waveform noise_image;
};

// Renders the anechoic mixture: target and each noise source are spatialized
// with their steering vectors, the summed noise image is scaled so the
// broadband target-to-noise power ratio equals snr_db, and
// mixture = target_image + noise_image holds sample-exactly.
inline MixtureResult render_mixture(const Scenario& sc, const Waveform& target_wave,
                                    const std::vector<Waveform>& noise_waves) {
  if (noise_waves.size() != sc.noise_doas_deg.size())
    throw InvalidInputError("render_mixture: one noise waveform per noise DOA");
  for (const auto& nw : noise_waves)
    if (nw.num_samples() != target_wave.num_samples())
      throw InvalidInputError("render_mixture: waveform length mismatch");

  MixtureResult out;
  out.target_image = detail::spatialize(target_wave, sc, sc.target_doa_deg);

  out.noise_image.sample_rate = sc.sample_rate;
  out.noise_image.samples =
      MatR::Zero(sc.geometry.mics, out.target_image.num_samples());
  for (size_t k = 0; k < noise_waves.size(); ++k) {
    const Waveform img = detail::spatialize(noise_waves[k], sc, sc.noise_doas_deg[k]);
    out.noise_image.samples += img.samples;
  }

  const double tp = detail::broadband_power(out.target_image);
  const double np = detail::broadband_power(out.noise_image);
  if (np > 0.0 && tp > 0.0) {
    const double gain = std::sqrt(tp / np * std::pow(10.0, -sc.snr_db / 10.0));
    out.noise_image.samples *= gain;
  }

  out.mixture.sample_rate = sc.sample_rate;
  out.mixture.samples = out.target_image.samples + out.noise_image.samples;
  return out;
}

// Full scenario rendering from the seed alone.
inline MixtureResult render_scenario(const Scenario& sc) {
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::llround(sc.duration_s * sc.sample_rate));
  const Waveform target = modulated_source(n, sc.sample_rate, sc.seed);
  std::vector<Waveform> noises;
  for (size_t k = 0; k < sc.noise_doas_deg.size(); ++k)
    noises.push_back(gaussian_noise(n, sc.sample_rate, sc.seed + 1000 + k));
  return render_mixture(sc, target, noises);
}

}  // namespace rcscm
