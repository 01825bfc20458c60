#pragma once

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rcscm/types.hpp"

namespace rcscm {

// Periodic Hamming window of length n.
inline VecR hamming_window(int n) {
  VecR w(n);
  for (int k = 0; k < n; ++k)
    w(k) = 0.54 - 0.46 * std::cos(2.0 * M_PI * k / n);
  return w;
}

// Weighted overlap-add dual of an analysis window: d[k] = w[k] / sum of
// squared window values hitting the same position modulo hop. Overlap-adding
// d[k] * w[k] then sums to exactly 1 wherever window coverage is complete.
inline VecR wola_dual_window(const VecR& win, int hop) {
  const int n = static_cast<int>(win.size());
  VecR denom = VecR::Zero(hop);
  for (int k = 0; k < n; ++k) denom(k % hop) += win(k) * win(k);
  VecR dual(n);
  for (int k = 0; k < n; ++k) dual(k) = win(k) / denom(k % hop);
  return dual;
}

namespace detail {

inline void stft_params(const double sample_rate, double win_ms, double hop_ms,
                        int* win, int* hop) {
  if (!(win_ms > hop_ms && hop_ms > 0))
    throw InvalidInputError("stft: require win_ms > hop_ms > 0");
  *win = static_cast<int>(std::lround(win_ms * 1e-3 * sample_rate));
  *hop = static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
  if (*win < 2 || *hop < 1)
    throw InvalidInputError("stft: window shorter than 2 samples");
}

}  // namespace detail

// Forward STFT. Padding convention: the signal is zero-padded by
// (win - hop) samples in front and by whatever the last frame needs at the
// back, so every input sample has full window coverage;
// J = ceil((len + win - hop) / hop).
inline Spectrogram stft_analyze(const Waveform& w, double win_ms, double hop_ms) {
  if (w.num_samples() == 0 || w.channels() == 0)
    throw InvalidInputError("stft_analyze: empty waveform");
  int win = 0, hop = 0;
  detail::stft_params(w.sample_rate, win_ms, hop_ms, &win, &hop);

  const Eigen::Index len = w.num_samples();
  const Eigen::Index m = w.channels();
  const int front_pad = win - hop;
  const Eigen::Index frames =
      (len + front_pad + hop - 1) / hop;  // ceil((len + pad) / hop)
  const int num_bins = win / 2 + 1;

  const VecR window = hamming_window(win);

  Spectrogram spec;
  spec.sample_rate = w.sample_rate;
  spec.win_samples = win;
  spec.hop_samples = hop;
  spec.source_samples = len;
  spec.bins.assign(num_bins, MatC::Zero(m, frames));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(win);
  std::vector<cplx> bins_out(win / 2 + 1);
  for (Eigen::Index ch = 0; ch < m; ++ch) {
    for (Eigen::Index j = 0; j < frames; ++j) {
      const Eigen::Index start = j * hop - front_pad;
      for (int k = 0; k < win; ++k) {
        const Eigen::Index p = start + k;
        frame[k] = (p >= 0 && p < len) ? w.samples(ch, p) * window(k) : 0.0;
      }
      fft.fwd(bins_out, frame);
      for (int i = 0; i < num_bins; ++i) spec.bins[i](ch, j) = bins_out[i];
    }
  }
  return spec;
}

// Inverse STFT via weighted overlap-add with the dual window; exact
// round-trip (up to floating point) for spectrograms from stft_analyze.
inline Waveform stft_synthesize(const Spectrogram& s, double win_ms, double hop_ms) {
  if (s.num_bins() == 0) throw InvalidInputError("stft_synthesize: empty spectrogram");
  int win = 0, hop = 0;
  detail::stft_params(s.sample_rate, win_ms, hop_ms, &win, &hop);
  if (win != s.win_samples || hop != s.hop_samples)
    throw InvalidInputError("stft_synthesize: window/hop do not match analysis");
  if (s.num_bins() != win / 2 + 1)
    throw InvalidInputError("stft_synthesize: bin count inconsistent with window");

  const Eigen::Index frames = s.frames();
  const Eigen::Index m = s.channels();
  const int front_pad = win - hop;
  const Eigen::Index len =
      s.source_samples > 0 ? s.source_samples : frames * hop - front_pad;

  const VecR dual = wola_dual_window(hamming_window(win), hop);

  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples = MatR::Zero(m, len);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<cplx> bins_in(win / 2 + 1);
  std::vector<double> frame(win);
  for (Eigen::Index ch = 0; ch < m; ++ch) {
    for (Eigen::Index j = 0; j < frames; ++j) {
      for (int i = 0; i < win / 2 + 1; ++i) bins_in[i] = s.bins[i](ch, j);
      fft.inv(frame, bins_in);
      const Eigen::Index start = j * hop - front_pad;
      for (int k = 0; k < win; ++k) {
        const Eigen::Index p = start + k;
        if (p >= 0 && p < len) out.samples(ch, p) += frame[k] * dual(k);
      }
    }
  }
  return out;
}

}  // namespace rcscm
