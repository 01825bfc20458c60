#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcscm {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

// Thrown on violated preconditions (bad shapes, non-Hermitian input,
// nonpositive variances, parameter mismatches).
struct InvalidInputError : std::invalid_argument {
  explicit InvalidInputError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Thrown when a computation breaks down at runtime (singular matrix,
// non-finite objective); the message names the offending (i, j) slot.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

// Multichannel time-domain signal, one row per channel.
struct Waveform {
  MatR samples;  // channels x num_samples
  double sample_rate = 16000.0;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index num_samples() const { return samples.cols(); }
};

// I x J x M tensor of STFT coefficients, stored per frequency bin as an
// M x J matrix so per-bin linear algebra works on contiguous columns.
struct Spectrogram {
  std::vector<MatC> bins;  // bins[i] is channels x frames
  double sample_rate = 16000.0;
  int win_samples = 0;
  int hop_samples = 0;
  Eigen::Index source_samples = 0;  // original waveform length, for synthesis

  Eigen::Index num_bins() const { return static_cast<Eigen::Index>(bins.size()); }
  Eigen::Index frames() const { return bins.empty() ? 0 : bins[0].cols(); }
  Eigen::Index channels() const { return bins.empty() ? 0 : bins[0].rows(); }
};

inline constexpr double kEpsVar = 1e-12;  // floor for r_h, r_u, lambda

}  // namespace rcscm
