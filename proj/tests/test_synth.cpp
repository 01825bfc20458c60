#include <doctest.h>

#include "rcscm/synth.hpp"
#include "test_util.hpp"

using namespace rcscm;

TEST_CASE("steering_vector: broadside and endfire geometry") {
  ArrayGeometry geom;
  geom.mics = 4;
  geom.spacing_m = 0.05;
  const VecC broadside = steering_vector(geom, 0.0, 1000.0, 16000.0);
  CHECK((broadside - VecC::Ones(4)).norm() < 1e-12);

  geom.mics = 2;
  const double f = 2000.0;
  const VecC endfire = steering_vector(geom, 90.0, f, 16000.0);
  const double expected_phase = 2.0 * M_PI * f * geom.spacing_m / kSpeedOfSound;
  CHECK(std::abs(endfire(0) - cplx(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(endfire(1)) == doctest::Approx(1.0));
  CHECK(std::abs(std::arg(endfire(1))) == doctest::Approx(expected_phase));
}

TEST_CASE("steering_vector: distinct directions are not parallel") {
  ArrayGeometry geom;
  const VecC a1 = steering_vector(geom, 25.0, 3000.0, 16000.0);
  const VecC a2 = steering_vector(geom, -40.0, 3000.0, 16000.0);
  CHECK(std::abs(a1.dot(a2)) / static_cast<double>(geom.mics) < 1.0 - 1e-6);
}

TEST_CASE("steering_vector: input validation") {
  ArrayGeometry geom;
  CHECK_THROWS_AS(steering_vector(geom, 0.0, 9000.0, 16000.0), InvalidInputError);
  CHECK_THROWS_AS(steering_vector(geom, 120.0, 1000.0, 16000.0), InvalidInputError);
}

TEST_CASE("render_mixture: zero noise gives mixture equal to target image") {
  Scenario sc = default_scenario();
  sc.duration_s = 1.0;
  const Eigen::Index n = 16000;
  const Waveform target = modulated_source(n, sc.sample_rate, 1);
  std::vector<Waveform> noises;
  for (size_t k = 0; k < sc.noise_doas_deg.size(); ++k) {
    Waveform z;
    z.sample_rate = sc.sample_rate;
    z.samples = MatR::Zero(1, n);
    noises.push_back(z);
  }
  const MixtureResult mix = render_mixture(sc, target, noises);
  CHECK((mix.mixture.samples - mix.target_image.samples).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(mix.noise_image.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("render_scenario: exact SNR, exact additivity, reproducibility") {
  Scenario sc = default_scenario();
  sc.duration_s = 2.0;
  sc.seed = 9;
  const MixtureResult mix = render_scenario(sc);

  // mixture = target + noise, sample-exact (same summation order as the
  // construction, so the comparison is bitwise).
  CHECK((mix.mixture.samples -
         (mix.target_image.samples + mix.noise_image.samples))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // 0 dB config: image powers equal within 0.01 dB.
  const double pt = mix.target_image.samples.squaredNorm();
  const double pn = mix.noise_image.samples.squaredNorm();
  CHECK(std::abs(10.0 * std::log10(pt / pn)) < 0.01);

  const MixtureResult again = render_scenario(sc);
  CHECK((mix.mixture.samples - again.mixture.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("render_scenario: nonzero SNR configurations are exact too") {
  Scenario sc = default_scenario();
  sc.duration_s = 1.0;
  sc.snr_db = 6.0;
  const MixtureResult mix = render_scenario(sc);
  const double pt = mix.target_image.samples.squaredNorm();
  const double pn = mix.noise_image.samples.squaredNorm();
  CHECK(10.0 * std::log10(pt / pn) == doctest::Approx(6.0).epsilon(1e-3));
}

TEST_CASE("render_scenario: 19-direction noise field is diffuse (full rank)") {
  Scenario sc = default_scenario();
  sc.duration_s = 2.0;
  sc.seed = 5;
  const MixtureResult mix = render_scenario(sc);
  const Spectrogram s = stft_analyze(mix.noise_image, sc.win_ms, sc.hop_ms);
  const Eigen::Index m = s.channels();
  // Upper-band bins, where the array aperture resolves the directions: the
  // sample covariance should have M significant eigenvalues. (Low bins are
  // full rank too, but the diffuse field is nearly coherent there because
  // the alias-free spacing keeps d/wavelength small, so the minimum
  // eigenvalue is only a vanishing fraction of the maximum.)
  for (Eigen::Index i = 320; i <= 512; i += 64) {
    const MatC cov = s.bins[i] * s.bins[i].adjoint() / double(s.frames());
    const auto eig = hermitian_eig((cov + cov.adjoint()) / 2.0);
    CHECK(eig.values(0) > 1e-4 * eig.values(m - 1));
  }
}

TEST_CASE("render_mixture: length mismatch rejected") {
  Scenario sc = default_scenario();
  const Waveform target = modulated_source(1000, sc.sample_rate, 1);
  std::vector<Waveform> noises(sc.noise_doas_deg.size(),
                               gaussian_noise(999, sc.sample_rate, 2));
  CHECK_THROWS_AS(render_mixture(sc, target, noises), InvalidInputError);
}
