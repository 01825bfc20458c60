#include <doctest.h>

#include "rcscm/wiener.hpp"
#include "test_util.hpp"

using namespace rcscm;
using test::Instance;

TEST_CASE("extract_target: r_h = 0 silences the estimate") {
  Instance inst = test::random_instance(3, 8, 3, 1);
  inst.params.r_h.setZero();
  const ExtractionResult res = extract_target(inst.inputs, inst.params, inst.X);
  CHECK(res.dry.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& bin : res.image.bins) CHECK(bin.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("extract_target: noiseless limit passes the target subspace") {
  Instance inst = test::random_instance(2, 4, 3, 2);
  const cplx c(1.5, -0.8);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index t = 0; t < 4; ++t)
      inst.X.bins[i].col(t) = c * inst.inputs.a[i];
  inst.params.r_u.setConstant(1e-14);
  inst.params.r_h.setOnes();
  const ExtractionResult res = extract_target(inst.inputs, inst.params, inst.X);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index t = 0; t < 4; ++t)
      CHECK(std::abs(res.dry(i, t) - c) < 1e-6);
}

TEST_CASE("extract_target: matches the dense-inversion Wiener filter") {
  const Instance inst = test::random_instance(4, 10, 4, 3);
  const ExtractionResult res = extract_target(inst.inputs, inst.params, inst.X);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const VecC& a = inst.inputs.a[i];
    const MatC R_u = inst.inputs.R_prime[i] + inst.params.lambda(i) *
                                                  inst.inputs.b[i] *
                                                  inst.inputs.b[i].adjoint();
    for (Eigen::Index t = 0; t < 10; ++t) {
      const double rh = inst.params.r_h(i, t);
      const MatC Rx = rh * a * a.adjoint() + inst.params.r_u(i, t) * R_u;
      const VecC x = inst.X.bins[i].col(t);
      const cplx s_dense = rh * a.dot(Rx.inverse() * x);
      CHECK(std::abs(res.dry(i, t) - s_dense) <
            1e-9 * std::max(1.0, std::abs(s_dense)));
      CHECK((res.image.bins[i].col(t) - res.dry(i, t) * a).norm() < 1e-12);
    }
  }
}

TEST_CASE("extract_noise: complement of the target image") {
  const Instance inst = test::random_instance(3, 6, 3, 4);
  const ExtractionResult target = extract_target(inst.inputs, inst.params, inst.X);
  const Spectrogram noise = extract_noise(inst.inputs, inst.params, inst.X);
  for (Eigen::Index i = 0; i < 3; ++i) {
    // Additivity is exact by construction: noise is defined as x minus the
    // target image, so the same subtraction order compares bitwise.
    CHECK((inst.X.bins[i] - target.image.bins[i] - noise.bins[i])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("extract_noise: target image equal to x gives zero noise") {
  Instance inst = test::random_instance(2, 4, 2, 5);
  // Noiseless construction: x in the target subspace with tiny r_u.
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index t = 0; t < 4; ++t)
      inst.X.bins[i].col(t) = cplx(2.0, 1.0) * inst.inputs.a[i];
  inst.params.r_u.setConstant(1e-14);
  inst.params.r_h.setOnes();
  const Spectrogram noise = extract_noise(inst.inputs, inst.params, inst.X);
  for (const auto& bin : noise.bins) CHECK(bin.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("extract_noise: equals the posterior mean of u from the dense formula") {
  const Instance inst = test::random_instance(3, 8, 4, 6);
  const Spectrogram noise = extract_noise(inst.inputs, inst.params, inst.X);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const VecC& a = inst.inputs.a[i];
    const MatC R_u = inst.inputs.R_prime[i] + inst.params.lambda(i) *
                                                  inst.inputs.b[i] *
                                                  inst.inputs.b[i].adjoint();
    for (Eigen::Index t = 0; t < 8; ++t) {
      const double ru = inst.params.r_u(i, t);
      const MatC Rx = inst.params.r_h(i, t) * a * a.adjoint() + ru * R_u;
      const VecC x = inst.X.bins[i].col(t);
      const VecC u_mean = ru * R_u * Rx.inverse() * x;
      CHECK((noise.bins[i].col(t) - u_mean).norm() <
            1e-9 * std::max(1.0, u_mean.norm()));
    }
  }
}
