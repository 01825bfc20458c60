#include <doctest.h>

#include "rcscm/linalg.hpp"
#include "test_util.hpp"

using namespace rcscm;
using test::Rng;
using test::rel_error;

TEST_CASE("hermitian_eig: identity and diagonal cases") {
  const auto id = hermitian_eig(MatC::Identity(2, 2));
  CHECK(id.values(0) == doctest::Approx(1.0));
  CHECK(id.values(1) == doctest::Approx(1.0));
  CHECK(rel_error(id.vectors * id.vectors.adjoint(), MatC::Identity(2, 2)) < 1e-12);

  MatC d = MatC::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const auto eig = hermitian_eig(d);
  CHECK(eig.values(0) == doctest::Approx(1.0));
  CHECK(eig.values(1) == doctest::Approx(3.0));
  CHECK(std::abs(eig.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(eig.vectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("hermitian_eig: seeded reconstruction and orthonormality") {
  Rng rng(42);
  const MatC h = rng.hermitian_pd(4);
  const auto eig = hermitian_eig(h);
  MatC recon = MatC::Zero(4, 4);
  for (int k = 0; k < 4; ++k)
    recon += eig.values(k) * eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  CHECK(rel_error(recon, h) < 1e-10);
  CHECK((eig.vectors.adjoint() * eig.vectors - MatC::Identity(4, 4)).norm() < 1e-10);
  for (int k = 1; k < 4; ++k) CHECK(eig.values(k) >= eig.values(k - 1));
}

TEST_CASE("hermitian_eig: rejects non-Hermitian input") {
  MatC bad = MatC::Zero(2, 2);
  bad(0, 1) = cplx(1.0, 0.0);
  bad(1, 0) = cplx(2.0, 0.0);
  CHECK_THROWS_AS(hermitian_eig(bad), InvalidInputError);
}

TEST_CASE("pseudo_inverse_psd: diagonal rank-deficient case") {
  MatC h = MatC::Zero(2, 2);
  h(0, 0) = 2.0;
  const MatC pinv = pseudo_inverse_psd(h);
  CHECK(std::abs(pinv(0, 0) - cplx(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(pinv(1, 1)) < 1e-14);
}

TEST_CASE("pseudo_inverse_psd: full-rank input gives ordinary inverse") {
  Rng rng(7);
  const MatC h = rng.hermitian_pd(4);
  const MatC pinv = pseudo_inverse_psd(h);
  CHECK(rel_error(h * pinv, MatC::Identity(4, 4)) < 1e-10);
  // Idempotent under double application on full-rank inputs.
  CHECK(rel_error(pseudo_inverse_psd(pinv), h) < 1e-8);
}

TEST_CASE("pseudo_inverse_psd: rank-one projector is its own pseudoinverse") {
  Rng rng(11);
  VecC b = rng.complex_vector(3);
  b /= b.norm();
  const MatC h = b * b.adjoint();
  CHECK(rel_error(pseudo_inverse_psd(h), h) < 1e-10);
}

TEST_CASE("pseudo_inverse_psd: satisfies H H+ H = H on rank-deficient input") {
  Rng rng(13);
  const MatC h = rng.rank_deficient_psd(5);
  const MatC pinv = pseudo_inverse_psd(h);
  CHECK(rel_error(h * pinv * h, h) < 1e-9);
}

TEST_CASE("pseudo_inverse_psd: rejects indefinite input") {
  MatC h = MatC::Identity(2, 2);
  h(1, 1) = -1.0;
  CHECK_THROWS_AS(pseudo_inverse_psd(h), InvalidInputError);
}

TEST_CASE("null_eigenvector: diagonal case") {
  MatC d = MatC::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  const VecC b = null_eigenvector(d);
  CHECK(std::abs(b(2) - cplx(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(b(0)) < 1e-12);
  CHECK(std::abs(b(1)) < 1e-12);
}

TEST_CASE("null_eigenvector: recovered from a known eigenbasis") {
  Rng rng(21);
  // Seeded unitary from QR of a random matrix.
  const Eigen::HouseholderQR<MatC> qr(rng.complex_matrix(3, 3));
  const MatC u = qr.householderQ();
  VecR vals(3);
  vals << 1.0, 2.0, 0.0;
  const MatC h = u * vals.asDiagonal() * u.adjoint();
  const VecC b = null_eigenvector((h + h.adjoint()) / 2.0);
  const VecC expected = normalize_phase(u.col(2));
  CHECK((b - expected).norm() < 1e-10);
  CHECK(std::abs(b.norm() - 1.0) < 1e-12);
}

TEST_CASE("null_eigenvector: two zero eigenvalues rejected") {
  MatC d = MatC::Zero(3, 3);
  d(0, 0) = 1.0;
  CHECK_THROWS_AS(null_eigenvector(d), InvalidInputError);
  CHECK_THROWS_AS(null_eigenvector(MatC::Identity(3, 3)), InvalidInputError);
}

TEST_CASE("sherman_morrison_inverse: trivial cases") {
  Rng rng(31);
  const MatC r = rng.hermitian_pd(3);
  const MatC rinv = r.inverse();
  const VecC a = rng.complex_vector(3);
  // c = 0 -> (1/d) Rinv exactly.
  CHECK(rel_error(sherman_morrison_inverse(rinv, a, 0.0, 2.0), MatC(0.5 * rinv)) <
        1e-14);
  // Scalar case 1/(1+1).
  const MatC one = MatC::Identity(1, 1);
  VecC a1(1);
  a1 << cplx(1.0, 0.0);
  CHECK(std::abs(sherman_morrison_inverse(one, a1, 1.0, 1.0)(0, 0) -
                 cplx(0.5, 0.0)) < 1e-14);
  CHECK_THROWS_AS(sherman_morrison_inverse(rinv, a, 1.0, 0.0), InvalidInputError);
}

TEST_CASE("sherman_morrison_inverse: matches dense inversion on seeded grid") {
  for (int m : {2, 3, 4, 8}) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(1000 * m + seed);
      const MatC r = rng.hermitian_pd(m);
      const VecC a = rng.complex_vector(m);
      const double c = 0.5 + std::abs(rng.real());
      const double d = 0.5 + std::abs(rng.real());
      const MatC direct = (c * a * a.adjoint() + d * r).inverse();
      const MatC sm = sherman_morrison_inverse(r.inverse(), a, c, d);
      CHECK(rel_error(sm, direct) < 1e-9);
    }
  }
}

TEST_CASE("rank_one_restored_inverse: diagonal and scalar cases") {
  MatC rp = MatC::Zero(2, 2);
  rp(0, 0) = 1.0;
  VecC b(2);
  b << cplx(0.0, 0.0), cplx(1.0, 0.0);
  const MatC inv = rank_one_restored_inverse(pseudo_inverse_psd(rp), b, 2.0);
  CHECK(std::abs(inv(0, 0) - cplx(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(inv(1, 1) - cplx(0.5, 0.0)) < 1e-14);

  const MatC zero1 = MatC::Zero(1, 1);
  VecC b1(1);
  b1 << cplx(1.0, 0.0);
  CHECK(std::abs(rank_one_restored_inverse(zero1, b1, 3.0)(0, 0) -
                 cplx(1.0 / 3.0, 0.0)) < 1e-14);
}

TEST_CASE("rank_one_restored_inverse: equals dense inverse across lambda range") {
  Rng rng(57);
  const MatC rp = rng.rank_deficient_psd(4);
  const MatC pinv = pseudo_inverse_psd(rp);
  const VecC b = null_eigenvector(rp);
  for (double lambda : {1e-6, 1e-2, 1.0, 1e3}) {
    const MatC inv = rank_one_restored_inverse(pinv, b, lambda);
    const MatC full = rp + lambda * b * b.adjoint();
    CHECK(rel_error(inv * full, MatC::Identity(4, 4)) < 1e-8);
  }
}

TEST_CASE("rank_one_restored_inverse: precondition violations") {
  Rng rng(58);
  const MatC rp = rng.rank_deficient_psd(3);
  const MatC pinv = pseudo_inverse_psd(rp);
  const VecC b = null_eigenvector(rp);
  CHECK_THROWS_AS(rank_one_restored_inverse(pinv, b, 0.0), InvalidInputError);
  CHECK_THROWS_AS(rank_one_restored_inverse(pinv, VecC(2.0 * b), 1.0),
                  InvalidInputError);
  VecC outside = rng.complex_vector(3);
  outside /= outside.norm();
  CHECK_THROWS_AS(rank_one_restored_inverse(pinv, outside, 1.0), InvalidInputError);
}
