#include <doctest.h>

#include <random>

#include "rcscm/metrics.hpp"
#include "test_util.hpp"

using namespace rcscm;

namespace {

Eigen::RowVectorXd seeded_row(Eigen::Index n, uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::RowVectorXd v(n);
  for (auto& e : v.reshaped()) e = gauss(engine);
  return v;
}

BenchRecord fake_record(const std::string& backend, int mics, double iter_time,
                        Eigen::Index bins = 64, Eigen::Index frames = 1024) {
  BenchRecord rec;
  rec.backend = backend;
  rec.mics = mics;
  rec.bins = bins;
  rec.frames = frames;
  rec.iter_seconds.assign(10, iter_time);
  rec.total_seconds = 10 * iter_time;
  return rec;
}

}  // namespace

TEST_CASE("si_sdr: identical and scaled estimates are capped") {
  const Eigen::RowVectorXd ref = seeded_row(1000, 1);
  CHECK(si_sdr(ref, ref) == kSiSdrCap);
  CHECK(si_sdr(Eigen::RowVectorXd(2.0 * ref), ref) == kSiSdrCap);
  CHECK(si_sdr(Eigen::RowVectorXd(-ref), ref) == kSiSdrCap);
}

TEST_CASE("si_sdr: equal-power orthogonal noise gives 0 dB") {
  const Eigen::RowVectorXd ref = seeded_row(2000, 2);
  Eigen::RowVectorXd noise = seeded_row(2000, 3);
  // Make the residual exactly orthogonal to the reference and equal power.
  noise -= (noise.dot(ref) / ref.squaredNorm()) * ref;
  noise *= ref.norm() / noise.norm();
  CHECK(si_sdr(Eigen::RowVectorXd(ref + noise), ref) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("si_sdr: input validation") {
  const Eigen::RowVectorXd ref = seeded_row(100, 4);
  CHECK_THROWS_AS(si_sdr(seeded_row(99, 5), ref), InvalidInputError);
  CHECK_THROWS_AS(si_sdr(ref, Eigen::RowVectorXd::Zero(100)), InvalidInputError);
}

TEST_CASE("median_iter_seconds: warm-up iterations excluded") {
  BenchRecord rec = fake_record("naive", 4, 1.0);
  rec.iter_seconds = {100.0, 100.0, 100.0, 2.0, 2.0, 2.0, 2.0};
  CHECK(median_iter_seconds(rec) == 2.0);
}

TEST_CASE("speedup_report: identical records give ratio 1.0") {
  std::vector<BenchRecord> records = {fake_record("naive", 4, 1e-3),
                                      fake_record("accel2", 4, 1e-3)};
  const SpeedupReport rep = speedup_report(records);
  CHECK(rep.ratios.at("naive/accel2") == doctest::Approx(1.0));
}

TEST_CASE("speedup_report: fabricated cubic timings fit exponent 3") {
  std::vector<BenchRecord> records;
  for (int m : {2, 4, 8, 16})
    records.push_back(fake_record("naive", m, 1e-5 * m * m * m));
  for (int m : {2, 4, 8, 16}) records.push_back(fake_record("accel2", m, 1e-5));
  const SpeedupReport rep = speedup_report(records);
  CHECK(rep.exponents.at("naive") == doctest::Approx(3.0).epsilon(0.01));
  CHECK(rep.exponents.at("accel2") == doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("speedup_report: permutation-invariant in record order") {
  std::vector<BenchRecord> records;
  for (int m : {2, 4, 8}) {
    records.push_back(fake_record("naive", m, 1e-4 * m * m * m));
    records.push_back(fake_record("accel1", m, 1e-4 * m * m));
  }
  const SpeedupReport fwd = speedup_report(records);
  std::reverse(records.begin(), records.end());
  const SpeedupReport rev = speedup_report(records);
  CHECK(fwd.ratios == rev.ratios);
  CHECK(fwd.exponents == rev.exponents);
  CHECK(fwd.median_seconds == rev.median_seconds);
}

TEST_CASE("fit_exponent: direct slope recovery and validation") {
  CHECK(fit_exponent({2, 4, 8}, {4.0, 16.0, 64.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(fit_exponent({2}, {4.0}), InvalidInputError);
  CHECK_THROWS_AS(fit_exponent({2, 4}, {4.0}), InvalidInputError);
}
