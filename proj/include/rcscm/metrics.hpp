#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "rcscm/types.hpp"

namespace rcscm {

inline constexpr double kSiSdrCap = 300.0;  // dB, reported for exact matches

// Scale-invariant source-to-distortion ratio in dB between single channels.
inline double si_sdr(const Eigen::Ref<const Eigen::RowVectorXd>& estimate,
                     const Eigen::Ref<const Eigen::RowVectorXd>& reference) {
  if (estimate.size() != reference.size())
    throw InvalidInputError("si_sdr: length mismatch");
  const double ref_energy = reference.squaredNorm();
  if (ref_energy == 0.0) throw InvalidInputError("si_sdr: zero reference");
  const double alpha = estimate.dot(reference) / ref_energy;
  const double target_energy = alpha * alpha * ref_energy;
  const double err_energy = (estimate - alpha * reference).squaredNorm();
  if (err_energy <= target_energy * std::pow(10.0, -kSiSdrCap / 10.0))
    return kSiSdrCap;
  return 10.0 * std::log10(target_energy / err_energy);
}

// Per-run benchmark record for one backend.
struct BenchRecord {
  std::string backend;
  int mics = 0;
  Eigen::Index bins = 0;
  Eigen::Index frames = 0;
  std::vector<double> iter_seconds;
  double total_seconds = 0.0;
  std::vector<double> objective;
  int warmup = 3;  // leading iterations excluded from the median
};

inline double median_iter_seconds(const BenchRecord& rec) {
  const int skip = std::min<int>(rec.warmup,
                                 std::max<int>(0, (int)rec.iter_seconds.size() - 1));
  std::vector<double> t(rec.iter_seconds.begin() + skip, rec.iter_seconds.end());
  if (t.empty()) throw InvalidInputError("median_iter_seconds: no timed iterations");
  std::sort(t.begin(), t.end());
  const size_t n = t.size();
  return n % 2 == 1 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

struct SpeedupReport {
  // Median per-iteration time per backend at matching (I, J, M).
  std::map<std::string, double> median_seconds;
  // Ratio of each backend's median time to every other one ("a/b").
  std::map<std::string, double> ratios;
  // Complexity-fit exponent per backend from log-log regression over an
  // M sweep at fixed I*J, when the records contain such a sweep.
  std::map<std::string, double> exponents;
};

// Least-squares slope of log(t) against log(M).
inline double fit_exponent(const std::vector<int>& mics,
                           const std::vector<double>& seconds) {
  if (mics.size() != seconds.size() || mics.size() < 2)
    throw InvalidInputError("fit_exponent: need >= 2 matched points");
  const size_t n = mics.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < n; ++k) {
    const double x = std::log(static_cast<double>(mics[k]));
    const double y = std::log(seconds[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Aggregates bench records into speedup ratios (records at matching shapes)
// and complexity exponents (per-backend M sweeps at fixed I*J).
inline SpeedupReport speedup_report(const std::vector<BenchRecord>& records) {
  if (records.size() < 2)
    throw InvalidInputError("speedup_report: need >= 2 records");

  SpeedupReport rep;
  // Group by (backend, shape); pool iteration times so the report does not
  // depend on record order.
  using Shape = std::tuple<int, Eigen::Index, Eigen::Index>;
  std::map<std::pair<std::string, Shape>, std::vector<double>> medians;
  for (const auto& rec : records) {
    const Shape shape{rec.mics, rec.bins, rec.frames};
    medians[{rec.backend, shape}].push_back(median_iter_seconds(rec));
  }
  auto pooled = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  // Ratios for every shape shared by at least two backends.
  std::map<Shape, std::map<std::string, double>> by_shape;
  for (const auto& [key, meds] : medians)
    by_shape[key.second][key.first] = pooled(meds);
  for (const auto& [shape, backends] : by_shape) {
    if (backends.size() < 2) continue;
    for (const auto& [na, ta] : backends) {
      rep.median_seconds[na] = ta;
      for (const auto& [nb, tb] : backends)
        if (na != nb) rep.ratios[na + "/" + nb] = ta / tb;
    }
  }

  // Exponents per backend over distinct M values at fixed I*J.
  std::map<std::pair<std::string, Eigen::Index>, std::map<int, std::vector<double>>>
      sweeps;
  for (const auto& [key, meds] : medians) {
    const auto& [mics, bins, frames] = key.second;
    for (double med : meds) sweeps[{key.first, bins * frames}][mics].push_back(med);
  }
  for (const auto& [key, by_m] : sweeps) {
    if (by_m.size() < 2) continue;
    std::vector<int> ms;
    std::vector<double> ts;
    for (const auto& [m, meds] : by_m) {
      ms.push_back(m);
      ts.push_back(pooled(meds));
    }
    rep.exponents[key.first] = fit_exponent(ms, ts);
  }
  return rep;
}

}  // namespace rcscm
