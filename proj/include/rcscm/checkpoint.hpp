#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcscm/ilrma.hpp"
#include "rcscm/metrics.hpp"
#include "rcscm/model.hpp"
#include "rcscm/types.hpp"

// JSON checkpoint container shared between the ILRMA and RCSCM stages.
// Complex numbers are stored as [re, im] pairs; every tensor carries explicit
// shape fields; the top level has a schema_version field.

namespace rcscm {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

namespace detail {

inline json complex_matrix_to_json(const MatC& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline MatC complex_matrix_from_json(const json& j) {
  MatC m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& rows = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = cplx(rows[r][c][0].get<double>(), rows[r][c][1].get<double>());
  return m;
}

inline json real_matrix_to_json(const MatR& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline MatR real_matrix_from_json(const json& j) {
  MatR m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& rows = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c].get<double>();
  return m;
}

}  // namespace detail

inline json to_json(const DemixingSet& d) {
  json w = json::array(), a = json::array();
  for (const auto& m : d.W) w.push_back(detail::complex_matrix_to_json(m));
  for (const auto& m : d.A) a.push_back(detail::complex_matrix_to_json(m));
  return {{"W", std::move(w)}, {"A", std::move(a)}};
}

inline DemixingSet demixing_from_json(const json& j) {
  DemixingSet d;
  for (const auto& m : j.at("W")) d.W.push_back(detail::complex_matrix_from_json(m));
  for (const auto& m : j.at("A")) d.A.push_back(detail::complex_matrix_from_json(m));
  return d;
}

inline json to_json(const NmfModel& n) {
  json t = json::array(), v = json::array();
  for (const auto& m : n.T) t.push_back(detail::real_matrix_to_json(m));
  for (const auto& m : n.V) v.push_back(detail::real_matrix_to_json(m));
  return {{"T", std::move(t)}, {"V", std::move(v)}};
}

inline NmfModel nmf_from_json(const json& j) {
  NmfModel n;
  for (const auto& m : j.at("T")) n.T.push_back(detail::real_matrix_from_json(m));
  for (const auto& m : j.at("V")) n.V.push_back(detail::real_matrix_from_json(m));
  return n;
}

inline json to_json(const RcscmInputs& in) {
  json a = json::array(), rp = json::array(), rpp = json::array(), b = json::array();
  for (const auto& v : in.a) a.push_back(detail::complex_matrix_to_json(v));
  for (const auto& m : in.R_prime) rp.push_back(detail::complex_matrix_to_json(m));
  for (const auto& m : in.R_prime_pinv)
    rpp.push_back(detail::complex_matrix_to_json(m));
  for (const auto& v : in.b) b.push_back(detail::complex_matrix_to_json(v));
  return {{"a", std::move(a)},
          {"R_prime", std::move(rp)},
          {"R_prime_pinv", std::move(rpp)},
          {"b", std::move(b)},
          {"n_h", in.n_h}};
}

inline RcscmInputs inputs_from_json(const json& j) {
  RcscmInputs in;
  for (const auto& m : j.at("a"))
    in.a.push_back(detail::complex_matrix_from_json(m).col(0));
  for (const auto& m : j.at("R_prime"))
    in.R_prime.push_back(detail::complex_matrix_from_json(m));
  for (const auto& m : j.at("R_prime_pinv"))
    in.R_prime_pinv.push_back(detail::complex_matrix_from_json(m));
  for (const auto& m : j.at("b"))
    in.b.push_back(detail::complex_matrix_from_json(m).col(0));
  in.n_h = j.at("n_h").get<int>();
  return in;
}

inline json to_json(const RcscmParams& p) {
  json lambda = json::array();
  for (Eigen::Index i = 0; i < p.lambda.size(); ++i) lambda.push_back(p.lambda(i));
  return {{"r_h", detail::real_matrix_to_json(p.r_h)},
          {"r_u", detail::real_matrix_to_json(p.r_u)},
          {"lambda", std::move(lambda)}};
}

inline RcscmParams params_from_json(const json& j) {
  RcscmParams p;
  p.r_h = detail::real_matrix_from_json(j.at("r_h"));
  p.r_u = detail::real_matrix_from_json(j.at("r_u"));
  const auto& lam = j.at("lambda");
  p.lambda.resize(static_cast<Eigen::Index>(lam.size()));
  for (Eigen::Index i = 0; i < p.lambda.size(); ++i)
    p.lambda(i) = lam[i].get<double>();
  return p;
}

// Writes the full ILRMA checkpoint so the RCSCM stage can be rerun across
// backends from bit-identical inputs.
inline void save_checkpoint(const std::string& path, const DemixingSet& demix,
                            const NmfModel& nmf, const RcscmInputs& inputs,
                            const RcscmParams& params) {
  json j = {{"schema_version", kSchemaVersion},
            {"demixing", to_json(demix)},
            {"nmf", to_json(nmf)},
            {"inputs", to_json(inputs)},
            {"params", to_json(params)}};
  std::ofstream f(path);
  if (!f) throw InvalidInputError("save_checkpoint: cannot open " + path);
  f << j.dump();
}

struct Checkpoint {
  DemixingSet demix;
  NmfModel nmf;
  RcscmInputs inputs;
  RcscmParams params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("load_checkpoint: cannot open " + path);
  json j;
  f >> j;
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw InvalidInputError("load_checkpoint: unsupported schema version");
  return {demixing_from_json(j.at("demixing")), nmf_from_json(j.at("nmf")),
          inputs_from_json(j.at("inputs")), params_from_json(j.at("params"))};
}

// Line-delimited JSON iteration trace shared by all backends.
inline void write_trace(const std::string& path, const std::string& backend,
                        const std::vector<double>& iter_seconds,
                        const std::vector<double>& objective) {
  std::ofstream f(path);
  if (!f) throw InvalidInputError("write_trace: cannot open " + path);
  for (size_t k = 0; k < iter_seconds.size(); ++k) {
    json line = {{"backend", backend},
                 {"iter", k + 1},
                 {"seconds", iter_seconds[k]}};
    if (k + 1 < objective.size()) line["objective"] = objective[k + 1];
    f << line.dump() << "\n";
  }
}

inline json to_json(const BenchRecord& rec) {
  return {{"backend", rec.backend}, {"M", rec.mics},
          {"I", rec.bins},          {"J", rec.frames},
          {"iter_seconds", rec.iter_seconds}, {"total_seconds", rec.total_seconds},
          {"objective", rec.objective},       {"warmup", rec.warmup}};
}

}  // namespace rcscm
