#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rcscm/checkpoint.hpp"
#include "test_util.hpp"

using namespace rcscm;
using test::Rng;

TEST_CASE("checkpoint: save/load round-trip preserves every field exactly") {
  const test::Instance inst = test::random_instance(3, 6, 3, 1);
  Rng rng(2);
  DemixingSet demix;
  NmfModel nmf;
  for (int i = 0; i < 3; ++i) {
    demix.W.push_back(rng.complex_matrix(3, 3));
    demix.A.push_back(demix.W.back().inverse());
  }
  for (int n = 0; n < 3; ++n) {
    nmf.T.push_back(MatR::Random(3, 4).cwiseAbs());
    nmf.V.push_back(MatR::Random(4, 6).cwiseAbs());
  }

  const std::string path = "/tmp/rcscm_test_checkpoint.json";
  save_checkpoint(path, demix, nmf, inst.inputs, inst.params);
  const Checkpoint loaded = load_checkpoint(path);
  std::remove(path.c_str());

  for (int i = 0; i < 3; ++i) {
    CHECK((loaded.demix.W[i] - demix.W[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.demix.A[i] - demix.A[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.inputs.a[i] - inst.inputs.a[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.inputs.R_prime[i] - inst.inputs.R_prime[i])
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded.inputs.R_prime_pinv[i] - inst.inputs.R_prime_pinv[i])
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded.inputs.b[i] - inst.inputs.b[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.nmf.T[i] - nmf.T[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.nmf.V[i] - nmf.V[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(loaded.inputs.n_h == inst.inputs.n_h);
  CHECK((loaded.params.r_h - inst.params.r_h).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.params.r_u - inst.params.r_u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.params.lambda - inst.params.lambda).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint: schema version is validated") {
  const test::Instance inst = test::random_instance(1, 2, 2, 3);
  DemixingSet demix;
  demix.W.push_back(MatC::Identity(2, 2));
  demix.A.push_back(MatC::Identity(2, 2));
  NmfModel nmf;
  nmf.T.push_back(MatR::Ones(1, 2));
  nmf.T.push_back(MatR::Ones(1, 2));
  nmf.V.push_back(MatR::Ones(2, 2));
  nmf.V.push_back(MatR::Ones(2, 2));

  const std::string path = "/tmp/rcscm_test_schema.json";
  save_checkpoint(path, demix, nmf, inst.inputs, inst.params);

  std::ifstream ifs(path);
  nlohmann::json j = nlohmann::json::parse(ifs);
  ifs.close();
  j["schema_version"] = 999;
  std::ofstream ofs(path);
  ofs << j;
  ofs.close();
  CHECK_THROWS_AS(load_checkpoint(path), InvalidInputError);
  std::remove(path.c_str());
}

TEST_CASE("complex serialization: [re, im] pairs with explicit shape") {
  Rng rng(4);
  const MatC m = rng.complex_matrix(2, 3);
  const nlohmann::json j = detail::complex_matrix_to_json(m);
  CHECK(j["rows"] == 2);
  CHECK(j["cols"] == 3);
  CHECK(j["data"].size() == 2);
  CHECK(j["data"][0].size() == 3);
  CHECK(j["data"][0][0].size() == 2);
  const MatC back = detail::complex_matrix_from_json(j);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("write_trace: line-delimited JSON records") {
  const std::string path = "/tmp/rcscm_test_trace.jsonl";
  write_trace(path, "accel2", {0.1, 0.2}, {-5.0, -4.0, -3.0});
  std::ifstream ifs(path);
  std::string line;
  int lines = 0;
  while (std::getline(ifs, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j["backend"] == "accel2");
    ++lines;
    CHECK(j["iter"] == lines);
  }
  CHECK(lines == 2);
  std::remove(path.c_str());
}
