#include <doctest.h>

#include <filesystem>
#include <string>

#include "sgdnoise/config.hpp"

using namespace sgdnoise;
using nlohmann::json;

namespace {

json minimal_stationary() {
  return json::parse(R"({
    "scenario": "stationary_check",
    "ensemble": {"d": 2, "kind": "additive_gaussian", "omega": {"diag": [1.0, 0.5]}, "c_norm": 1.0},
    "kernels": [{"type": "identity"}, {"type": "two_point", "params": {"delta": 5}}],
    "seeds": [1],
    "params": {"alpha": 0.1, "samples": 100}
  })");
}

std::string error_of(const json& doc) {
  try {
    parse_scenario_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config parses") {
  const auto cfg = parse_scenario_config(minimal_stationary());
  CHECK(cfg.scenario == ScenarioKind::stationary_check);
  CHECK(cfg.ensemble.d == 2);
  CHECK(cfg.kernels.size() == 2);
  CHECK(param_double(cfg, "alpha", 0.0) == 0.1);
  CHECK(param_uint(cfg, "samples", 0) == 100);
  CHECK(param_uint(cfg, "chains", 8) == 8);
}

TEST_CASE("unknown keys are reported with their path") {
  auto doc = minimal_stationary();
  doc["ensmble"] = 1;
  CHECK(error_of(doc).find("ensmble") != std::string::npos);

  doc = minimal_stationary();
  doc["ensemble"]["omega"]["diagonal"] = json::array({1.0});
  CHECK(error_of(doc).find("$.ensemble.omega") != std::string::npos);

  doc = minimal_stationary();
  doc["params"]["alpah"] = 0.1;
  CHECK(error_of(doc).find("alpah") != std::string::npos);

  doc = minimal_stationary();
  doc["kernels"][1]["params"]["k"] = 3;
  CHECK(error_of(doc).find("kernels[1]") != std::string::npos);
}

TEST_CASE("invalid values are rejected") {
  auto doc = minimal_stationary();
  doc["scenario"] = "nope";
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["ensemble"]["omega"]["diag"] = json::array({1.0, -0.5});
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["ensemble"]["omega"]["diag"] = json::array({1.0});
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["ensemble"]["kind"] = "gaussian_factor";
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["kernels"] = json::array();
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["kernels"][0] = json{{"type", "ema"}, {"params", {{"delta", 0.1}, {"K", 5}}}};
  CHECK_FALSE(error_of(doc).empty());

  doc = minimal_stationary();
  doc["seeds"] = "one";
  CHECK_FALSE(error_of(doc).empty());
}

TEST_CASE("matrix and schedule forms") {
  const auto dense = parse_ensemble_spec(json::parse(R"({"d": 2, "omega": {"dense": [2.0, 0.5, 0.5, 1.0]}})"));
  CHECK(dense.omega(0, 1) == 0.5);
  const auto ident = parse_ensemble_spec(json::parse(R"({"d": 3, "omega": {"identity": 2.0}})"));
  CHECK(ident.omega.isApprox(2.0 * MatrixXd::Identity(3, 3)));
  const auto spd = parse_ensemble_spec(json::parse(R"({"d": 4, "omega": {"random_spd": {"min": 0.1, "max": 1.0, "seed": 3}}})"));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(spd.omega);
  CHECK(es.eigenvalues()(0) == doctest::Approx(0.1));
  CHECK(es.eigenvalues()(3) == doctest::Approx(1.0));
  CHECK(parse_ensemble_spec(to_json(spd)).omega.isApprox(spd.omega));
  CHECK_THROWS_AS(parse_ensemble_spec(json::parse(R"({"d": 2, "omega": {"dense": [1.0, 0.5, 0.0, 1.0]}})")),
                  ConfigError);

  CHECK(parse_schedule(json::parse(R"({"type": "constant", "lr": 0.3})"))(100) == 0.3);
  const auto tab = parse_schedule(json::parse(R"({"type": "table", "points": [[0, 0.1], [10, 0.05]]})"));
  CHECK(tab(10) == doctest::Approx(0.05));
  CHECK_THROWS_AS(parse_schedule(json::parse(R"({"type": "constant"})")), ConfigError);

  const auto k = parse_kernel_spec(json::parse(R"({"type": "multi_point", "params": {"n": 3, "delta": 4}})"));
  CHECK(make_kernel(parse_kernel_spec(to_json(k))).weights == make_kernel(k).weights);
  const auto avg = parse_averaging_spec(json::parse(R"({"method": "swa", "t1": 10, "t2": 20})"));
  CHECK(avg.k() == 10);
  CHECK_THROWS_AS(parse_averaging_spec(json::parse(R"({"method": "swa", "t1": 20, "t2": 10})")), ConfigError);
}

TEST_CASE("theta0 forms") {
  Theta0Spec s;
  CHECK(make_theta0(s, 3, 1).isZero());
  s.kind = Theta0Spec::Kind::fill;
  s.scale = 2.0;
  CHECK(make_theta0(s, 3, 1) == VectorXd::Constant(3, 2.0));
  s.kind = Theta0Spec::Kind::gaussian;
  CHECK(make_theta0(s, 3, 1) == make_theta0(s, 3, 1));
  CHECK(make_theta0(s, 3, 1) != make_theta0(s, 3, 2));
  s.kind = Theta0Spec::Kind::values;
  s.values = {1.0, 2.0};
  CHECK_THROWS(make_theta0(s, 3, 1));
}

TEST_CASE("shipped configs validate") {
  const std::filesystem::path dir = SGDNOISE_CONFIG_DIR;
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_scenario_config(entry.path()));
    ++count;
  }
  CHECK(count == scenario_names().size());
  CHECK_THROWS_AS(load_scenario_config(dir / "missing.json"), ConfigError);
}
