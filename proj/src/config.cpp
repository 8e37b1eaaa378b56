#include "sgdnoise/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sgdnoise/linalg.hpp"

namespace sgdnoise {

using nlohmann::json;

namespace {

const std::map<ScenarioKind, std::set<std::string>>& scenario_params() {
  static const std::map<ScenarioKind, std::set<std::string>> params = {
      {ScenarioKind::multiscale, {"lr0", "lr1", "ema_decay", "mode_split"}},
      {ScenarioKind::two_point, {"alpha", "delta", "samples", "chains"}},
      {ScenarioKind::stationary_check, {"alpha", "samples", "chains"}},
      {ScenarioKind::equivalence, {"frozen_gradients"}},
      {ScenarioKind::basins, {"lr", "window", "rel_tol"}},
      {ScenarioKind::single_step_profile, {"held_out_batches", "grid_points"}},
      {ScenarioKind::interpolation, {"lr", "t_a", "t_b", "grid"}},
      {ScenarioKind::gradient_alignment, {"thin_every"}},
  };
  return params;
}

void require_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      std::ostringstream os;
      os << "unknown key '" << key << "' (allowed:";
      for (const auto& a : allowed) os << ' ' << a;
      os << ")";
      throw ConfigError(path + "." + key, os.str());
    }
  }
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key, "missing required field");
  return j.at(key);
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return std::uint64_t(j.get<long long>());
  throw ConfigError(path, "expected a nonnegative integer");
}

std::vector<double> as_double_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

MatrixXd parse_matrix(const json& j, const std::string& path, Eigen::Index d) {
  require_keys(j, path, {"diag", "dense", "identity", "random_spd"});
  if (j.size() != 1) throw ConfigError(path, "give exactly one of diag, dense, identity, random_spd");
  if (j.contains("diag")) {
    const auto v = as_double_list(j["diag"], path + ".diag");
    if (Eigen::Index(v.size()) != d) throw ConfigError(path + ".diag", "expected " + std::to_string(d) + " entries");
    return Eigen::Map<const VectorXd>(v.data(), d).asDiagonal();
  }
  if (j.contains("dense")) {
    const auto v = as_double_list(j["dense"], path + ".dense");
    if (Eigen::Index(v.size()) != d * d) {
      throw ConfigError(path + ".dense", "expected " + std::to_string(d * d) + " row-major entries");
    }
    MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) m(r, c) = v[std::size_t(r * d + c)];
    return m;
  }
  if (j.contains("identity")) {
    const double scale = j["identity"].is_boolean() ? 1.0 : as_double(j["identity"], path + ".identity");
    return MatrixXd::Identity(d, d) * scale;
  }
  const json& r = j["random_spd"];
  const std::string rp = path + ".random_spd";
  require_keys(r, rp, {"min", "max", "seed"});
  const double lo = as_double(need(r, "min", rp), rp + ".min");
  const double hi = as_double(need(r, "max", rp), rp + ".max");
  if (!(lo > 0.0 && hi >= lo)) throw ConfigError(rp, "need 0 < min <= max");
  Stream stream = make_stream(as_uint(need(r, "seed", rp), rp + ".seed"), "random_spd", 0);
  VectorXd ev(d);
  for (Eigen::Index i = 0; i < d; ++i) ev[i] = d == 1 ? hi : lo + (hi - lo) * double(i) / double(d - 1);
  return linalg::random_spd(stream, ev);
}

json matrix_to_json(const MatrixXd& m) {
  const MatrixXd off = m - MatrixXd(m.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    return json{{"diag", std::vector<double>(m.diagonal().data(), m.diagonal().data() + m.rows())}};
  }
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return json{{"dense", flat}};
}

template <class Fn>
auto wrap(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::multiscale: return "multiscale";
    case ScenarioKind::two_point: return "two_point";
    case ScenarioKind::stationary_check: return "stationary_check";
    case ScenarioKind::equivalence: return "equivalence";
    case ScenarioKind::basins: return "basins";
    case ScenarioKind::single_step_profile: return "single_step_profile";
    case ScenarioKind::interpolation: return "interpolation";
    case ScenarioKind::gradient_alignment: return "gradient_alignment";
  }
  return "unknown";
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"multiscale",   "two_point",           "stationary_check",
                                                 "equivalence",  "basins",              "single_step_profile",
                                                 "interpolation", "gradient_alignment"};
  return names;
}

std::optional<ScenarioKind> scenario_from_string(const std::string& name) {
  for (const auto& [kind, _] : scenario_params())
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

EnsembleSpec parse_ensemble_spec(const json& j, const std::string& path) {
  require_keys(j, path, {"d", "m", "omega", "c_norm", "kind", "noise_cov", "seed"});
  EnsembleSpec spec;
  spec.d = Eigen::Index(as_uint(need(j, "d", path), path + ".d"));
  if (spec.d <= 0) throw ConfigError(path + ".d", "must be positive");
  if (j.contains("m")) spec.m = Eigen::Index(as_uint(j["m"], path + ".m"));
  spec.omega = j.contains("omega") ? parse_matrix(j["omega"], path + ".omega", spec.d)
                                   : MatrixXd(MatrixXd::Identity(spec.d, spec.d));
  if (j.contains("c_norm")) spec.c_norm = as_double(j["c_norm"], path + ".c_norm");
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw ConfigError(path + ".kind", "expected a string");
    spec.kind = wrap(path + ".kind", [&] { return sampler_kind_from_string(j["kind"].get<std::string>()); });
  }
  if (j.contains("noise_cov")) {
    if (spec.kind != SamplerKind::additive_gaussian) {
      throw ConfigError(path + ".noise_cov", "only meaningful for kind additive_gaussian");
    }
    spec.noise_cov = parse_matrix(j["noise_cov"], path + ".noise_cov", spec.d);
  }
  if (j.contains("seed")) spec.seed = as_uint(j["seed"], path + ".seed");
  wrap(path, [&] { return make_ensemble(spec); });
  return spec;
}

json to_json(const EnsembleSpec& spec) {
  json j;
  j["d"] = spec.d;
  if (spec.m) j["m"] = *spec.m;
  j["omega"] = matrix_to_json(spec.omega);
  j["c_norm"] = spec.c_norm;
  j["kind"] = to_string(spec.kind);
  if (spec.noise_cov) j["noise_cov"] = matrix_to_json(*spec.noise_cov);
  if (spec.seed) j["seed"] = *spec.seed;
  return j;
}

Schedule parse_schedule(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (!j.contains("type") || !j["type"].is_string()) throw ConfigError(path + ".type", "missing schedule type");
  const std::string type = j["type"].get<std::string>();
  return wrap(path, [&]() -> Schedule {
    if (type == "constant") {
      require_keys(j, path, {"type", "lr"});
      return Schedule::constant(as_double(need(j, "lr", path), path + ".lr"));
    }
    if (type == "linear_decay" || type == "cosine") {
      require_keys(j, path, {"type", "lr0", "horizon"});
      const double lr0 = as_double(need(j, "lr0", path), path + ".lr0");
      const auto horizon = as_uint(need(j, "horizon", path), path + ".horizon");
      return type == "cosine" ? Schedule::cosine(lr0, horizon) : Schedule::linear_decay(lr0, horizon);
    }
    if (type == "table") {
      require_keys(j, path, {"type", "points"});
      const json& pts = need(j, "points", path);
      if (!pts.is_array()) throw ConfigError(path + ".points", "expected a list of [step, lr] pairs");
      std::vector<std::pair<std::uint64_t, double>> points;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::string p = path + ".points[" + std::to_string(i) + "]";
        if (!pts[i].is_array() || pts[i].size() != 2) throw ConfigError(p, "expected [step, lr]");
        points.emplace_back(as_uint(pts[i][0], p + "[0]"), as_double(pts[i][1], p + "[1]"));
      }
      return Schedule::table(std::move(points));
    }
    throw ConfigError(path + ".type", "unknown schedule type '" + type + "'");
  });
}

KernelSpec parse_kernel_spec(const json& j, const std::string& path) {
  require_keys(j, path, {"type", "params"});
  if (!j.contains("type") || !j["type"].is_string()) throw ConfigError(path + ".type", "missing kernel type");
  const std::string type = j["type"].get<std::string>();
  const json params = j.value("params", json::object());
  const std::string pp = path + ".params";
  KernelSpec spec;
  if (type == "identity") {
    require_keys(params, pp, {});
    spec.shape = KernelSpec::MultiPoint{1, 0};
  } else if (type == "two_point") {
    require_keys(params, pp, {"delta"});
    spec.shape = KernelSpec::TwoPoint{as_uint(need(params, "delta", pp), pp + ".delta")};
  } else if (type == "swa") {
    require_keys(params, pp, {"k"});
    spec.shape = KernelSpec::Swa{as_uint(need(params, "k", pp), pp + ".k")};
  } else if (type == "ema") {
    require_keys(params, pp, {"delta", "K"});
    spec.shape = KernelSpec::Ema{as_double(need(params, "delta", pp), pp + ".delta"),
                                 as_uint(need(params, "K", pp), pp + ".K")};
  } else if (type == "multi_point") {
    require_keys(params, pp, {"n", "delta"});
    spec.shape = KernelSpec::MultiPoint{as_uint(need(params, "n", pp), pp + ".n"),
                                        as_uint(need(params, "delta", pp), pp + ".delta")};
  } else if (type == "custom") {
    require_keys(params, pp, {"weights", "allow_negative"});
    KernelSpec::Custom c;
    c.weights = as_double_list(need(params, "weights", pp), pp + ".weights");
    if (params.contains("allow_negative")) {
      if (!params["allow_negative"].is_boolean()) throw ConfigError(pp + ".allow_negative", "expected a boolean");
      c.allow_negative = params["allow_negative"].get<bool>();
    }
    spec.shape = std::move(c);
  } else {
    throw ConfigError(path + ".type", "unknown kernel type '" + type + "'");
  }
  wrap(path, [&] { return make_kernel(spec); });
  return spec;
}

json to_json(const KernelSpec& spec) {
  json j;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KernelSpec::TwoPoint>) {
          j = {{"type", "two_point"}, {"params", {{"delta", s.delta}}}};
        } else if constexpr (std::is_same_v<T, KernelSpec::Swa>) {
          j = {{"type", "swa"}, {"params", {{"k", s.k}}}};
        } else if constexpr (std::is_same_v<T, KernelSpec::Ema>) {
          j = {{"type", "ema"}, {"params", {{"delta", s.decay}, {"K", s.truncation}}}};
        } else if constexpr (std::is_same_v<T, KernelSpec::MultiPoint>) {
          j = {{"type", "multi_point"}, {"params", {{"n", s.n}, {"delta", s.delta}}}};
        } else {
          j = {{"type", "custom"}, {"params", {{"weights", s.weights}, {"allow_negative", s.allow_negative}}}};
        }
      },
      spec.shape);
  return j;
}

AveragingSpec parse_averaging_spec(const json& j, const std::string& path) {
  require_keys(j, path, {"method", "t1", "t2", "delta"});
  AveragingSpec spec;
  if (!need(j, "method", path).is_string()) throw ConfigError(path + ".method", "expected a string");
  spec.method = wrap(path + ".method", [&] { return averaging_method_from_string(j["method"].get<std::string>()); });
  spec.t1 = as_uint(need(j, "t1", path), path + ".t1");
  spec.t2 = as_uint(need(j, "t2", path), path + ".t2");
  if (j.contains("delta")) spec.ema_decay = as_double(j["delta"], path + ".delta");
  wrap(path, [&] {
    validate(spec);
    return 0;
  });
  return spec;
}

ScenarioConfig parse_scenario_config(const json& doc) {
  require_keys(doc, "$", {"scenario", "description", "ensemble", "schedules", "kernels", "averaging", "steps",
                          "batch_size", "seeds", "output_dir", "theta0", "params"});
  ScenarioConfig cfg;
  cfg.source = doc;
  const json& sc = need(doc, "scenario", "$");
  if (!sc.is_string()) throw ConfigError("$.scenario", "expected a string");
  auto kind = scenario_from_string(sc.get<std::string>());
  if (!kind) throw ConfigError("$.scenario", "unknown scenario '" + sc.get<std::string>() + "'");
  cfg.scenario = *kind;

  cfg.ensemble = parse_ensemble_spec(need(doc, "ensemble", "$"), "$.ensemble");

  if (doc.contains("schedules")) {
    const json& s = doc["schedules"];
    if (!s.is_array()) throw ConfigError("$.schedules", "expected a list");
    for (std::size_t i = 0; i < s.size(); ++i)
      cfg.schedules.push_back(parse_schedule(s[i], "$.schedules[" + std::to_string(i) + "]"));
  }
  if (doc.contains("kernels")) {
    const json& k = doc["kernels"];
    if (!k.is_array()) throw ConfigError("$.kernels", "expected a list");
    for (std::size_t i = 0; i < k.size(); ++i)
      cfg.kernels.push_back(parse_kernel_spec(k[i], "$.kernels[" + std::to_string(i) + "]"));
  }
  if (doc.contains("averaging")) cfg.averaging = parse_averaging_spec(doc["averaging"], "$.averaging");
  if (doc.contains("steps")) cfg.steps = as_uint(doc["steps"], "$.steps");
  if (doc.contains("batch_size")) {
    cfg.batch_size = as_uint(doc["batch_size"], "$.batch_size");
    if (cfg.batch_size == 0) throw ConfigError("$.batch_size", "must be at least 1");
  }
  const json& seeds = need(doc, "seeds", "$");
  if (!seeds.is_array() || seeds.empty()) throw ConfigError("$.seeds", "expected a nonempty list of seeds");
  for (std::size_t i = 0; i < seeds.size(); ++i) cfg.seeds.push_back(as_uint(seeds[i], "$.seeds[" + std::to_string(i) + "]"));
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("$.output_dir", "expected a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("theta0")) {
    const json& t = doc["theta0"];
    require_keys(t, "$.theta0", {"fill", "values", "gaussian"});
    if (t.size() != 1) throw ConfigError("$.theta0", "give exactly one of fill, values, gaussian");
    if (t.contains("fill")) {
      cfg.theta0.kind = Theta0Spec::Kind::fill;
      cfg.theta0.scale = as_double(t["fill"], "$.theta0.fill");
    } else if (t.contains("gaussian")) {
      cfg.theta0.kind = Theta0Spec::Kind::gaussian;
      cfg.theta0.scale = as_double(t["gaussian"], "$.theta0.gaussian");
    } else {
      cfg.theta0.kind = Theta0Spec::Kind::values;
      cfg.theta0.values = as_double_list(t["values"], "$.theta0.values");
      if (Eigen::Index(cfg.theta0.values.size()) != cfg.ensemble.d) {
        throw ConfigError("$.theta0.values", "expected " + std::to_string(cfg.ensemble.d) + " entries");
      }
    }
  }
  if (doc.contains("params")) {
    require_keys(doc["params"], "$.params", scenario_params().at(cfg.scenario));
    cfg.params = doc["params"];
  }

  // Scenario-level requirements.
  auto need_schedules = [&](std::size_t n) {
    if (cfg.schedules.size() < n) {
      throw ConfigError("$.schedules", to_string(cfg.scenario) + " needs at least " + std::to_string(n) + " schedule(s)");
    }
  };
  switch (cfg.scenario) {
    case ScenarioKind::stationary_check:
      if (cfg.kernels.empty()) throw ConfigError("$.kernels", "stationary_check needs at least one kernel");
      if (cfg.ensemble.kind != SamplerKind::additive_gaussian) {
        throw ConfigError("$.ensemble.kind", "stationary_check needs an additive_gaussian ensemble");
      }
      break;
    case ScenarioKind::two_point:
      if (cfg.ensemble.kind != SamplerKind::additive_gaussian) {
        throw ConfigError("$.ensemble.kind", "two_point needs an additive_gaussian ensemble");
      }
      break;
    case ScenarioKind::equivalence:
      need_schedules(1);
      if (!cfg.averaging) throw ConfigError("$.averaging", "equivalence needs an averaging spec");
      wrap("$.averaging", [&] { return equivalent_schedule(cfg.schedules.front(), *cfg.averaging); });
      break;
    case ScenarioKind::basins:
    case ScenarioKind::gradient_alignment:
    case ScenarioKind::interpolation:
      if (cfg.steps == 0) throw ConfigError("$.steps", to_string(cfg.scenario) + " needs steps >= 1");
      if (cfg.scenario != ScenarioKind::basins) need_schedules(1);
      if (cfg.scenario != ScenarioKind::basins && cfg.ensemble.kind != SamplerKind::gaussian_factor) {
        throw ConfigError("$.ensemble.kind", to_string(cfg.scenario) + " needs a gaussian_factor ensemble");
      }
      break;
    case ScenarioKind::single_step_profile:
      if (cfg.ensemble.kind != SamplerKind::gaussian_factor) {
        throw ConfigError("$.ensemble.kind", "single_step_profile needs a gaussian_factor ensemble");
      }
      break;
    case ScenarioKind::multiscale:
      if (cfg.steps == 0) throw ConfigError("$.steps", "multiscale needs steps >= 1");
      break;
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario_config(doc);
}

double param_double(const ScenarioConfig& cfg, const std::string& key, double fallback) {
  if (!cfg.params.contains(key)) return fallback;
  return as_double(cfg.params[key], "$.params." + key);
}

std::uint64_t param_uint(const ScenarioConfig& cfg, const std::string& key, std::uint64_t fallback) {
  if (!cfg.params.contains(key)) return fallback;
  return as_uint(cfg.params[key], "$.params." + key);
}

bool param_bool(const ScenarioConfig& cfg, const std::string& key, bool fallback) {
  if (!cfg.params.contains(key)) return fallback;
  if (!cfg.params[key].is_boolean()) throw ConfigError("$.params." + key, "expected a boolean");
  return cfg.params[key].get<bool>();
}

VectorXd make_theta0(const Theta0Spec& spec, Eigen::Index d, std::uint64_t seed) {
  switch (spec.kind) {
    case Theta0Spec::Kind::zeros: return VectorXd::Zero(d);
    case Theta0Spec::Kind::fill: return VectorXd::Constant(d, spec.scale);
    case Theta0Spec::Kind::values:
      if (Eigen::Index(spec.values.size()) != d) {
        throw ConfigError("$.theta0.values", "expected " + std::to_string(d) + " entries");
      }
      return Eigen::Map<const VectorXd>(spec.values.data(), d);
    case Theta0Spec::Kind::gaussian: {
      Stream stream = make_stream(seed, "theta0", 0);
      return standard_normal_vector(stream, d) * spec.scale;
    }
  }
  return VectorXd::Zero(d);
}

}  // namespace sgdnoise
