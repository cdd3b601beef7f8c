#include "panellp/lp_spec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "panellp/error.hpp"
#include "yaml_util.hpp"

namespace panellp {

std::string_view to_string(ResponseTransform t) {
  return t == ResponseTransform::Level ? "level" : "cumulative-difference";
}

std::string_view to_string(FixedEffects fe) {
  return fe == FixedEffects::Unit ? "unit" : "unit+time";
}

std::string_view to_string(ClusterMode c) {
  switch (c) {
    case ClusterMode::Unit: return "unit";
    case ClusterMode::UnitTime: return "unit+time";
    case ClusterMode::Robust: return "robust";
  }
  return "unit";
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::FE: return "FE";
    case Estimator::SPJ: return "SPJ";
    case Estimator::DB: return "DB";
  }
  return "FE";
}

ResponseTransform parse_response_transform(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "level") return ResponseTransform::Level;
  if (v == "cumulative-difference" || v == "cumulative_difference" || v == "difference") {
    return ResponseTransform::CumulativeDifference;
  }
  throw ValidationError("unknown response_transform '" + std::string(s) +
                        "' (expected level or cumulative-difference)");
}

FixedEffects parse_fixed_effects(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "unit") return FixedEffects::Unit;
  if (v == "unit+time" || v == "two-way") return FixedEffects::UnitTime;
  throw ValidationError("unknown fixed_effects '" + std::string(s) + "' (expected unit or unit+time)");
}

ClusterMode parse_cluster_mode(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "unit") return ClusterMode::Unit;
  if (v == "unit+time" || v == "two-way") return ClusterMode::UnitTime;
  if (v == "robust") return ClusterMode::Robust;
  throw ValidationError("unknown cluster '" + std::string(s) +
                        "' (expected unit, unit+time or robust)");
}

Estimator parse_estimator(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "fe") return Estimator::FE;
  if (v == "spj") return Estimator::SPJ;
  if (v == "db") return Estimator::DB;
  throw ValidationError("unknown estimator '" + std::string(s) + "' (expected FE, SPJ or DB)");
}

std::size_t LPSpec::dimension() const {
  std::size_t d = static_cast<std::size_t>(shock_lags) + 1 + response_lags.size();
  for (const auto& c : extra_controls) d += c.lags.size();
  return d;
}

int LPSpec::max_lag() const {
  int m = shock_lags;
  for (int k : response_lags) m = std::max(m, k);
  for (const auto& c : extra_controls) {
    for (int k : c.lags) m = std::max(m, k);
  }
  return m;
}

bool LPSpec::prototype_shape() const {
  return shock_lags == 0 && response_lags.empty() && extra_controls.empty() &&
         response_transform == ResponseTransform::Level;
}

bool LPSpec::wants(Estimator e) const {
  return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
}

void LPSpec::validate() const {
  auto fail = [](const std::string& m) { throw InvalidParameter("invalid spec: " + m); };
  if (response.empty()) fail("response is empty");
  if (shock.empty()) fail("shock is empty");
  if (shock_lags < 0) fail("shock_lags must be >= 0");
  if (!std::isfinite(response_scale) || response_scale == 0.0) {
    fail("response scale must be finite and nonzero");
  }
  if (!std::isfinite(irf_scale)) fail("irf_scale must be finite");
  std::set<int> seen;
  for (int k : response_lags) {
    if (k < 0) fail("response_lags must be >= 0");
    if (!seen.insert(k).second) fail("response lag " + std::to_string(k) + " listed twice");
  }
  for (const auto& c : extra_controls) {
    if (c.variable.empty()) fail("extra control without a variable name");
    if (c.variable == shock) fail("shock '" + shock + "' must not appear among extra_controls");
    if (c.lags.empty()) fail("extra control '" + c.variable + "' has no lags");
    std::set<int> s;
    for (int k : c.lags) {
      if (k < 0) fail("lags of '" + c.variable + "' must be >= 0");
      if (!s.insert(k).second) fail("lag " + std::to_string(k) + " of '" + c.variable + "' listed twice");
    }
  }
  if (horizon_min < 0) fail("horizons must be >= 0");
  if (horizon_max < horizon_min) fail("horizons range is empty");
  if (estimators.empty()) fail("no estimators requested");
  std::set<Estimator> est(estimators.begin(), estimators.end());
  if (est.size() != estimators.size()) fail("estimator listed twice");
  if (wants(Estimator::DB) && !prototype_shape()) {
    fail("DB requires the prototype shape (one shock regressor, no lags or controls, level response)");
  }
}

namespace {

std::vector<int> int_list(const YAML::Node& n, const std::string& key) {
  std::vector<int> out;
  if (n.IsScalar()) {
    out.push_back(detail::as<int>(n, key));
  } else if (n.IsSequence()) {
    for (const auto& e : n) out.push_back(detail::as<int>(e, key));
  } else if (!n.IsNull()) {
    throw ValidationError("key '" + key + "' must be an integer list");
  }
  return out;
}

}  // namespace

LPSpec parse_lp_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("spec is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ValidationError("spec must be a key-value map");
  detail::reject_unknown(root, {"response", "response_transform", "shock", "shock_lags",
                                "response_lags", "extra_controls", "horizons", "fixed_effects",
                                "cluster", "estimators", "irf_scale"},
                         "spec");

  LPSpec s;
  s.response = detail::as<std::string>(detail::require(root, "response"), "response");
  s.shock = detail::as<std::string>(detail::require(root, "shock"), "shock");

  if (const auto t = root["response_transform"]) {
    if (t.IsScalar()) {
      s.response_transform = parse_response_transform(detail::as<std::string>(t, "response_transform"));
    } else if (t.IsMap()) {
      detail::reject_unknown(t, {"kind", "scale"}, "response_transform");
      s.response_transform = parse_response_transform(
          detail::as<std::string>(detail::require(t, "kind", "response_transform.kind"),
                                  "response_transform.kind"));
      if (t["scale"]) s.response_scale = detail::as<double>(t["scale"], "response_transform.scale");
    } else {
      throw ValidationError("key 'response_transform' must be a string or a map");
    }
  }
  if (root["shock_lags"]) s.shock_lags = detail::as<int>(root["shock_lags"], "shock_lags");
  if (root["response_lags"]) s.response_lags = int_list(root["response_lags"], "response_lags");
  if (const auto c = root["extra_controls"]) {
    if (!c.IsSequence()) throw ValidationError("key 'extra_controls' must be a list");
    for (const auto& e : c) {
      if (!e.IsMap()) throw ValidationError("each extra_controls entry must be a map");
      detail::reject_unknown(e, {"variable", "lags"}, "extra_controls entry");
      ControlSpec cs;
      cs.variable = detail::as<std::string>(detail::require(e, "variable", "extra_controls.variable"),
                                            "extra_controls.variable");
      cs.lags = int_list(detail::require(e, "lags", "extra_controls.lags"), "extra_controls.lags");
      s.extra_controls.push_back(std::move(cs));
    }
  }
  const auto range = detail::parse_range(detail::require(root, "horizons"), "horizons");
  s.horizon_min = range.first;
  s.horizon_max = range.second;
  if (root["fixed_effects"]) {
    s.fixed_effects = parse_fixed_effects(detail::as<std::string>(root["fixed_effects"], "fixed_effects"));
  }
  if (root["cluster"]) s.cluster = parse_cluster_mode(detail::as<std::string>(root["cluster"], "cluster"));
  if (const auto e = root["estimators"]) {
    s.estimators.clear();
    if (e.IsScalar()) {
      s.estimators.push_back(parse_estimator(detail::as<std::string>(e, "estimators")));
    } else if (e.IsSequence()) {
      for (const auto& x : e) s.estimators.push_back(parse_estimator(detail::as<std::string>(x, "estimators")));
    } else {
      throw ValidationError("key 'estimators' must be a list");
    }
  }
  if (root["irf_scale"]) s.irf_scale = detail::as<double>(root["irf_scale"], "irf_scale");
  s.validate();
  return s;
}

LPSpec load_lp_spec(const std::string& path) {
  return parse_lp_spec(detail::read_text_file(path, "spec"));
}

nlohmann::json to_json(const LPSpec& s) {
  nlohmann::json controls = nlohmann::json::array();
  for (const auto& c : s.extra_controls) controls.push_back({{"variable", c.variable}, {"lags", c.lags}});
  nlohmann::json est = nlohmann::json::array();
  for (auto e : s.estimators) est.push_back(std::string(to_string(e)));
  return {
      {"response", s.response},
      {"response_transform", {{"kind", std::string(to_string(s.response_transform))}, {"scale", s.response_scale}}},
      {"shock", s.shock},
      {"shock_lags", s.shock_lags},
      {"response_lags", s.response_lags},
      {"extra_controls", controls},
      {"horizons", {{"min", s.horizon_min}, {"max", s.horizon_max}}},
      {"fixed_effects", std::string(to_string(s.fixed_effects))},
      {"cluster", std::string(to_string(s.cluster))},
      {"estimators", est},
      {"irf_scale", s.irf_scale},
  };
}

}  // namespace panellp
