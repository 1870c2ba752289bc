#pragma once

// Config-driven experiment scenarios. A scenario is a JSON document fixing a
// chart, a metric, an optional wind field, sampling boxes, and a list of
// experiments with per-experiment parameters and tolerances.

#include "finsler/common.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

using Json = nlohmann::json;

using Box = std::vector<std::pair<double, double>>;

enum class MetricSpecKind { semi_riemannian, randers, kropina, zermelo, expression };

struct MetricSpec {
  MetricSpecKind kind = MetricSpecKind::expression;
  std::vector<std::vector<std::string>> g;  // semi_riemannian / zermelo
  std::vector<std::vector<std::string>> h;  // randers / kropina
  std::vector<std::string> beta;            // randers / kropina
  int epsilon = 1;                          // randers sign / zermelo branch
  std::string f_squared;                    // expression
  std::string domain;                       // expression, optional
};

struct WindSpec {
  std::vector<std::string> components;
  std::optional<double> sigma;
};

struct ExperimentSpec {
  std::string type;
  Json params;
};

struct Scenario {
  std::string name;
  int dimension = 2;
  std::uint64_t seed = 1;
  Box chart_box;
  std::string chart_predicate;  // optional expression, chart = {expr > 0}
  MetricSpec metric;
  std::optional<WindSpec> wind;
  Box x_box;
  Box v_box;
  double sampling_margin = 0.0;
  std::vector<ExperimentSpec> experiments;
};

namespace detail {

inline Box parse_box(const Json& j, int n, const std::string& where,
                     std::vector<std::string>& errors) {
  Box box;
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    errors.push_back(where + ": expected an array of " + std::to_string(n) + " [lo, hi] pairs");
    return box;
  }
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      errors.push_back(where + ": each entry must be a numeric [lo, hi] pair");
      return box;
    }
    double lo = e[0].get<double>(), hi = e[1].get<double>();
    if (!(lo < hi)) errors.push_back(where + ": bounds must satisfy lo < hi");
    box.emplace_back(lo, hi);
  }
  return box;
}

inline void check_expression(const std::string& text, int n, const std::string& where,
                             std::vector<std::string>& errors) {
  try {
    parse(text, n);
  } catch (const ParseError& e) {
    errors.push_back(where + ": " + e.what() + " in \"" + text + "\"");
  }
}

inline std::vector<std::vector<std::string>> parse_matrix(const Json& j, int n,
                                                          const std::string& where,
                                                          std::vector<std::string>& errors) {
  std::vector<std::vector<std::string>> out;
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    errors.push_back(where + ": expected an " + std::to_string(n) + "x" + std::to_string(n) +
                     " matrix of expressions");
    return out;
  }
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      errors.push_back(where + ": expected square rows");
      return out;
    }
    std::vector<std::string> r;
    for (const auto& e : row) {
      if (!e.is_string()) {
        errors.push_back(where + ": entries must be expression strings");
        return out;
      }
      r.push_back(e.get<std::string>());
      check_expression(r.back(), n, where, errors);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> parse_components(const Json& j, int n, const std::string& where,
                                                 std::vector<std::string>& errors) {
  std::vector<std::string> out;
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    errors.push_back(where + ": expected " + std::to_string(n) + " expression strings");
    return out;
  }
  for (const auto& e : j) {
    if (!e.is_string()) {
      errors.push_back(where + ": entries must be expression strings");
      return out;
    }
    out.push_back(e.get<std::string>());
    check_expression(out.back(), n, where, errors);
  }
  return out;
}

}  // namespace detail

// Parses and validates a scenario; collected diagnostics describe every
// problem found (empty means valid).
inline Scenario parse_scenario(const Json& j, std::vector<std::string>& errors) {
  Scenario s;
  if (!j.is_object()) {
    errors.push_back("top level: expected a JSON object");
    return s;
  }
  s.name = j.value("name", std::string("scenario"));
  if (!j.contains("dimension") || !j["dimension"].is_number_integer()) {
    errors.push_back("dimension: required integer in 2..4");
    return s;
  }
  s.dimension = j["dimension"].get<int>();
  if (s.dimension < 2 || s.dimension > 4) {
    errors.push_back("dimension: must be between 2 and 4");
    return s;
  }
  int n = s.dimension;
  s.seed = j.value("seed", static_cast<std::uint64_t>(1));

  if (!j.contains("chart") || !j["chart"].is_object() || !j["chart"].contains("box")) {
    errors.push_back("chart.box: required");
  } else {
    s.chart_box = detail::parse_box(j["chart"]["box"], n, "chart.box", errors);
    if (j["chart"].contains("predicate")) {
      s.chart_predicate = j["chart"]["predicate"].get<std::string>();
      detail::check_expression(s.chart_predicate, n, "chart.predicate", errors);
    }
  }

  if (!j.contains("metric") || !j["metric"].is_object()) {
    errors.push_back("metric: required object");
    return s;
  }
  const Json& jm = j["metric"];
  std::string kind = jm.value("kind", std::string(""));
  if (kind == "semi_riemannian") {
    s.metric.kind = MetricSpecKind::semi_riemannian;
    s.metric.g = detail::parse_matrix(jm.value("g", Json::array()), n, "metric.g", errors);
  } else if (kind == "randers" || kind == "kropina") {
    s.metric.kind = kind == "randers" ? MetricSpecKind::randers : MetricSpecKind::kropina;
    s.metric.h = detail::parse_matrix(jm.value("h", Json::array()), n, "metric.h", errors);
    s.metric.beta =
        detail::parse_components(jm.value("beta", Json::array()), n, "metric.beta", errors);
    s.metric.epsilon = jm.value("epsilon", 1);
    if (s.metric.epsilon != 1 && s.metric.epsilon != -1)
      errors.push_back("metric.epsilon: must be 1 or -1");
  } else if (kind == "zermelo") {
    s.metric.kind = MetricSpecKind::zermelo;
    s.metric.g = detail::parse_matrix(jm.value("g", Json::array()), n, "metric.g", errors);
    s.metric.epsilon = jm.value("epsilon", 1);
    if (s.metric.epsilon != 1 && s.metric.epsilon != -1)
      errors.push_back("metric.epsilon: must be 1 or -1");
    if (!j.contains("wind")) errors.push_back("wind: required for a zermelo metric");
  } else if (kind == "expression") {
    s.metric.kind = MetricSpecKind::expression;
    if (!jm.contains("f_squared") || !jm["f_squared"].is_string()) {
      errors.push_back("metric.f_squared: required expression string");
    } else {
      s.metric.f_squared = jm["f_squared"].get<std::string>();
      detail::check_expression(s.metric.f_squared, n, "metric.f_squared", errors);
    }
    if (jm.contains("domain")) {
      s.metric.domain = jm["domain"].get<std::string>();
      detail::check_expression(s.metric.domain, n, "metric.domain", errors);
    }
  } else {
    errors.push_back("metric.kind: must be one of semi_riemannian, randers, kropina, zermelo, "
                     "expression");
  }

  if (j.contains("wind")) {
    if (!j["wind"].is_object() || !j["wind"].contains("components")) {
      errors.push_back("wind.components: required");
    } else {
      WindSpec w;
      w.components = detail::parse_components(j["wind"]["components"], n, "wind.components",
                                              errors);
      if (j["wind"].contains("sigma")) w.sigma = j["wind"]["sigma"].get<double>();
      s.wind = std::move(w);
    }
  }

  if (!j.contains("sampling") || !j["sampling"].is_object()) {
    errors.push_back("sampling: required object with x_box and v_box");
  } else {
    s.x_box = detail::parse_box(j["sampling"].value("x_box", Json::array()), n, "sampling.x_box",
                                errors);
    s.v_box = detail::parse_box(j["sampling"].value("v_box", Json::array()), n, "sampling.v_box",
                                errors);
    s.sampling_margin = j["sampling"].value("margin", 0.0);
  }

  if (!j.contains("experiments") || !j["experiments"].is_array() || j["experiments"].empty()) {
    errors.push_back("experiments: required non-empty array");
  } else {
    static const std::vector<std::string> known = {
        "matsumoto",        "zermelo_translation", "navigation_roundtrip",
        "legendre_duality", "geodesic_correspondence", "curvature_shift",
        "fanning_agreement", "conservation",       "derivative_oracle",
        "homothety"};
    for (size_t i = 0; i < j["experiments"].size(); ++i) {
      const Json& je = j["experiments"][i];
      std::string where = "experiments[" + std::to_string(i) + "]";
      if (!je.is_object() || !je.contains("type") || !je["type"].is_string()) {
        errors.push_back(where + ": requires a type string");
        continue;
      }
      ExperimentSpec e;
      e.type = je["type"].get<std::string>();
      if (std::find(known.begin(), known.end(), e.type) == known.end()) {
        errors.push_back(where + ": unknown experiment type \"" + e.type + "\"");
        continue;
      }
      for (auto it = je.begin(); it != je.end(); ++it) {
        if (it.key() == "type") continue;
        if (it.key().find("tolerance") != std::string::npos && it.value().is_number() &&
            !(it.value().get<double>() > 0.0))
          errors.push_back(where + "." + it.key() + ": tolerances must be positive");
      }
      e.params = je;
      s.experiments.push_back(std::move(e));
    }
  }
  return s;
}

inline Scenario load_scenario_file(const std::string& path, std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back("cannot open config file: " + path);
    return {};
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    errors.push_back(std::string("JSON parse error: ") + e.what());
    return {};
  }
  return parse_scenario(j, errors);
}

// ---------------------------------------------------------------------------
// Realization of the configured objects.

struct ScenarioObjects {
  MetricInstance metric;                       // the scenario's main instance
  std::optional<SemiRiemannianMetric> navigation_g;  // zermelo base metric
  std::optional<WindField> wind;
  ChartPredicate chart;
  Box x_box, v_box;
  double margin = 0.0;
};

inline ScenarioObjects realize(const Scenario& s) {
  ScenarioObjects out;
  int n = s.dimension;

  Box chart_box = s.chart_box;
  if (!s.chart_predicate.empty()) {
    ExprAst pred = parse(s.chart_predicate, n);
    out.chart = [chart_box, pred, n](const Vec& x) {
      for (int i = 0; i < n; ++i)
        if (x[i] <= chart_box[static_cast<size_t>(i)].first ||
            x[i] >= chart_box[static_cast<size_t>(i)].second)
          return false;
      EvalScope<double> sc{n, to_std(x), std::vector<double>(static_cast<size_t>(n), 0.0)};
      return evaluate(pred, sc) > 0.0;
    };
  } else {
    out.chart = [chart_box, n](const Vec& x) {
      for (int i = 0; i < n; ++i)
        if (x[i] <= chart_box[static_cast<size_t>(i)].first ||
            x[i] >= chart_box[static_cast<size_t>(i)].second)
          return false;
      return true;
    };
  }

  if (s.wind) out.wind = make_wind(n, s.wind->components, s.wind->sigma);

  switch (s.metric.kind) {
    case MetricSpecKind::semi_riemannian:
      out.metric = semi_riemannian_instance(make_semi_riemannian(n, s.metric.g));
      break;
    case MetricSpecKind::randers:
      out.metric =
          randers(make_semi_riemannian(n, s.metric.h), make_one_form(n, s.metric.beta),
                  s.metric.epsilon);
      break;
    case MetricSpecKind::kropina:
      out.metric = kropina(make_semi_riemannian(n, s.metric.h), make_one_form(n, s.metric.beta));
      break;
    case MetricSpecKind::zermelo: {
      SemiRiemannianMetric g = make_semi_riemannian(n, s.metric.g);
      out.navigation_g = g;
      out.metric = zermelo_translate(g, *out.wind, s.metric.epsilon);
      break;
    }
    case MetricSpecKind::expression:
      out.metric = expression_metric(
          parse(s.metric.f_squared, n),
          s.metric.domain.empty() ? ExprAst{} : parse(s.metric.domain, n));
      break;
  }
  out.x_box = s.x_box;
  out.v_box = s.v_box;
  out.margin = s.sampling_margin;
  return out;
}

}  // namespace finsler
