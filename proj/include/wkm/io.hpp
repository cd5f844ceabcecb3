#pragma once

// JSON and CSV interchange for models, weight configs, policies, scenario
// configs and results.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/experiments.hpp"
#include "wkm/metric.hpp"
#include "wkm/theory.hpp"
#include "wkm/validation.hpp"

namespace wkm::io {

using nlohmann::json;

namespace detail {

inline double number(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidArgument(std::string("missing field \"") + key + "\"");
  }
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("field \"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

// {"family": "gaussian", "mu": 0, "sigma": 1}
// {"family": "student_t", "nu": 2.5, "loc": 0, "scale": 1}
// {"family": "pareto", "alpha": 2.8, "xm": 1}
inline DistributionModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string())
    throw InvalidArgument("model: expected an object with a \"family\" string");
  const auto family = j.at("family").get<std::string>();
  if (family == "gaussian") return DistributionModel::gaussian(detail::number(j, "mu", 0.0), detail::number(j, "sigma", 1.0));
  if (family == "student_t")
    return DistributionModel::student_t(detail::number(j, "nu"), detail::number(j, "loc", 0.0), detail::number(j, "scale", 1.0));
  if (family == "pareto") return DistributionModel::pareto(detail::number(j, "alpha"), detail::number(j, "xm", 1.0));
  throw InvalidArgument("model: unknown family \"" + family + "\"");
}

inline json to_json(const DistributionModel& m) {
  json j;
  j["family"] = family_name(m.family());
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianParams>) {
          j["mu"] = p.mu;
          j["sigma"] = p.sigma;
        } else if constexpr (std::is_same_v<T, StudentTParams>) {
          j["nu"] = p.nu;
          j["loc"] = p.loc;
          j["scale"] = p.scale;
        } else {
          j["alpha"] = p.alpha;
          j["xm"] = p.xm;
        }
      },
      m.params());
  return j;
}

// {"kind": "absolute" | "centered" | "var_centered", "center": number?, "alpha": number?}
// "center" may also be the string "median" (robust centering; needs a model).
// var_centered without a center derives v_alpha from the model.
inline Exhaustion exhaustion_from_json(const json& j, const DistributionModel* model = nullptr) {
  if (!j.is_object()) throw InvalidArgument("exhaustion: expected an object");
  const auto kind = j.value("kind", std::string("absolute"));
  if (kind == "absolute") return Exhaustion::absolute();
  if (kind == "centered") {
    if (j.contains("center") && j.at("center").is_string()) {
      if (j.at("center").get<std::string>() != "median")
        throw InvalidArgument("exhaustion: string center must be \"median\"");
      if (!model) throw InvalidArgument("exhaustion: median centering needs a model");
      return Exhaustion::robust_centered(*model);
    }
    return Exhaustion::centered(detail::number(j, "center"));
  }
  if (kind == "var_centered") {
    const double alpha = detail::number(j, "alpha");
    if (j.contains("center")) return Exhaustion::var_centered_at(detail::number(j, "center"), alpha);
    if (!model) throw InvalidArgument("exhaustion: var_centered needs a model or a frozen center");
    return Exhaustion::var_centered(*model, alpha);
  }
  throw InvalidArgument("exhaustion: unknown kind \"" + kind + "\"");
}

inline WeightConfig weight_config_from_json(const json& j, const DistributionModel* model = nullptr) {
  return WeightConfig(exhaustion_from_json(j, model), detail::number(j, "q"));
}

inline json to_json(const Exhaustion& e) {
  json j;
  j["kind"] = exhaustion_kind_name(e.kind());
  if (e.kind() != ExhaustionKind::absolute) j["center"] = e.center();
  if (e.var_alpha()) j["alpha"] = *e.var_alpha();
  return j;
}

inline json to_json(const WeightConfig& cfg) {
  json j = to_json(cfg.exhaustion);
  j["q"] = cfg.q;
  return j;
}

// {value, argmax_t, error_bound, q, exhaustion, n}
inline json distance_record(const WeightedDistanceResult& r, const WeightConfig& cfg, std::size_t n) {
  json j;
  j["value"] = r.value;
  j["argmax_t"] = r.argmax_t;
  j["error_bound"] = r.refinement_error_bound;
  j["q"] = cfg.q;
  j["exhaustion"] = to_json(cfg.exhaustion);
  j["n"] = n;
  return j;
}

inline json to_json(const RatePlan& p) {
  auto checks = [&](double beta) {
    return json{{"core", {{"condition", "beta*(1-delta) <= 1/2"}, {"value", beta * (1.0 - p.delta)},
                          {"ok", beta * (1.0 - p.delta) <= 0.5 + 1e-12}}},
                {"tail", {{"condition", "beta*eta >= 1/2"}, {"value", beta * p.eta}, {"ok", beta * p.eta >= 0.5 - 1e-12}}},
                {"weight", {{"condition", "beta*q >= 1/2"}, {"value", beta * p.q}, {"ok", beta * p.q >= 0.5 - 1e-12}}}};
  };
  json j;
  j["eta"] = p.eta;
  j["delta"] = p.delta;
  j["q"] = p.q;
  j["balanced_beta"] = p.balanced_beta;
  j["beta"] = p.beta;
  j["feasible"] = p.feasible;
  j["achieved_exponent"] = p.achieved_exponent;
  j["balanced_checks"] = checks(p.balanced_beta);
  j["checks"] = checks(p.beta);
  return j;
}

inline json to_json(const ValidationVerdict& v) {
  json j;
  j["accept"] = v.accept;
  j["core_pass"] = v.core_pass;
  j["tail_pass"] = v.tail_pass;
  json core;
  core["d_rob"] = v.core.d_rob;
  core["q_grid"] = v.core.q_grid;
  core["per_q"] = v.core.per_q;
  core["argmax_q"] = v.core.argmax_q;
  if (v.eps_core) {
    core["mode"] = "fixed";
    core["eps_core"] = *v.eps_core;
  } else if (v.bootstrap) {
    core["mode"] = "bootstrap";
    core["alpha"] = v.bootstrap->alpha;
    core["critical_value"] = v.bootstrap->critical_value;
    core["p_value"] = v.bootstrap->p_value;
    core["B"] = v.bootstrap->B;
    core["seed"] = v.bootstrap->seed;
  }
  j["core"] = core;
  j["tail"] = {{"var_threshold", v.var_threshold}, {"exceptions", v.kupiec.exceptions}, {"n", v.kupiec.n},
               {"var_level", v.kupiec.p}, {"kupiec_lr", v.kupiec.lr}, {"kupiec_p_value", v.kupiec.p_value}};
  return j;
}

// {"core": {"mode": "bootstrap", "alpha": 0.05} | {"mode": "fixed", "eps": 0.04},
//  "tail": {"var_level": 0.01, "test_level": 0.05},
//  "q_grid": [...], "B": 500, "exhaustion": {...}, "refinement": 8}
inline ValidationPolicy policy_from_json(const json& j, const DistributionModel& model) {
  if (!j.is_object()) throw InvalidArgument("policy: expected an object");
  ValidationPolicy p;
  if (j.contains("core")) {
    const auto& c = j.at("core");
    const auto mode = c.value("mode", std::string("bootstrap"));
    if (mode == "bootstrap") p.alpha_core = detail::number(c, "alpha", 0.05);
    else if (mode == "fixed") p.eps_core = detail::number(c, "eps");
    else throw InvalidArgument("policy: core mode must be \"bootstrap\" or \"fixed\"");
  } else {
    p.alpha_core = 0.05;
  }
  if (j.contains("tail")) {
    p.var_level = detail::number(j.at("tail"), "var_level", p.var_level);
    p.tail_test_level = detail::number(j.at("tail"), "test_level", p.tail_test_level);
  }
  if (j.contains("q_grid")) p.q_grid = j.at("q_grid").get<std::vector<double>>();
  if (j.contains("B")) p.B = j.at("B").get<std::size_t>();
  if (j.contains("refinement")) p.refinement = j.at("refinement").get<std::size_t>();
  if (j.contains("exhaustion")) p.exhaustion = exhaustion_from_json(j.at("exhaustion"), &model);
  p.validate();
  return p;
}

// {"scenario": "student_t", "model": {...}, "weight": {"kind": ..., "q": 1.2},
//  "n_grid": [...], "M": 160, "repetitions": 1, "floor": true, "refinement": 8,
//  "max_draws": 1e9}
inline ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("scenario config: expected an object");
  ScenarioConfig cfg;
  if (!j.contains("model")) throw InvalidArgument("scenario config: missing \"model\"");
  cfg.model = model_from_json(j.at("model"));
  cfg.scenario = j.value("scenario", std::string(family_name(cfg.model.family())));
  if (j.contains("weight")) cfg.weighted = weight_config_from_json(j.at("weight"), &cfg.model);
  if (j.contains("n_grid")) cfg.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  if (j.contains("M")) cfg.M = j.at("M").get<std::size_t>();
  if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<std::size_t>();
  if (j.contains("floor")) cfg.floor = j.at("floor").get<bool>();
  if (j.contains("refinement")) cfg.refinement = j.at("refinement").get<std::size_t>();
  if (j.contains("max_draws")) cfg.max_draws = detail::number(j, "max_draws");
  return cfg;
}

inline json to_json(const SlopeFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"n_used", f.n_used}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

/// Reads the first column of a CSV file of numbers. A non-numeric first
/// line is treated as a header; blank lines and '#' comments are skipped.
inline std::vector<double> read_csv_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto field = line.substr(0, line.find(','));
    std::size_t used = 0;
    double v = 0.0;
    bool ok = true;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok || used != field.size()) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidArgument(path + ": not a number: \"" + field + "\"");
    }
    first = false;
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument(path + ": no data");
  return out;
}

inline void write_sample_csv(std::ostream& out, std::span<const double> xs) {
  out << "x\n";
  for (double x : xs) out << format_double(x) << '\n';
}

}  // namespace wkm::io
