// JSON configuration for training runs and experiments.
//
// Training config:
//   {
//     "arch": [1, 1, 1],
//     "N": 2, "T": 100, "M": 16,
//     "schedule": {"kind": "constant", "gamma": 0.1}
//               | {"kind": "harmonic", "gamma0": 0.5}
//               | {"kind": "custom", "values": [...]},
//     "init": {"kind": "uniform", "c": 2}
//           | {"kind": "product", "marginals": [{"kind": "uniform", "lo": -1, "hi": 1},
//                                               {"kind": "normal", "mean": 0, "sd": 1}, ...]},
//     "readout": {"kind": "clip", "lo": 0, "hi": 1} | {"kind": "identity"},
//     "cube_c": 2,
//     "seed": 42
//   }
// Every key is optional and falls back to the TrainConfig defaults.
#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "deadrelu/network.hpp"
#include "deadrelu/sgd.hpp"

namespace deadrelu {

inline ReadOut readout_from_json(const nlohmann::json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "clip") {
    if (j.is_string()) return ReadOut::clip();
    return ReadOut::clip(j.value("lo", 0.0), j.value("hi", 1.0));
  }
  if (kind == "identity") return ReadOut::identity();
  throw std::invalid_argument("unsupported read-out '" + kind + "' (expected clip or identity)");
}

inline nlohmann::json to_json(const ReadOut& r) {
  if (r.kind == ReadOut::Kind::identity) return {{"kind", "identity"}};
  return {{"kind", "clip"}, {"lo", r.lo}, {"hi", r.hi}};
}

inline StepSchedule schedule_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return StepSchedule::constant(j.at("gamma").get<double>());
  if (kind == "harmonic") return StepSchedule::harmonic(j.at("gamma0").get<double>());
  if (kind == "custom") return StepSchedule::custom(j.at("values").get<std::vector<double>>());
  throw std::invalid_argument("unknown step schedule '" + kind + "'");
}

inline nlohmann::json to_json(const StepSchedule& s) {
  switch (s.kind) {
    case StepSchedule::Kind::constant:
      return {{"kind", "constant"}, {"gamma", s.gamma}};
    case StepSchedule::Kind::harmonic:
      return {{"kind", "harmonic"}, {"gamma0", s.gamma}};
    case StepSchedule::Kind::custom:
      return {{"kind", "custom"}, {"values", s.values}};
  }
  return {};
}

inline Marginal marginal_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return Marginal::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
  if (kind == "normal") return Marginal::normal(j.at("mean").get<double>(), j.at("sd").get<double>());
  throw std::invalid_argument("unknown marginal law '" + kind + "'");
}

inline InitSpec init_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return InitSpec::uniform(j.at("c").get<double>());
  if (kind == "product") {
    InitSpec spec;
    spec.marginals.clear();
    for (const auto& m : j.at("marginals")) spec.marginals.push_back(marginal_from_json(m));
    return spec;
  }
  throw std::invalid_argument("unknown initialization '" + kind + "'");
}

inline nlohmann::json to_json(const InitSpec& s) {
  if (s.marginals.size() == 1 && s.marginals[0].kind == Marginal::Kind::uniform &&
      s.marginals[0].a == -s.marginals[0].b) {
    return {{"kind", "uniform"}, {"c", s.marginals[0].b}};
  }
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : s.marginals) {
    if (m.kind == Marginal::Kind::uniform) {
      ms.push_back({{"kind", "uniform"}, {"lo", m.a}, {"hi", m.b}});
    } else {
      ms.push_back({{"kind", "normal"}, {"mean", m.a}, {"sd", m.b}});
    }
  }
  return {{"kind", "product"}, {"marginals", ms}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("arch")) cfg.arch = architecture_from_json(j.at("arch"));
  cfg.N = j.value("N", cfg.N);
  cfg.T = j.value("T", cfg.T);
  cfg.M = j.value("M", cfg.M);
  if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"));
  if (j.contains("init")) cfg.init = init_from_json(j.at("init"));
  if (j.contains("readout")) cfg.readout = readout_from_json(j.at("readout"));
  cfg.cube_c = j.value("cube_c", cfg.cube_c);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"arch", to_json(cfg.arch)},         {"N", cfg.N},
          {"T", cfg.T},                        {"M", cfg.M},
          {"schedule", to_json(cfg.schedule)}, {"init", to_json(cfg.init)},
          {"readout", to_json(cfg.readout)},   {"cube_c", cfg.cube_c},
          {"seed", cfg.seed}};
}

/// DEADRELU_SEED if set, else `fallback`.
inline std::uint64_t seed_from_env(std::uint64_t fallback) {
  if (const char* s = std::getenv("DEADRELU_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw std::invalid_argument("DEADRELU_SEED is not an unsigned integer");
    }
  }
  return fallback;
}

}  // namespace deadrelu
