#pragma once

// Workbench configuration file: one JSON object with a section per module.
// Every section and every key is optional (defaults apply), but unknown keys
// are rejected at every level so typos fail loudly instead of silently
// training with defaults.

#include <set>
#include <string>

#include "json.hpp"

#include "hicl/mesh_xml.hpp"
#include "hicl/serialize.hpp"
#include "hicl/trainer.hpp"

namespace hicl {

inline GainScheme gain_scheme_from_string(const std::string& s) {
  if (s == "linear") return GainScheme::linear;
  if (s == "exponential") return GainScheme::exponential;
  throw ConfigError("unknown gain scheme '" + s + "' (expected 'linear' or 'exponential')");
}

inline std::string to_string(GainScheme g) {
  return g == GainScheme::linear ? "linear" : "exponential";
}

struct EvalConfig {
  uint32_t k = 10;
  GainScheme gain = GainScheme::linear;
};

struct WorkbenchConfig {
  MeshFormat mesh_format = MeshFormat::tsv;
  TrainConfig train;
  EvalConfig eval;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& section, const std::string& name,
                                const std::set<std::string>& known) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items())
    if (known.count(key) == 0)
      throw ConfigError("unknown key '" + key + "' in config section '" + name + "'");
}

template <typename T>
void read_key(const nlohmann::json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline WorkbenchConfig workbench_config_from_json(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  detail::reject_unknown_keys(root, "(root)",
                              {"mesh", "labels", "mining", "encoder", "loss", "train", "eval"});
  WorkbenchConfig cfg;

  if (root.contains("mesh")) {
    const auto& s = root["mesh"];
    detail::reject_unknown_keys(s, "mesh", {"format"});
    std::string format = to_string(cfg.mesh_format);
    detail::read_key(s, "format", format);
    cfg.mesh_format = mesh_format_from_string(format);
  }

  if (root.contains("labels")) {
    const auto& s = root["labels"];
    detail::reject_unknown_keys(s, "labels", {"ancestor_expansion", "depth_weighting"});
    detail::read_key(s, "ancestor_expansion", cfg.train.flags.ancestor_expansion);
    detail::read_key(s, "depth_weighting", cfg.train.flags.depth_weighting);
  }

  if (root.contains("mining")) {
    const auto& s = root["mining"];
    detail::reject_unknown_keys(s, "mining", {"beta", "batch_size", "negatives_per_anchor"});
    detail::read_key(s, "beta", cfg.train.mining.beta);
    detail::read_key(s, "batch_size", cfg.train.mining.batch_size);
    detail::read_key(s, "negatives_per_anchor", cfg.train.mining.negatives_per_anchor);
  }

  if (root.contains("encoder")) cfg.train.encoder = encoder_config_from_json(root["encoder"]);

  if (root.contains("loss")) {
    const auto& s = root["loss"];
    detail::reject_unknown_keys(s, "loss", {"lambda", "use_mse", "use_con", "positive_reduction"});
    detail::read_key(s, "lambda", cfg.train.loss.lambda);
    detail::read_key(s, "use_mse", cfg.train.loss.use_mse);
    detail::read_key(s, "use_con", cfg.train.loss.use_con);
    std::string reduction = to_string(cfg.train.loss.positive_reduction);
    detail::read_key(s, "positive_reduction", reduction);
    cfg.train.loss.positive_reduction = positive_reduction_from_string(reduction);
  }

  if (root.contains("train")) {
    const auto& s = root["train"];
    detail::reject_unknown_keys(s, "train",
                                {"epochs", "validation_fraction", "seed", "learning_rate", "beta1",
                                 "beta2", "epsilon", "weight_decay"});
    detail::read_key(s, "epochs", cfg.train.epochs);
    detail::read_key(s, "validation_fraction", cfg.train.validation_fraction);
    detail::read_key(s, "seed", cfg.train.seed);
    detail::read_key(s, "learning_rate", cfg.train.optimizer.learning_rate);
    detail::read_key(s, "beta1", cfg.train.optimizer.beta1);
    detail::read_key(s, "beta2", cfg.train.optimizer.beta2);
    detail::read_key(s, "epsilon", cfg.train.optimizer.epsilon);
    detail::read_key(s, "weight_decay", cfg.train.optimizer.weight_decay);
  }

  if (root.contains("eval")) {
    const auto& s = root["eval"];
    detail::reject_unknown_keys(s, "eval", {"k", "gain"});
    detail::read_key(s, "k", cfg.eval.k);
    std::string gain = to_string(cfg.eval.gain);
    detail::read_key(s, "gain", gain);
    cfg.eval.gain = gain_scheme_from_string(gain);
  }

  cfg.train.validate();
  if (cfg.eval.k == 0) throw ConfigError("eval k must be positive");
  return cfg;
}

inline nlohmann::json workbench_config_to_json(const WorkbenchConfig& cfg) {
  nlohmann::json root;
  root["mesh"] = {{"format", to_string(cfg.mesh_format)}};
  root["labels"] = {{"ancestor_expansion", cfg.train.flags.ancestor_expansion},
                    {"depth_weighting", cfg.train.flags.depth_weighting}};
  root["mining"] = {{"beta", cfg.train.mining.beta},
                    {"batch_size", cfg.train.mining.batch_size},
                    {"negatives_per_anchor", cfg.train.mining.negatives_per_anchor}};
  root["encoder"] = encoder_config_to_json(cfg.train.encoder);
  root["loss"] = {{"lambda", cfg.train.loss.lambda},
                  {"use_mse", cfg.train.loss.use_mse},
                  {"use_con", cfg.train.loss.use_con},
                  {"positive_reduction", to_string(cfg.train.loss.positive_reduction)}};
  root["train"] = {{"epochs", cfg.train.epochs},
                   {"validation_fraction", cfg.train.validation_fraction},
                   {"seed", cfg.train.seed},
                   {"learning_rate", cfg.train.optimizer.learning_rate},
                   {"beta1", cfg.train.optimizer.beta1},
                   {"beta2", cfg.train.optimizer.beta2},
                   {"epsilon", cfg.train.optimizer.epsilon},
                   {"weight_decay", cfg.train.optimizer.weight_decay}};
  root["eval"] = {{"k", cfg.eval.k}, {"gain", to_string(cfg.eval.gain)}};
  return root;
}

inline WorkbenchConfig load_workbench_config(std::istream& in) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  return workbench_config_from_json(root);
}

}  // namespace hicl
