#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybrec/data.hpp"
#include "hybrec/errors.hpp"
#include "hybrec/model.hpp"
#include "hybrec/trainer.hpp"

namespace hybrec {

// Malformed configuration text or an unknown key/preset. CLI exit code 1.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct ExperimentFlags {
  bool quantize = false;
  bool distill = false;
  bool lora = false;
  bool cache = false;
  bool operator==(const ExperimentFlags&) const = default;
};

struct EvalConfig {
  std::size_t k = 10;
  std::size_t n_latency_requests = 1000;
  std::size_t warmup = 50;
  std::size_t candidates_per_user = 100;  // held-out positive + sampled negatives; 0 = whole catalog
};

struct ExperimentConfig {
  std::string preset = "hybrid";  // key such as "hybrid_lora"
  Variant variant = Variant::hybrid;
  ExperimentFlags flags;
  ModelDims dims;
  std::size_t lora_rank = 4;
  double lora_alpha = 8.0;
  TrainConfig training;
  bool tune_text = false;
  EvalConfig eval;
  SyntheticConfig synth;
  std::uint64_t seed = 0;

  // Display name used in reports, e.g. "Hybrid + LoRA".
  std::string label() const;
};

struct Preset {
  std::string_view key;
  std::string_view label;
  Variant variant;
  ExperimentFlags flags;
};

// Every configuration row of the training-time, latency and accuracy tables.
std::span<const Preset> presets();
const Preset& find_preset(std::string_view key);

// Returns `base` with the preset's variant and flags applied.
ExperimentConfig apply_preset(ExperimentConfig base, std::string_view key);

// Grammar: one `key = value` per line; '#' starts a comment; blank lines are
// ignored; keys are dotted paths such as `dims.d_g` or `training.lr`;
// booleans are true/false/1/0. Later lines override earlier ones. Throws
// ConfigError naming the line for unknown keys and unparseable values.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Sets a single dotted key; exposed so the CLI can apply overrides.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

// Canonical text form that parse_config reads back to an equal config.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace hybrec
