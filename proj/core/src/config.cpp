#include "hybrec/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hybrec {

namespace {

constexpr std::array<Preset, 8> kPresets{{
    {"gnn_only", "GNN Only", Variant::gnn_only, {}},
    {"text_only", "LLM Only", Variant::text_only, {}},
    {"hybrid", "Hybrid (Unoptimized)", Variant::hybrid, {}},
    {"hybrid_quant", "Hybrid + Quantization", Variant::hybrid, {.quantize = true}},
    {"hybrid_distill", "Hybrid + Distillation", Variant::hybrid, {.distill = true}},
    {"hybrid_lora", "Hybrid + LoRA", Variant::hybrid, {.lora = true}},
    {"hybrid_cache", "Hybrid + DeepSpeed", Variant::hybrid, {.cache = true}},
    {"hybrid_cache_quant", "Hybrid + FPGA + DeepSpeed", Variant::hybrid, {.quantize = true, .cache = true}},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_value(std::string_view key, std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("config: bad value '" + std::string(s) + "' for " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: bad boolean '" + std::string(s) + "' for " + std::string(key));
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HYBREC_SIZE_FIELD(KEY, EXPR)                                                                      \
  Field {                                                                                                 \
    KEY, [](ExperimentConfig& c, std::string_view v) { c.EXPR = parse_value<std::size_t>(KEY, v); },      \
        [](const ExperimentConfig& c) { return std::to_string(c.EXPR); }                                 \
  }
#define HYBREC_DOUBLE_FIELD(KEY, EXPR)                                                                 \
  Field {                                                                                              \
    KEY, [](ExperimentConfig& c, std::string_view v) { c.EXPR = parse_value<double>(KEY, v); },        \
        [](const ExperimentConfig& c) { return format_double(c.EXPR); }                               \
  }
#define HYBREC_BOOL_FIELD(KEY, EXPR)                                                                   \
  Field {                                                                                              \
    KEY, [](ExperimentConfig& c, std::string_view v) { c.EXPR = parse_bool(KEY, v); },                 \
        [](const ExperimentConfig& c) { return std::string(c.EXPR ? "true" : "false"); }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"preset", [](ExperimentConfig& c, std::string_view v) { c = apply_preset(c, v); },
            [](const ExperimentConfig& c) { return c.preset; }},
      Field{"variant", [](ExperimentConfig& c, std::string_view v) { c.variant = variant_from_string(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.variant)); }},
      Field{"seed", [](ExperimentConfig& c, std::string_view v) { c.seed = parse_value<std::uint64_t>("seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      HYBREC_BOOL_FIELD("flags.quantize", flags.quantize),
      HYBREC_BOOL_FIELD("flags.distill", flags.distill),
      HYBREC_BOOL_FIELD("flags.lora", flags.lora),
      HYBREC_BOOL_FIELD("flags.cache", flags.cache),
      HYBREC_SIZE_FIELD("dims.d_g", dims.d_g),
      HYBREC_SIZE_FIELD("dims.d_s", dims.d_s),
      HYBREC_SIZE_FIELD("dims.d_h", dims.d_h),
      HYBREC_SIZE_FIELD("dims.layers", dims.layers),
      HYBREC_SIZE_FIELD("dims.num_buckets", dims.num_buckets),
      HYBREC_SIZE_FIELD("dims.lora_rank", lora_rank),
      HYBREC_DOUBLE_FIELD("dims.lora_alpha", lora_alpha),
      HYBREC_SIZE_FIELD("training.epochs", training.epochs),
      HYBREC_DOUBLE_FIELD("training.lr", training.lr),
      HYBREC_SIZE_FIELD("training.negatives_per_positive", training.negatives_per_positive),
      HYBREC_SIZE_FIELD("training.batch_size", training.batch_size),
      HYBREC_DOUBLE_FIELD("training.item_dropout", training.item_dropout),
      HYBREC_SIZE_FIELD("training.probe_size", training.probe_size),
      HYBREC_DOUBLE_FIELD("training.distill_temperature", training.distill_temperature),
      HYBREC_DOUBLE_FIELD("training.distill_lambda", training.distill_lambda),
      HYBREC_BOOL_FIELD("training.tune_text", tune_text),
      HYBREC_SIZE_FIELD("eval.k", eval.k),
      HYBREC_SIZE_FIELD("eval.n_latency_requests", eval.n_latency_requests),
      HYBREC_SIZE_FIELD("eval.warmup", eval.warmup),
      HYBREC_SIZE_FIELD("eval.candidates_per_user", eval.candidates_per_user),
      HYBREC_SIZE_FIELD("synth.n_users", synth.n_users),
      HYBREC_SIZE_FIELD("synth.n_items", synth.n_items),
      HYBREC_SIZE_FIELD("synth.clusters", synth.clusters),
      HYBREC_DOUBLE_FIELD("synth.p_in", synth.p_in),
      HYBREC_DOUBLE_FIELD("synth.text_noise", synth.text_noise),
      HYBREC_DOUBLE_FIELD("synth.fresh_fraction", synth.fresh_fraction),
      HYBREC_SIZE_FIELD("synth.min_interactions", synth.min_interactions),
      HYBREC_SIZE_FIELD("synth.max_interactions", synth.max_interactions),
      HYBREC_SIZE_FIELD("synth.keywords_per_cluster", synth.keywords_per_cluster),
      HYBREC_SIZE_FIELD("synth.keywords_per_item", synth.keywords_per_item),
      HYBREC_SIZE_FIELD("synth.filler_words", synth.filler_words),
      HYBREC_SIZE_FIELD("synth.filler_vocab", synth.filler_vocab),
  };
  return table;
}

#undef HYBREC_SIZE_FIELD
#undef HYBREC_DOUBLE_FIELD
#undef HYBREC_BOOL_FIELD

}  // namespace

std::string ExperimentConfig::label() const { return std::string(find_preset(preset).label); }

std::span<const Preset> presets() { return kPresets; }

const Preset& find_preset(std::string_view key) {
  for (const auto& p : kPresets) {
    if (p.key == key) return p;
  }
  throw ConfigError("unknown preset '" + std::string(key) + "'");
}

ExperimentConfig apply_preset(ExperimentConfig base, std::string_view key) {
  const Preset& p = find_preset(key);
  base.preset = std::string(p.key);
  base.variant = p.variant;
  base.flags = p.flags;
  return base;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      try {
        f.set(config, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      return;
    }
  }
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace hybrec
