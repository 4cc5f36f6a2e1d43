#include "hybrec/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "hybrec/errors.hpp"
#include "hybrec/text_encoder.hpp"

namespace hybrec {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void hash_u64(std::uint64_t& h, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  hash_bytes(h, bytes, 8);
}

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

std::string gnn_name(std::size_t l) { return "gnn." + std::to_string(l); }

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::gnn_only:
      return "gnn_only";
    case Variant::text_only:
      return "text_only";
    case Variant::hybrid:
      return "hybrid";
  }
  return "hybrid";
}

Variant variant_from_string(std::string_view s) {
  if (s == "gnn_only") return Variant::gnn_only;
  if (s == "text_only") return Variant::text_only;
  if (s == "hybrid") return Variant::hybrid;
  throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

LoraAdapter LoraAdapter::init(std::size_t rows, std::size_t cols, std::size_t rank, double alpha, Rng& rng) {
  if (rank == 0) throw InvalidArgument("LoraAdapter: rank must be >= 1");
  LoraAdapter adapter{Matrix(rank, cols), Matrix(rows, rank), rank, alpha};
  const double limit = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : adapter.a.values()) v = rng.uniform(-limit, limit);
  return adapter;
}

Matrix lora_effective(const Matrix& frozen, const LoraAdapter& adapter) {
  if (adapter.rank == 0 || adapter.a.rows() != adapter.rank || adapter.b.cols() != adapter.rank ||
      adapter.b.rows() != frozen.rows() || adapter.a.cols() != frozen.cols()) {
    throw InvalidArgument("lora_effective: adapter shape does not match the frozen weight");
  }
  Matrix out = frozen;
  if (adapter.alpha == 0.0) return out;
  add_scaled_inplace(out, matmul(adapter.b, adapter.a), adapter.scale());
  return out;
}

ModelParams ModelParams::init(const ModelDims& dims, Variant variant, std::size_t num_nodes, std::uint64_t seed) {
  if (dims.layers == 0) throw InvalidArgument("ModelParams: need at least one GNN layer");
  ModelParams m;
  m.dims = dims;
  m.variant = variant;
  m.text_seed = mix_seed(seed, 0x7e47);
  Rng rng(mix_seed(seed, 0x90de));
  const double limit = 1.0 / std::sqrt(static_cast<double>(dims.d_g));
  m.node_table = Matrix(num_nodes, dims.d_g);
  for (double& v : m.node_table.values()) v = rng.uniform(-limit, limit);
  for (std::size_t l = 0; l < dims.layers; ++l) m.gnn_weights.push_back(glorot(dims.d_g, dims.d_g, rng));
  m.head = PredictionHead::init(dims.fused_width(), dims.d_h, rng);
  m.text_table = make_text_table(dims.num_buckets, dims.d_s, m.text_seed);
  set_full_training(m, false);
  return m;
}

bool ModelParams::is_trainable(const std::string& name) const {
  auto it = trainable.find(name);
  return it != trainable.end() && it->second;
}

Matrix ModelParams::effective_gnn_weight(std::size_t layer) const {
  const Matrix& w = gnn_weights.at(layer);
  auto it = lora.find(gnn_name(layer));
  return it == lora.end() ? w : lora_effective(w, it->second);
}

std::vector<Matrix> ModelParams::effective_gnn_weights() const {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < gnn_weights.size(); ++l) out.push_back(effective_gnn_weight(l));
  return out;
}

PredictionHead ModelParams::effective_head() const {
  PredictionHead h = head;
  auto it = lora.find("head.hidden");
  if (it != lora.end()) h.hidden = lora_effective(head.hidden, it->second);
  return h;
}

namespace {

template <class Model, class Slot>
std::vector<Slot> collect_slots(Model& m) {
  std::vector<Slot> slots;
  auto add = [&](std::string name, auto* value) {
    if (value->empty()) return;
    const bool t = m.is_trainable(name);
    slots.push_back(Slot{std::move(name), value, t});
  };
  for (std::size_t l = 0; l < m.gnn_weights.size(); ++l) add(gnn_name(l), &m.gnn_weights[l]);
  add("node_table", &m.node_table);
  add("text_table", &m.text_table);
  add("head.hidden", &m.head.hidden);
  add("head.hidden_bias", &m.head.hidden_bias);
  add("head.out", &m.head.out);
  add("head.out_bias", &m.head.out_bias);
  for (auto& [target, adapter] : m.lora) {
    add("lora." + target + ".a", &adapter.a);
    add("lora." + target + ".b", &adapter.b);
  }
  return slots;
}

}  // namespace

std::vector<ParamSlot> param_slots(ModelParams& model) { return collect_slots<ModelParams, ParamSlot>(model); }

std::vector<ConstParamSlot> param_slots(const ModelParams& model) {
  return collect_slots<const ModelParams, ConstParamSlot>(model);
}

std::size_t count_params(const ModelParams& model, bool trainable_only) {
  std::size_t n = 0;
  for (const auto& slot : param_slots(model)) {
    if (!trainable_only || slot.trainable) n += slot.value->size();
  }
  return n;
}

void enable_lora(ModelParams& model, std::size_t rank, double alpha, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x10a));
  model.trainable.clear();
  for (std::size_t l = 0; l < model.gnn_weights.size(); ++l) {
    const auto& w = model.gnn_weights[l];
    model.lora[gnn_name(l)] = LoraAdapter::init(w.rows(), w.cols(), rank, alpha, rng);
  }
  model.lora["head.hidden"] = LoraAdapter::init(model.head.hidden.rows(), model.head.hidden.cols(), rank, alpha, rng);
  for (const auto& [target, adapter] : model.lora) {
    const bool structural = target.starts_with("gnn.");
    const bool used = !(structural && model.variant == Variant::text_only);
    model.trainable["lora." + target + ".a"] = used;
    model.trainable["lora." + target + ".b"] = used;
  }
  model.trainable["head.out"] = true;
  model.trainable["head.out_bias"] = true;
  model.trainable["head.hidden_bias"] = true;
}

void set_full_training(ModelParams& model, bool tune_text) {
  model.trainable.clear();
  const bool structural = model.variant != Variant::text_only;
  const bool semantic = model.variant != Variant::gnn_only;
  for (std::size_t l = 0; l < model.gnn_weights.size(); ++l) model.trainable[gnn_name(l)] = structural;
  model.trainable["node_table"] = structural;
  model.trainable["text_table"] = semantic && tune_text;
  for (const char* name : {"head.hidden", "head.hidden_bias", "head.out", "head.out_bias"}) {
    model.trainable[name] = true;
  }
  for (const auto& [target, adapter] : model.lora) {
    model.trainable["lora." + target + ".a"] = true;
    model.trainable["lora." + target + ".b"] = true;
  }
}

std::uint64_t model_version(const ModelParams& model) {
  std::uint64_t h = kFnvOffset;
  for (std::size_t v : {model.dims.d_g, model.dims.d_s, model.dims.d_h, model.dims.layers, model.dims.num_buckets}) {
    hash_u64(h, v);
  }
  hash_u64(h, static_cast<std::uint64_t>(model.variant));
  for (const auto& slot : param_slots(model)) {
    hash_bytes(h, slot.name.data(), slot.name.size());
    hash_u64(h, slot.value->rows());
    hash_u64(h, slot.value->cols());
    for (double v : slot.value->values()) hash_u64(h, std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace hybrec
