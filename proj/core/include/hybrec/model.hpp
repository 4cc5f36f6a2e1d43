#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hybrec/fusion.hpp"
#include "hybrec/graph.hpp"
#include "hybrec/linalg.hpp"
#include "hybrec/rng.hpp"

namespace hybrec {

enum class Variant { gnn_only, text_only, hybrid };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct ModelDims {
  std::size_t d_g = 32;  // structural embedding width
  std::size_t d_s = 32;  // semantic embedding width
  std::size_t d_h = 64;  // head hidden width
  std::size_t layers = 2;
  std::size_t num_buckets = std::size_t{1} << 18;

  std::size_t fused_width() const { return 2 * (d_g + d_s); }
  bool operator==(const ModelDims&) const = default;
};

// Low-rank update for a frozen (rows x cols) weight: W + (alpha / rank) * b * a.
struct LoraAdapter {
  Matrix a;  // rank x cols
  Matrix b;  // rows x rank, zero at creation
  std::size_t rank = 0;
  double alpha = 0.0;

  double scale() const { return alpha / static_cast<double>(rank); }
  static LoraAdapter init(std::size_t rows, std::size_t cols, std::size_t rank, double alpha, Rng& rng);
};

// frozen + (alpha / rank) * b * a. `frozen` is not modified.
Matrix lora_effective(const Matrix& frozen, const LoraAdapter& adapter);

// Raw text per graph node; "" when a node has none.
struct NodeCorpus {
  std::vector<std::string> texts;
};

struct ModelParams {
  ModelDims dims;
  Variant variant = Variant::hybrid;
  std::uint64_t text_seed = 0;
  std::vector<Matrix> gnn_weights;  // W^(1..L), d_g x d_g
  Matrix node_table;                // h^(0), num_nodes x d_g
  Matrix text_table;                // num_buckets x d_s
  PredictionHead head;
  std::map<std::string, LoraAdapter> lora;  // keyed by adapted parameter name
  std::map<std::string, bool> trainable;    // parameter name -> flag; absent = frozen

  // Fresh model: node table U(-1/sqrt(d_g), 1/sqrt(d_g)), Glorot GNN and head
  // weights, hashed-text table from its own seed stream. Everything except the
  // text table starts trainable.
  static ModelParams init(const ModelDims& dims, Variant variant, std::size_t num_nodes, std::uint64_t seed);

  bool is_trainable(const std::string& name) const;

  // GNN weight / head with LoRA adapters merged in.
  Matrix effective_gnn_weight(std::size_t layer) const;
  std::vector<Matrix> effective_gnn_weights() const;
  PredictionHead effective_head() const;
};

// Name, storage, and trainability of one parameter matrix. Names:
// gnn.<l>, node_table, text_table, head.hidden, head.hidden_bias, head.out,
// head.out_bias, lora.<target>.a, lora.<target>.b.
struct ParamSlot {
  std::string name;
  Matrix* value;
  bool trainable;
};

struct ConstParamSlot {
  std::string name;
  const Matrix* value;
  bool trainable;
};

std::vector<ParamSlot> param_slots(ModelParams& model);
std::vector<ConstParamSlot> param_slots(const ModelParams& model);

std::size_t count_params(const ModelParams& model, bool trainable_only);

// Freezes every base matrix and attaches rank-r adapters to each GNN weight and
// to head.hidden. Trainable afterwards: the adapters, head.out and the head biases.
void enable_lora(ModelParams& model, std::size_t rank, double alpha, std::uint64_t seed);

// Marks what a full fine-tune of this variant trains (text_only leaves the GNN
// frozen, tune_text adds the text table).
void set_full_training(ModelParams& model, bool tune_text);

// FNV-1a over dims, variant and every parameter's bytes, in slot order.
std::uint64_t model_version(const ModelParams& model);

}  // namespace hybrec
