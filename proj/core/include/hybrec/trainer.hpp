#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybrec/graph.hpp"
#include "hybrec/linalg.hpp"
#include "hybrec/model.hpp"
#include "hybrec/rng.hpp"
#include "hybrec/text_encoder.hpp"

namespace hybrec {

struct NegativeSample {
  std::vector<std::uint32_t> items;  // dense item ids
  bool exhausted = false;            // fewer than k non-interacted items existed
};

// k distinct items the user has no edge to, uniformly without replacement.
// When at most k such items exist, all of them are returned (ascending) and
// `exhausted` is set if there were fewer than k.
NegativeSample sample_negatives(const InteractionGraph& graph, std::uint32_t user, std::size_t k, Rng& rng);

struct TrainConfig {
  std::size_t epochs = 10;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t negatives_per_positive = 4;
  std::size_t batch_size = 1024;
  // Probability of zeroing an item's structural vector in a training sample
  // (hybrid only). Lets the head score items that have no training edges.
  double item_dropout = 0.5;
  std::size_t probe_size = 2048;  // positives in the fixed loss-tracking batch
  double distill_temperature = 2.0;
  double distill_lambda = 0.5;
  std::uint64_t seed = 0;
};

// Graph plus per-node text, prepared for repeated batch evaluation.
struct TrainingContext {
  const InteractionGraph* graph = nullptr;
  std::vector<BucketBag> bags;  // per node
  Matrix semantic;              // per-node encodings when the text table is frozen; empty otherwise
  Matrix first_aggregate;       // aggregate(node_table) when the node table is frozen; empty otherwise
};

// Tokenizes the corpus once. `semantic` is filled from the model's table when
// that table is not trainable, `first_aggregate` likewise for the node table.
// Throws InvalidArgument when the corpus size does not match the graph.
TrainingContext make_context(const InteractionGraph& graph, const NodeCorpus& corpus, const ModelParams& model);

struct Batch {
  std::vector<std::uint32_t> users;  // dense user ids
  std::vector<std::uint32_t> items;  // dense item ids
  std::vector<double> labels;
  std::vector<double> item_mask;       // multiplies h_i per sample; empty = all ones
  std::vector<double> teacher_logits;  // non-empty selects the distillation loss
};

struct Distillation {
  double temperature = 2.0;
  double lambda = 0.5;
};

struct BatchResult {
  double loss = 0.0;
  std::vector<double> logits;
  std::map<std::string, Matrix> grads;  // trainable slot name -> gradient
};

// One forward pass over the full graph, plus the backward pass for every
// trainable slot when `with_grads` is set.
BatchResult forward_backward(const ModelParams& model, const TrainingContext& ctx, const Batch& batch,
                             const Distillation& distill, bool with_grads);

// Teacher logits for (user, item) pairs, written into `out`.
using TeacherFn = std::function<void(std::span<const std::uint32_t> users, std::span<const std::uint32_t> items,
                                     std::span<double> out)>;

struct TrainingReport {
  std::size_t epochs = 0;
  double wall_clock_seconds = 0.0;
  std::vector<double> epoch_seconds;  // optimizer steps only, no probe evaluation
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;  // probe loss after each epoch
  std::size_t negative_shortfalls = 0;
  std::uint64_t seed = 0;
};

// Mini-batch Adam over every training edge with sampled negatives. The model
// is updated in place. Losses are tracked on a fixed probe batch so that the
// initial, per-epoch and final values are comparable. Throws DivergenceError
// naming the epoch and batch when the loss turns non-finite.
TrainingReport train(ModelParams& model, const InteractionGraph& graph, const NodeCorpus& corpus,
                     const TrainConfig& config, const TeacherFn* teacher = nullptr);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ModelParams& model, const std::map<std::string, Matrix>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

}  // namespace hybrec
