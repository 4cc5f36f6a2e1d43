#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hybrec/fusion.hpp"
#include "hybrec/graph.hpp"
#include "hybrec/metrics.hpp"
#include "hybrec/model.hpp"
#include "hybrec/quant.hpp"
#include "hybrec/trainer.hpp"

namespace hybrec {

enum class ServeMode { cold, hot };

// Read-only view of a trained model prepared for scoring: LoRA adapters are
// merged, and with `quantized` the GNN weights and the head go through INT8.
// Holds references to the model, graph and corpus, which must outlive it.
class ServingModel {
 public:
  ServingModel(const ModelParams& model, const InteractionGraph& graph, const NodeCorpus& corpus, bool quantized);

  const ModelParams& params() const { return *model_; }
  const InteractionGraph& graph() const { return *graph_; }
  const NodeCorpus& corpus() const { return *corpus_; }
  bool quantized() const { return qhead_.has_value(); }
  std::uint64_t version() const { return version_; }
  std::span<const Matrix> gnn_weights() const { return weights_; }

  bool uses_structure() const { return model_->variant != Variant::text_only; }
  bool uses_text() const { return model_->variant != Variant::gnn_only; }

  double logit(std::span<const double> z) const;

 private:
  const ModelParams* model_;
  const InteractionGraph* graph_;
  const NodeCorpus* corpus_;
  std::vector<Matrix> weights_;
  PredictionHead head_;
  std::optional<QuantizedHead> qhead_;
  std::uint64_t version_;
};

struct EmbeddingCache {
  NodeEmbeddings structural;  // final layer, every node; empty for text_only
  Matrix semantic;            // one row per node; empty for gnn_only
  std::uint64_t model_version = 0;
};

// Full encode over all nodes and encode_text over every document.
EmbeddingCache precompute(const ServingModel& model);

struct LatencySample {
  std::uint64_t request_id = 0;
  ServeMode mode = ServeMode::hot;
  double elapsed_ms = 0.0;
};

struct Recommendation {
  std::vector<std::uint32_t> items;  // dense item ids, best first
  LatencySample latency;
};

// Logits for each candidate item. Hot mode reads the cache; cold mode
// recomputes the touched nodes' structural vectors over their receptive field
// and re-encodes their text. Throws StaleCacheError when a hot request meets a
// cache built for a different model version, InvalidArgument on unknown ids.
std::vector<double> score_candidates(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode,
                                     std::uint32_t user, std::span<const std::uint32_t> candidates);

// Top-k candidates by logit, ties by ascending item id. The latency sample
// covers scoring and selection.
Recommendation serve_topk(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode, std::uint32_t user,
                          std::span<const std::uint32_t> candidates, std::size_t k, std::uint64_t request_id = 0);

struct LatencyTrialConfig {
  std::size_t n_requests = 1000;
  std::size_t warmup = 50;
  std::size_t k = 10;
  std::size_t candidates_per_request = 100;
  std::uint64_t seed = 0;
};

struct LatencyTrial {
  LatencyStats stats;
  std::vector<LatencySample> samples;  // measured requests only
};

// Sequential requests for uniformly drawn users, each ranking a uniformly
// drawn candidate set. Warmup requests are issued first and not recorded.
LatencyTrial run_latency_trial(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode,
                               const LatencyTrialConfig& config);

// Teacher for distillation that scores (user, item) pairs from a cache.
TeacherFn cached_teacher(const ServingModel& model, const EmbeddingCache& cache);

}  // namespace hybrec
