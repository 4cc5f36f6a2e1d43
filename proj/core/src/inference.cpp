#include "hybrec/inference.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "hybrec/errors.hpp"
#include "hybrec/text_encoder.hpp"

namespace hybrec {

namespace {

using Clock = std::chrono::steady_clock;

void check_ids(const InteractionGraph& graph, std::uint32_t user, std::span<const std::uint32_t> candidates) {
  if (user >= graph.num_users()) throw InvalidArgument("serve: unknown user " + std::to_string(user));
  for (std::uint32_t i : candidates) {
    if (i >= graph.num_items()) throw InvalidArgument("serve: unknown item " + std::to_string(i));
  }
}

}  // namespace

ServingModel::ServingModel(const ModelParams& model, const InteractionGraph& graph, const NodeCorpus& corpus,
                           bool quantized)
    : model_(&model), graph_(&graph), corpus_(&corpus), version_(mix_seed(model_version(model), quantized ? 1 : 0)) {
  if (corpus.texts.size() != graph.num_nodes()) throw InvalidArgument("ServingModel: corpus does not match graph");
  if (model.node_table.rows() != graph.num_nodes()) {
    throw InvalidArgument("ServingModel: node table does not match graph");
  }
  weights_ = model.effective_gnn_weights();
  head_ = model.effective_head();
  if (quantized) {
    for (Matrix& w : weights_) w = dequantize(quantize_per_row(w));
    qhead_ = QuantizedHead::from(head_);
  }
}

double ServingModel::logit(std::span<const double> z) const {
  return qhead_ ? qscore_logit(z, *qhead_) : score_logit(z, head_);
}

EmbeddingCache precompute(const ServingModel& model) {
  EmbeddingCache cache;
  cache.model_version = model.version();
  const auto& p = model.params();
  if (model.uses_structure()) {
    cache.structural = encode(model.graph(), NodeEmbeddings{0, p.node_table}, model.gnn_weights());
  }
  if (model.uses_text()) {
    const auto& texts = model.corpus().texts;
    cache.semantic = Matrix(texts.size(), p.dims.d_s);
    for (std::size_t v = 0; v < texts.size(); ++v) {
      encode_buckets(to_buckets(tokenize(texts[v]), p.dims.num_buckets), p.text_table, cache.semantic.row(v));
    }
  }
  return cache;
}

std::vector<double> score_candidates(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode,
                                     std::uint32_t user, std::span<const std::uint32_t> candidates) {
  const InteractionGraph& graph = model.graph();
  check_ids(graph, user, candidates);
  const auto& dims = model.params().dims;
  const std::size_t dg = dims.d_g;
  const std::size_t ds = dims.d_s;
  const std::vector<double> zeros_g(dg, 0.0), zeros_s(ds, 0.0);
  std::vector<double> logits(candidates.size());
  std::vector<double> z(dims.fused_width());

  if (mode == ServeMode::hot) {
    if (cache == nullptr) throw InvalidArgument("serve: hot mode needs a cache");
    if (cache->model_version != model.version()) {
      throw StaleCacheError("embedding cache was built for model version " + std::to_string(cache->model_version) +
                            ", serving version " + std::to_string(model.version()));
    }
    const auto h = [&](NodeId v) -> std::span<const double> {
      return model.uses_structure() ? cache->structural.vectors.row(v) : std::span<const double>(zeros_g);
    };
    const auto e = [&](NodeId v) -> std::span<const double> {
      return model.uses_text() ? cache->semantic.row(v) : std::span<const double>(zeros_s);
    };
    const NodeId u = graph.user_node(user);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const NodeId i = graph.item_node(candidates[c]);
      fuse_into(h(u), e(u), h(i), e(i), z);
      logits[c] = model.logit(z);
    }
    return logits;
  }

  // Cold path: everything recomputed for the touched nodes.
  std::vector<NodeId> targets{graph.user_node(user)};
  for (std::uint32_t i : candidates) targets.push_back(graph.item_node(i));
  const auto& p = model.params();
  Matrix structural;
  if (model.uses_structure()) structural = encode_nodes(graph, p.node_table, model.gnn_weights(), targets);
  Matrix semantic;
  if (model.uses_text()) {
    semantic = Matrix(targets.size(), ds);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      encode_buckets(to_buckets(tokenize(model.corpus().texts[targets[t]]), dims.num_buckets), p.text_table,
                     semantic.row(t));
    }
  }
  const auto h = [&](std::size_t t) -> std::span<const double> {
    return model.uses_structure() ? structural.row(t) : std::span<const double>(zeros_g);
  };
  const auto e = [&](std::size_t t) -> std::span<const double> {
    return model.uses_text() ? semantic.row(t) : std::span<const double>(zeros_s);
  };
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    fuse_into(h(0), e(0), h(c + 1), e(c + 1), z);
    logits[c] = model.logit(z);
  }
  return logits;
}

Recommendation serve_topk(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode, std::uint32_t user,
                          std::span<const std::uint32_t> candidates, std::size_t k, std::uint64_t request_id) {
  if (candidates.empty()) throw InvalidArgument("serve_topk: no candidates");
  const auto t0 = Clock::now();
  const std::vector<double> logits = score_candidates(model, cache, mode, user, candidates);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return candidates[a] < candidates[b];
  };
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
  Recommendation rec;
  rec.items.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) rec.items.push_back(candidates[order[r]]);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  rec.latency = LatencySample{request_id, mode, ms};
  return rec;
}

LatencyTrial run_latency_trial(const ServingModel& model, const EmbeddingCache* cache, ServeMode mode,
                               const LatencyTrialConfig& config) {
  const InteractionGraph& graph = model.graph();
  if (config.n_requests == 0) throw InvalidArgument("run_latency_trial: n_requests must be >= 1");
  if (graph.num_users() == 0 || graph.num_items() == 0) throw InvalidArgument("run_latency_trial: empty graph");
  Rng rng(mix_seed(config.seed, 0x1a7));
  const std::size_t per_request = std::min(config.candidates_per_request, graph.num_items());
  std::vector<std::uint32_t> pool(graph.num_items());
  std::iota(pool.begin(), pool.end(), std::uint32_t{0});

  LatencyTrial trial;
  const std::size_t total = config.warmup + config.n_requests;
  std::vector<double> measured;
  measured.reserve(config.n_requests);
  for (std::size_t r = 0; r < total; ++r) {
    const auto user = static_cast<std::uint32_t>(rng.below(graph.num_users()));
    for (std::size_t i = 0; i < per_request; ++i) {
      std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
    }
    const std::span<const std::uint32_t> candidates(pool.data(), per_request);
    const Recommendation rec = serve_topk(model, cache, mode, user, candidates, config.k, r);
    if (r < config.warmup) continue;
    trial.samples.push_back(rec.latency);
    measured.push_back(rec.latency.elapsed_ms);
  }
  trial.stats = latency_stats(measured);
  return trial;
}

TeacherFn cached_teacher(const ServingModel& model, const EmbeddingCache& cache) {
  return [&model, &cache](std::span<const std::uint32_t> users, std::span<const std::uint32_t> items,
                          std::span<double> out) {
    for (std::size_t r = 0; r < users.size(); ++r) {
      const std::uint32_t item = items[r];
      out[r] = score_candidates(model, &cache, ServeMode::hot, users[r], std::span<const std::uint32_t>(&item, 1))[0];
    }
  };
}

}  // namespace hybrec
