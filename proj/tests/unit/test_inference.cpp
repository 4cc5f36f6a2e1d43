#include <gtest/gtest.h>

#include <numeric>

#include "hybrec/data.hpp"
#include "hybrec/errors.hpp"
#include "hybrec/inference.hpp"
#include "hybrec/trainer.hpp"
#include "test_support.hpp"

using namespace hybrec;
using hybrec::testing::EdgeList;

namespace {

// Users 0..2 each own one item; user 3 is isolated. With c = 1 on every edge
// and a head that passes h_i straight through, item j scores node_table[j].
struct HandModel {
  InteractionGraph graph = graph_from_dense(4, 3, EdgeList{{0, 0}, {1, 1}, {2, 2}});
  NodeCorpus corpus{std::vector<std::string>(7)};
  ModelParams params;

  explicit HandModel(const std::vector<double>& item_logits) {
    ModelDims d;
    d.d_g = 1;
    d.d_s = 1;
    d.d_h = 1;
    d.layers = 1;
    d.num_buckets = 8;
    params = ModelParams::init(d, Variant::gnn_only, 7, 1);
    params.gnn_weights[0] = Matrix::from_rows({{1.0}});
    params.node_table = Matrix(7, 1);
    for (std::size_t j = 0; j < 3; ++j) params.node_table(j, 0) = item_logits[j];
    params.head.hidden = Matrix::from_rows({{0}, {0}, {1}, {0}});  // picks h_i
    params.head.hidden_bias = Matrix::from_rows({{1.0}});
    params.head.out = Matrix::from_rows({{1.0}});
    params.head.out_bias = Matrix::from_rows({{-1.0}});
  }
};

struct Trained {
  PreparedGraph prepared;
  ModelParams params;
};

const Trained& trained_hybrid() {
  static const Trained t = [] {
    SyntheticConfig c;
    c.n_users = 150;
    c.n_items = 60;
    c.clusters = 3;
    c.seed = 8;
    Trained out{prepare_graph(split_leave_one_out(generate_synthetic(c).data)), {}};
    ModelDims d = hybrec::testing::toy_dims();
    d.num_buckets = 512;
    out.params = ModelParams::init(d, Variant::hybrid, out.prepared.graph.num_nodes(), 4);
    TrainConfig tc;
    tc.epochs = 1;
    train(out.params, out.prepared.graph, out.prepared.corpus, tc);
    return out;
  }();
  return t;
}

std::vector<std::uint32_t> all_items(std::size_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

}  // namespace

TEST(ServeTopk, HandComputedRanking) {
  const HandModel h({0.2, -0.1, 0.9});
  const ServingModel s(h.params, h.graph, h.corpus, false);
  const auto cache = precompute(s);
  const std::vector<std::uint32_t> cands{0, 1, 2};
  const auto logits = score_candidates(s, &cache, ServeMode::hot, 3, cands);
  EXPECT_NEAR(logits[0], 0.2, 1e-15);
  EXPECT_NEAR(logits[1], -0.1, 1e-15);
  EXPECT_NEAR(logits[2], 0.9, 1e-15);
  for (auto mode : {ServeMode::hot, ServeMode::cold}) {
    const auto rec = serve_topk(s, &cache, mode, 3, cands, 3, 17);
    EXPECT_EQ(rec.items, (std::vector<std::uint32_t>{2, 0, 1}));
    EXPECT_EQ(rec.latency.request_id, 17u);
    EXPECT_EQ(rec.latency.mode, mode);
    EXPECT_GT(rec.latency.elapsed_ms, 0.0);
  }
}

TEST(ServeTopk, TiesBreakByAscendingId) {
  const HandModel h({0.5, 0.5, 0.5});
  const ServingModel s(h.params, h.graph, h.corpus, false);
  const std::vector<std::uint32_t> cands{2, 0, 1};
  EXPECT_EQ(serve_topk(s, nullptr, ServeMode::cold, 0, cands, 3).items, (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(ServeTopk, KLargerThanCandidates) {
  const HandModel h({0.1, 0.3, 0.2});
  const ServingModel s(h.params, h.graph, h.corpus, false);
  const std::vector<std::uint32_t> cands{0, 1, 2};
  EXPECT_EQ(serve_topk(s, nullptr, ServeMode::cold, 0, cands, 10).items, (std::vector<std::uint32_t>{1, 2, 0}));
  EXPECT_EQ(serve_topk(s, nullptr, ServeMode::cold, 0, cands, 1).items, (std::vector<std::uint32_t>{1}));
}

TEST(ServeTopk, RejectsUnknownIdsAndMissingCache) {
  const HandModel h({0.1, 0.3, 0.2});
  const ServingModel s(h.params, h.graph, h.corpus, false);
  const std::vector<std::uint32_t> bad{5};
  EXPECT_THROW(serve_topk(s, nullptr, ServeMode::cold, 0, bad, 1), InvalidArgument);
  const std::vector<std::uint32_t> ok{0};
  EXPECT_THROW(serve_topk(s, nullptr, ServeMode::cold, 9, ok, 1), InvalidArgument);
  EXPECT_ANY_THROW(serve_topk(s, nullptr, ServeMode::hot, 0, ok, 1));
}

TEST(Cache, StaleVersionRejected) {
  HandModel h({0.1, 0.3, 0.2});
  const auto cache = precompute(ServingModel(h.params, h.graph, h.corpus, false));
  h.params.head.out(0, 0) = 2.0;
  const ServingModel changed(h.params, h.graph, h.corpus, false);
  EXPECT_NE(changed.version(), cache.model_version);
  const std::vector<std::uint32_t> cands{0, 1};
  EXPECT_THROW(serve_topk(changed, &cache, ServeMode::hot, 0, cands, 1), StaleCacheError);
  EXPECT_NO_THROW(serve_topk(changed, &cache, ServeMode::cold, 0, cands, 1));
}

TEST(Cache, QuantizedVersionDiffers) {
  const HandModel h({0.1, 0.3, 0.2});
  EXPECT_NE(ServingModel(h.params, h.graph, h.corpus, false).version(),
            ServingModel(h.params, h.graph, h.corpus, true).version());
}

TEST(Cache, EntriesEqualFreshEncode) {
  const auto& t = trained_hybrid();
  const ServingModel s(t.params, t.prepared.graph, t.prepared.corpus, false);
  const auto cache = precompute(s);
  const auto enc = encode(t.prepared.graph, {0, t.params.node_table}, t.params.effective_gnn_weights());
  EXPECT_EQ(cache.structural.vectors, enc.vectors);
  for (std::size_t v = 0; v < t.prepared.graph.num_nodes(); v += 7) {
    const auto e = encode_text(t.prepared.corpus.texts[v], t.params.text_table);
    for (std::size_t j = 0; j < e.size(); ++j) EXPECT_EQ(cache.semantic(v, j), e[j]);
  }
}

TEST(HotCold, IdenticalRankingsForAllUsers) {
  const auto& t = trained_hybrid();
  const auto& g = t.prepared.graph;
  auto lora = t.params;
  enable_lora(lora, 2, 4.0, 3);
  Rng rng(1);
  for (auto& [name, ad] : lora.lora)
    for (double& x : ad.b.values()) x = rng.uniform(-0.1, 0.1);
  for (const ModelParams* p : {&t.params, static_cast<const ModelParams*>(&lora)}) {
    for (bool quantized : {false, true}) {
      const ServingModel s(*p, g, t.prepared.corpus, quantized);
      const auto cache = precompute(s);
      const auto cands = all_items(g.num_items());
      for (std::uint32_t u = 0; u < g.num_users(); ++u) {
        const auto hot = serve_topk(s, &cache, ServeMode::hot, u, cands, 10);
        const auto cold = serve_topk(s, &cache, ServeMode::cold, u, cands, 10);
        ASSERT_EQ(hot.items, cold.items) << "user " << u << " quantized " << quantized;
      }
    }
  }
}

TEST(LatencyTrial, WarmupExcluded) {
  const auto& t = trained_hybrid();
  const ServingModel s(t.params, t.prepared.graph, t.prepared.corpus, false);
  const auto cache = precompute(s);
  LatencyTrialConfig cfg;
  cfg.n_requests = 120;
  cfg.warmup = 15;
  cfg.candidates_per_request = 20;
  cfg.seed = 3;
  const auto a = run_latency_trial(s, &cache, ServeMode::hot, cfg);
  EXPECT_EQ(a.stats.count, 120u);
  ASSERT_EQ(a.samples.size(), 120u);
  for (const auto& smp : a.samples) {
    EXPECT_GT(smp.elapsed_ms, 0.0);
    EXPECT_EQ(smp.mode, ServeMode::hot);
  }
  EXPECT_EQ(a.samples.front().request_id, 15u);
  EXPECT_EQ(a.samples.back().request_id, 134u);
}

TEST(CachedTeacher, MatchesServingLogits) {
  const auto& t = trained_hybrid();
  const ServingModel s(t.params, t.prepared.graph, t.prepared.corpus, false);
  const auto cache = precompute(s);
  const TeacherFn teacher = cached_teacher(s, cache);
  const std::vector<std::uint32_t> users{0, 0, 5}, items{1, 2, 3};
  std::vector<double> out(3);
  teacher(users, items, out);
  const std::vector<std::uint32_t> c12{1, 2}, c3{3};
  const auto l0 = score_candidates(s, &cache, ServeMode::hot, 0, c12);
  const auto l5 = score_candidates(s, &cache, ServeMode::hot, 5, c3);
  EXPECT_EQ(out[0], l0[0]);
  EXPECT_EQ(out[1], l0[1]);
  EXPECT_EQ(out[2], l5[0]);
}
