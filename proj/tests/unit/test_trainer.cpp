#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "hybrec/data.hpp"
#include "hybrec/errors.hpp"
#include "hybrec/trainer.hpp"
#include "test_support.hpp"

using namespace hybrec;
using hybrec::testing::EdgeList;
using hybrec::testing::toy_dims;

namespace {

struct Toy {
  InteractionGraph graph;
  NodeCorpus corpus;
};

// 4 users, 4 items; node 8 is an extra isolated item so dropout/cold paths see it.
Toy toy() {
  const EdgeList e{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 0}, {3, 3}};
  Toy t{graph_from_dense(4, 5, e), {}};
  t.corpus.texts = {"", "likes red shoes", "", "", "red shoe", "blue book", "great book club", "red book", "fresh blue shoe"};
  return t;
}

Batch toy_batch() {
  Batch b;
  b.users = {0, 1, 2, 3, 0, 2};
  b.items = {0, 2, 3, 4, 3, 1};
  b.labels = {1, 1, 1, 0, 0, 1};
  return b;
}

// Every trainable slot of `model` checked against forward_backward's gradients.
double pipeline_grad_error(ModelParams& model, const Toy& t, const Batch& batch, const Distillation& d) {
  TrainingContext ctx = make_context(t.graph, t.corpus, model);
  const BatchResult res = forward_backward(model, ctx, batch, d, true);
  std::vector<GradProbe> probes;
  for (auto& slot : param_slots(model)) {
    if (!slot.trainable) continue;
    EXPECT_TRUE(res.grads.contains(slot.name)) << slot.name;
    if (!res.grads.contains(slot.name)) continue;
    probes.push_back({slot.name, slot.value, &res.grads.at(slot.name)});
  }
  for (const auto& [name, g] : res.grads) {
    bool found = false;
    for (const auto& p : probes) found |= p.name == name;
    EXPECT_TRUE(found) << "gradient for frozen slot " << name;
  }
  auto loss = [&] { return forward_backward(model, ctx, batch, d, false).loss; };
  return grad_check(loss, probes, 1e-5).max_relative_error;
}

ModelParams toy_model(Variant v, std::uint64_t seed = 3) {
  auto m = ModelParams::init(toy_dims(), v, 9, seed);
  // non-zero biases so no ReLU sits exactly at a kink
  Rng rng(seed + 100);
  for (double& x : m.head.hidden_bias.values()) x = rng.uniform(-0.1, 0.1);
  return m;
}

SyntheticConfig small_synth(std::uint64_t seed) {
  SyntheticConfig c;
  c.n_users = 200;
  c.n_items = 80;
  c.clusters = 4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Negatives, SingleRemainingItem) {
  EdgeList e;
  for (std::uint32_t i = 0; i < 9; ++i) e.emplace_back(0, i);
  const auto g = graph_from_dense(1, 10, e);
  Rng rng(1);
  const auto s = sample_negatives(g, 0, 1, rng);
  EXPECT_EQ(s.items, std::vector<std::uint32_t>{9});
  EXPECT_FALSE(s.exhausted);
  const auto s4 = sample_negatives(g, 0, 4, rng);
  EXPECT_EQ(s4.items, std::vector<std::uint32_t>{9});
  EXPECT_TRUE(s4.exhausted);
}

TEST(Negatives, DistinctAndNotInteracted) {
  Rng rng(2);
  const auto g = graph_from_dense(3, 30, hybrec::testing::random_edges(3, 30, 0.4, rng));
  for (std::uint32_t u = 0; u < 3; ++u) {
    for (std::size_t k : {1u, 5u, 12u}) {
      const auto s = sample_negatives(g, u, k, rng);
      const std::set<std::uint32_t> uniq(s.items.begin(), s.items.end());
      EXPECT_EQ(uniq.size(), s.items.size());
      for (auto i : s.items) EXPECT_FALSE(g.has_edge(u, g.item_node(i)));
    }
  }
}

TEST(Negatives, SameSeedSameSequence) {
  const auto g = graph_from_dense(2, 50, EdgeList{{0, 3}, {1, 7}});
  Rng a(9), b(9);
  for (int r = 0; r < 20; ++r) EXPECT_EQ(sample_negatives(g, 0, 4, a).items, sample_negatives(g, 0, 4, b).items);
}

TEST(Negatives, EmpiricallyUniform) {
  // 10-item catalog, one positive: each of the 9 others drawn with p = k/9.
  const auto g = graph_from_dense(1, 10, EdgeList{{0, 4}});
  Rng rng(10);
  const std::size_t draws = 100000, k = 3;
  std::vector<double> freq(10, 0.0);
  for (std::size_t d = 0; d < draws; ++d)
    for (auto i : sample_negatives(g, 0, k, rng).items) freq[i] += 1;
  EXPECT_EQ(freq[4], 0.0);
  const double p = static_cast<double>(k) / 9.0;
  const double mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (std::size_t i = 0; i < 10; ++i)
    if (i != 4) {
      EXPECT_LT(std::abs(freq[i] - mean), 3 * sd) << "item " << i;
    }
}

TEST(ForwardBackward, HybridGradCheck) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  set_full_training(m, false);
  EXPECT_LT(pipeline_grad_error(m, t, toy_batch(), {}), 1e-4);
}

TEST(ForwardBackward, HybridWithItemMaskGradCheck) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  set_full_training(m, false);
  Batch b = toy_batch();
  b.item_mask = {1, 0, 1, 1, 0, 1};
  EXPECT_LT(pipeline_grad_error(m, t, b, {}), 1e-4);
}

TEST(ForwardBackward, TextTuningGradCheck) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  set_full_training(m, true);
  EXPECT_LT(pipeline_grad_error(m, t, toy_batch(), {}), 1e-4);
}

TEST(ForwardBackward, SingleSideVariantsGradCheck) {
  const Toy t = toy();
  for (auto v : {Variant::gnn_only, Variant::text_only}) {
    auto m = toy_model(v);
    set_full_training(m, true);
    EXPECT_LT(pipeline_grad_error(m, t, toy_batch(), {}), 1e-4) << to_string(v);
  }
}

TEST(ForwardBackward, LoraGradCheck) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  enable_lora(m, 2, 4.0, 5);
  // move B off zero so gradients with respect to A are non-trivial
  Rng rng(6);
  for (auto& [name, ad] : m.lora)
    for (double& x : ad.b.values()) x = rng.uniform(-0.3, 0.3);
  EXPECT_LT(pipeline_grad_error(m, t, toy_batch(), {}), 1e-4);
}

TEST(ForwardBackward, DistillationGradCheck) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  set_full_training(m, false);
  Batch b = toy_batch();
  b.teacher_logits = {2.0, -1.0, 0.5, -3.0, 1.0, 0.0};
  EXPECT_LT(pipeline_grad_error(m, t, b, {2.0, 0.5}), 1e-4);
}

TEST(ForwardBackward, LoraFirstForwardMatchesBase) {
  const Toy t = toy();
  auto base = toy_model(Variant::hybrid);
  auto lora = base;
  enable_lora(lora, 4, 8.0, 1);
  const auto ctx_base = make_context(t.graph, t.corpus, base);
  const auto ctx_lora = make_context(t.graph, t.corpus, lora);
  const auto a = forward_backward(base, ctx_base, toy_batch(), {}, false);
  const auto b = forward_backward(lora, ctx_lora, toy_batch(), {}, false);
  for (std::size_t i = 0; i < a.logits.size(); ++i) EXPECT_LT(std::abs(a.logits[i] - b.logits[i]), 1e-12);
}

TEST(ForwardBackward, CorpusSizeMismatchRejected) {
  Toy t = toy();
  t.corpus.texts.pop_back();
  EXPECT_THROW(make_context(t.graph, t.corpus, toy_model(Variant::hybrid)), InvalidArgument);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  const auto before = model_version(m);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train(m, t.graph, t.corpus, cfg);
  EXPECT_EQ(model_version(m), before);
  EXPECT_GT(r.wall_clock_seconds, 0.0);
  EXPECT_EQ(r.final_loss, r.initial_loss);
  EXPECT_EQ(r.epochs, 0u);
}

TEST(Train, ReportsParameterCounts) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  set_full_training(m, false);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto r = train(m, t.graph, t.corpus, cfg);
  EXPECT_EQ(r.trainable_params, count_params(m, true));
  EXPECT_EQ(r.total_params, count_params(m, false));
  EXPECT_LE(r.trainable_params, r.total_params);
}

TEST(Train, FrozenSlotsUntouched) {
  const Toy t = toy();
  auto m = toy_model(Variant::hybrid);
  enable_lora(m, 2, 4.0, 1);
  const Matrix gnn0 = m.gnn_weights[0], table = m.node_table, hidden = m.head.hidden;
  TrainConfig cfg;
  cfg.epochs = 2;
  train(m, t.graph, t.corpus, cfg);
  EXPECT_EQ(m.gnn_weights[0], gnn0);
  EXPECT_EQ(m.node_table, table);
  EXPECT_EQ(m.head.hidden, hidden);
  EXPECT_NE(m.effective_head().hidden, hidden);
}

TEST(Train, BitwiseDeterministic) {
  const auto synth = generate_synthetic(small_synth(4));
  const auto prepared = prepare_graph(split_leave_one_out(synth.data));
  ModelDims d = toy_dims();
  d.num_buckets = 1024;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 11;
  auto a = ModelParams::init(d, Variant::hybrid, prepared.graph.num_nodes(), 1);
  auto b = a;
  const auto ra = train(a, prepared.graph, prepared.corpus, cfg);
  const auto rb = train(b, prepared.graph, prepared.corpus, cfg);
  EXPECT_EQ(model_version(a), model_version(b));
  EXPECT_EQ(ra.epoch_losses, rb.epoch_losses);
  EXPECT_EQ(ra.final_loss, rb.final_loss);
}

TEST(Train, LossFallsOverFirstEpochs) {
  const auto synth = generate_synthetic(small_synth(5));
  const auto prepared = prepare_graph(split_leave_one_out(synth.data));
  ModelDims d;
  d.num_buckets = 4096;
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 256;
  cfg.seed = 2;
  auto m = ModelParams::init(d, Variant::hybrid, prepared.graph.num_nodes(), 2);
  const auto r = train(m, prepared.graph, prepared.corpus, cfg);
  ASSERT_EQ(r.epoch_losses.size(), 5u);
  int rises = 0;
  double prev = r.initial_loss;
  for (double l : r.epoch_losses) {
    rises += l > prev;
    prev = l;
  }
  EXPECT_LE(rises, 1) << ::testing::PrintToString(r.epoch_losses) << " from " << r.initial_loss;
  EXPECT_LT(r.final_loss, r.initial_loss);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParams m;
  m.node_table = Matrix::from_rows({{1.0, -2.0}});
  m.trainable["node_table"] = true;
  Adam opt(0.1, 0.9, 0.999, 1e-8);
  opt.step(m, {{"node_table", Matrix::from_rows({{3.0, -0.5}})}});
  // bias-corrected first step is lr * sign(g) up to eps
  EXPECT_NEAR(m.node_table(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(m.node_table(0, 1), -1.9, 1e-7);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Train, NonFiniteWeightsRaiseDivergence) {
  const auto prepared = prepare_graph(split_leave_one_out(generate_synthetic(small_synth(6)).data));
  ModelDims d = hybrec::testing::toy_dims();
  auto m = ModelParams::init(d, Variant::hybrid, prepared.graph.num_nodes(), 6);
  m.head.out(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(m, prepared.graph, prepared.corpus, cfg), DivergenceError);
}
