#include "hybrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "hybrec/errors.hpp"
#include "hybrec/fusion.hpp"
#include "hybrec/losses.hpp"

namespace hybrec {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string gnn_name(std::size_t l) { return "gnn." + std::to_string(l); }

bool lora_trainable(const ModelParams& m, const std::string& target) {
  return m.lora.contains(target) &&
         (m.is_trainable("lora." + target + ".a") || m.is_trainable("lora." + target + ".b"));
}

// Gradients of a LoRA pair given input X and the gradient G of the product
// X * W_eff: dA = s (X b)^T G, dB = s X^T (G a^T). Never forms b * a.
void lora_grads(const ModelParams& m, const std::string& target, const Matrix& x, const Matrix& g,
                std::map<std::string, Matrix>& grads) {
  const LoraAdapter& ad = m.lora.at(target);
  const double s = ad.scale();
  const std::string a_name = "lora." + target + ".a";
  const std::string b_name = "lora." + target + ".b";
  if (m.is_trainable(a_name)) grads[a_name] = scaled(matmul_at_b(matmul(x, ad.b), g), s);
  if (m.is_trainable(b_name)) grads[b_name] = scaled(matmul_at_b(x, matmul_a_bt(g, ad.a)), s);
}

struct SemanticRows {
  std::vector<std::vector<double>> user, item;  // per sample
  std::vector<double> user_norm, item_norm;
};

}  // namespace

NegativeSample sample_negatives(const InteractionGraph& graph, std::uint32_t user, std::size_t k, Rng& rng) {
  if (user >= graph.num_users()) throw InvalidArgument("sample_negatives: unknown user");
  const std::size_t num_items = graph.num_items();
  const NodeId u = graph.user_node(user);
  const std::size_t available = num_items - graph.degree(u);
  NegativeSample out;
  if (available <= k) {
    for (std::uint32_t j = 0; j < num_items; ++j) {
      if (!graph.has_edge(u, graph.item_node(j))) out.items.push_back(j);
    }
    out.exhausted = available < k;
    return out;
  }
  if (2 * k > available) {
    // Dense regime: partial Fisher-Yates over the explicit candidate list.
    std::vector<std::uint32_t> pool;
    pool.reserve(available);
    for (std::uint32_t j = 0; j < num_items; ++j) {
      if (!graph.has_edge(u, graph.item_node(j))) pool.push_back(j);
    }
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.items.push_back(pool[i]);
    }
    return out;
  }
  out.items.reserve(k);
  while (out.items.size() < k) {
    const auto j = static_cast<std::uint32_t>(rng.below(num_items));
    if (graph.has_edge(u, graph.item_node(j))) continue;
    if (std::find(out.items.begin(), out.items.end(), j) != out.items.end()) continue;
    out.items.push_back(j);
  }
  return out;
}

TrainingContext make_context(const InteractionGraph& graph, const NodeCorpus& corpus, const ModelParams& model) {
  if (corpus.texts.size() != graph.num_nodes()) {
    throw InvalidArgument("make_context: corpus has " + std::to_string(corpus.texts.size()) + " entries for " +
                          std::to_string(graph.num_nodes()) + " nodes");
  }
  TrainingContext ctx;
  ctx.graph = &graph;
  ctx.bags.reserve(corpus.texts.size());
  for (const auto& text : corpus.texts) ctx.bags.push_back(to_buckets(tokenize(text), model.dims.num_buckets));
  if (!model.is_trainable("text_table") && model.variant != Variant::gnn_only) {
    ctx.semantic = Matrix(graph.num_nodes(), model.dims.d_s);
    for (std::size_t v = 0; v < ctx.bags.size(); ++v) encode_buckets(ctx.bags[v], model.text_table, ctx.semantic.row(v));
  }
  if (!model.is_trainable("node_table") && model.variant != Variant::text_only) {
    if (model.node_table.rows() != graph.num_nodes()) {
      throw InvalidArgument("make_context: node table does not match the graph");
    }
    ctx.first_aggregate = aggregate(graph, model.node_table);
  }
  return ctx;
}

BatchResult forward_backward(const ModelParams& model, const TrainingContext& ctx, const Batch& batch,
                             const Distillation& distill, bool with_grads) {
  const InteractionGraph& graph = *ctx.graph;
  const std::size_t n = batch.users.size();
  if (n == 0) throw InvalidArgument("forward_backward: empty batch");
  if (batch.items.size() != n || batch.labels.size() != n) {
    throw InvalidArgument("forward_backward: batch field lengths differ");
  }
  if (!batch.item_mask.empty() && batch.item_mask.size() != n) {
    throw InvalidArgument("forward_backward: item mask length mismatch");
  }
  const std::size_t dg = model.dims.d_g;
  const std::size_t ds = model.dims.d_s;
  const std::size_t layers = model.gnn_weights.size();
  const bool use_h = model.variant != Variant::text_only;
  const bool use_e = model.variant != Variant::gnn_only;
  const bool tune_text = use_e && model.is_trainable("text_table");
  const std::size_t hu_col = 0, eu_col = dg, hi_col = dg + ds, ei_col = 2 * dg + ds;
  const auto user_node = [&](std::size_t r) { return graph.user_node(batch.users[r]); };
  const auto item_node = [&](std::size_t r) { return graph.item_node(batch.items[r]); };
  const auto mask = [&](std::size_t r) { return batch.item_mask.empty() ? 1.0 : batch.item_mask[r]; };

  // Structural forward over the whole graph.
  std::vector<Matrix> weights, aggs, pres;
  Matrix x_final;
  if (use_h) {
    if (model.node_table.rows() != graph.num_nodes()) {
      throw InvalidArgument("forward_backward: node table does not match the graph");
    }
    weights = model.effective_gnn_weights();
    Matrix x = model.node_table;
    for (std::size_t l = 0; l < layers; ++l) {
      aggs.push_back(l == 0 && !ctx.first_aggregate.empty() ? ctx.first_aggregate : aggregate(graph, x));
      pres.push_back(matmul(aggs.back(), weights[l]));
      x = l + 1 < layers ? relu(pres.back()) : pres.back();
    }
    x_final = std::move(x);
  }

  // Semantic vectors per sample.
  SemanticRows sem;
  if (use_e && (tune_text || ctx.semantic.empty())) {
    sem.user.assign(n, std::vector<double>(ds));
    sem.item.assign(n, std::vector<double>(ds));
    sem.user_norm.resize(n);
    sem.item_norm.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      sem.user_norm[r] = encode_buckets(ctx.bags[user_node(r)], model.text_table, sem.user[r]);
      sem.item_norm[r] = encode_buckets(ctx.bags[item_node(r)], model.text_table, sem.item[r]);
    }
  }
  const auto e_user = [&](std::size_t r) -> std::span<const double> {
    return sem.user.empty() ? ctx.semantic.row(user_node(r)) : std::span<const double>(sem.user[r]);
  };
  const auto e_item = [&](std::size_t r) -> std::span<const double> {
    return sem.item.empty() ? ctx.semantic.row(item_node(r)) : std::span<const double>(sem.item[r]);
  };

  Matrix z(n, model.dims.fused_width());
  for (std::size_t r = 0; r < n; ++r) {
    auto row = z.row(r);
    if (use_h) {
      const auto hu = x_final.row(user_node(r));
      const auto hi = x_final.row(item_node(r));
      const double m = mask(r);
      for (std::size_t c = 0; c < dg; ++c) {
        row[hu_col + c] = hu[c];
        row[hi_col + c] = m * hi[c];
      }
    }
    if (use_e) {
      std::copy_n(e_user(r).begin(), ds, row.begin() + static_cast<std::ptrdiff_t>(eu_col));
      std::copy_n(e_item(r).begin(), ds, row.begin() + static_cast<std::ptrdiff_t>(ei_col));
    }
  }

  const PredictionHead head = model.effective_head();
  HeadActivations acts;
  BatchResult result;
  result.logits = head_forward(z, head, &acts);
  const LossGrad lg = batch.teacher_logits.empty()
                          ? bce_with_grad(result.logits, batch.labels)
                          : distill_with_grad(result.logits, batch.teacher_logits, batch.labels,
                                              distill.temperature, distill.lambda);
  result.loss = lg.loss;
  if (!with_grads) return result;

  auto& grads = result.grads;
  const HeadBackward hb = head_backward(acts, head, lg.d_logits);
  if (model.is_trainable("head.out")) grads["head.out"] = hb.d_out;
  if (model.is_trainable("head.out_bias")) grads["head.out_bias"] = hb.d_out_bias;
  if (model.is_trainable("head.hidden_bias")) grads["head.hidden_bias"] = hb.d_hidden_bias;
  if (model.is_trainable("head.hidden")) grads["head.hidden"] = matmul_at_b(z, hb.d_pre);
  if (lora_trainable(model, "head.hidden")) lora_grads(model, "head.hidden", z, hb.d_pre, grads);

  bool structural_grads = use_h && model.is_trainable("node_table");
  for (std::size_t l = 0; l < layers; ++l) {
    structural_grads = structural_grads || (use_h && (model.is_trainable(gnn_name(l)) || lora_trainable(model, gnn_name(l))));
  }
  if (!structural_grads && !tune_text) return result;

  // d z restricted to the columns that feed trainable parameters.
  std::vector<std::size_t> cols;
  if (structural_grads) {
    for (std::size_t c = 0; c < dg; ++c) cols.push_back(hu_col + c);
    for (std::size_t c = 0; c < dg; ++c) cols.push_back(hi_col + c);
  }
  if (tune_text) {
    for (std::size_t c = 0; c < ds; ++c) cols.push_back(eu_col + c);
    for (std::size_t c = 0; c < ds; ++c) cols.push_back(ei_col + c);
  }
  Matrix w_sub_t(head.hidden_width(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t j = 0; j < head.hidden_width(); ++j) w_sub_t(j, c) = head.hidden(cols[c], j);
  }
  const Matrix dz = matmul(hb.d_pre, w_sub_t);
  std::size_t next_col = 0;

  if (structural_grads) {
    Matrix dx(graph.num_nodes(), dg);
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = dz.row(r);
      auto du = dx.row(user_node(r));
      auto di = dx.row(item_node(r));
      const double m = mask(r);
      for (std::size_t c = 0; c < dg; ++c) {
        du[c] += g[c];
        di[c] += m * g[dg + c];
      }
    }
    next_col = 2 * dg;
    const bool want_table = model.is_trainable("node_table");
    for (std::size_t l = layers; l-- > 0;) {
      Matrix dp = std::move(dx);
      if (l + 1 < layers) {
        auto d = dp.values();
        const auto p = pres[l].values();
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (!(p[i] > 0.0)) d[i] = 0.0;
        }
      }
      const std::string name = gnn_name(l);
      if (model.is_trainable(name)) grads[name] = matmul_at_b(aggs[l], dp);
      if (lora_trainable(model, name)) lora_grads(model, name, aggs[l], dp, grads);
      if (l == 0 && !want_table) break;
      // The normalized adjacency is symmetric, so its transpose is aggregate().
      dx = aggregate(graph, matmul(dp, transpose(weights[l])));
      if (l == 0) grads["node_table"] = std::move(dx);
    }
  }

  if (tune_text) {
    Matrix dt(model.text_table.rows(), ds);
    std::vector<double> dv(ds);
    const auto backprop = [&](const BucketBag& bag, std::span<const double> e, double norm, std::span<const double> de) {
      if (bag.empty() || norm == 0.0) return;
      double proj = 0.0;
      for (std::size_t c = 0; c < ds; ++c) proj += e[c] * de[c];
      for (std::size_t c = 0; c < ds; ++c) dv[c] = (de[c] - e[c] * proj) / norm;
      for (const auto& [bucket, count] : bag.entries) {
        auto row = dt.row(bucket);
        for (std::size_t c = 0; c < ds; ++c) row[c] += count * dv[c];
      }
    };
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = dz.row(r);
      backprop(ctx.bags[user_node(r)], sem.user[r], sem.user_norm[r], g.subspan(next_col, ds));
      backprop(ctx.bags[item_node(r)], sem.item[r], sem.item_norm[r], g.subspan(next_col + ds, ds));
    }
    grads["text_table"] = std::move(dt);
  }
  return result;
}

void Adam::step(ModelParams& model, const std::map<std::string, Matrix>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& slot : param_slots(model)) {
    auto it = grads.find(slot.name);
    if (it == grads.end()) continue;
    const auto g = it->second.values();
    auto w = slot.value->values();
    if (g.size() != w.size()) throw InvalidArgument("Adam: gradient shape mismatch for " + slot.name);
    auto [mit, fresh] = moments_.try_emplace(slot.name);
    if (fresh) {
      mit->second.first = Matrix(slot.value->rows(), slot.value->cols());
      mit->second.second = Matrix(slot.value->rows(), slot.value->cols());
    }
    auto m = mit->second.first.values();
    auto v = mit->second.second.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

TrainingReport train(ModelParams& model, const InteractionGraph& graph, const NodeCorpus& corpus,
                     const TrainConfig& config, const TeacherFn* teacher) {
  const auto t0 = Clock::now();
  if (config.batch_size == 0) throw InvalidArgument("train: batch_size must be >= 1");
  TrainingReport report;
  report.seed = config.seed;
  report.epochs = config.epochs;
  report.trainable_params = count_params(model, true);
  report.total_params = count_params(model, false);

  const TrainingContext ctx = make_context(graph, corpus, model);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> positives;
  for (std::uint32_t u = 0; u < graph.num_users(); ++u) {
    for (NodeId v : graph.neighbors(graph.user_node(u))) {
      positives.emplace_back(u, static_cast<std::uint32_t>(v - graph.num_users()));
    }
  }
  if (positives.empty()) throw EmptyGraphError("train: graph has no edges");

  const Distillation distill{config.distill_temperature, config.distill_lambda};
  const bool dropout = model.variant == Variant::hybrid && config.item_dropout > 0.0;
  Rng negative_rng(mix_seed(config.seed, 0x5a3));
  Rng order_rng(mix_seed(config.seed, 0x0de));
  Rng dropout_rng(mix_seed(config.seed, 0xd0f));

  const auto make_batch = [&](std::span<const std::size_t> idx, Rng& rng, bool with_dropout) {
    Batch b;
    const auto push = [&](std::uint32_t u, std::uint32_t i, double y) {
      b.users.push_back(u);
      b.items.push_back(i);
      b.labels.push_back(y);
      if (with_dropout) b.item_mask.push_back(dropout_rng.bernoulli(config.item_dropout) ? 0.0 : 1.0);
    };
    for (std::size_t k : idx) {
      const auto [u, i] = positives[k];
      push(u, i, 1.0);
      const NegativeSample neg = sample_negatives(graph, u, config.negatives_per_positive, rng);
      if (neg.exhausted) ++report.negative_shortfalls;
      for (std::uint32_t j : neg.items) push(u, j, 0.0);
    }
    if (teacher != nullptr) {
      b.teacher_logits.resize(b.users.size());
      (*teacher)(b.users, b.items, b.teacher_logits);
    }
    return b;
  };

  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  // Fixed probe batch for loss tracking.
  Batch probe;
  {
    Rng probe_rng(mix_seed(config.seed, 0x9b0));
    std::vector<std::size_t> idx = order;
    if (idx.size() > config.probe_size) {
      for (std::size_t i = 0; i < config.probe_size; ++i) {
        std::swap(idx[i], idx[i + static_cast<std::size_t>(probe_rng.below(idx.size() - i))]);
      }
      idx.resize(config.probe_size);
      std::sort(idx.begin(), idx.end());
    }
    probe = make_batch(idx, probe_rng, dropout);
  }
  const auto probe_loss = [&](const std::string& when) {
    const double loss = forward_backward(model, ctx, probe, distill, false).loss;
    if (!std::isfinite(loss)) throw DivergenceError("non-finite probe loss " + when);
    return loss;
  };

  report.initial_loss = probe_loss("before training");
  report.final_loss = report.initial_loss;
  Adam adam(config.lr, config.beta1, config.beta2, config.adam_eps);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto te = Clock::now();
    order_rng.shuffle(std::span<std::size_t>(order));
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const Batch batch = make_batch(std::span<const std::size_t>(order).subspan(start, len), negative_rng, dropout);
      BatchResult res = forward_backward(model, ctx, batch, distill, true);
      if (!std::isfinite(res.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(batch_index));
      }
      adam.step(model, res.grads);
    }
    report.epoch_seconds.push_back(seconds_since(te));
    report.final_loss = probe_loss("after epoch " + std::to_string(epoch));
    report.epoch_losses.push_back(report.final_loss);
  }
  report.wall_clock_seconds = seconds_since(t0);
  return report;
}

}  // namespace hybrec
