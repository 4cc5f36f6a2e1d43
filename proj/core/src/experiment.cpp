#include "hybrec/experiment.hpp"

#include <algorithm>
#include <unordered_set>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kModelStream = 0x30de;
constexpr std::uint64_t kTrainStream = 0x7a17;
constexpr std::uint64_t kLoraStream = 0x10aa;

}  // namespace

ModelDims student_dims(const ModelDims& teacher) {
  ModelDims d = teacher;
  d.d_g = std::max<std::size_t>(1, teacher.d_g / 2);
  d.d_s = std::max<std::size_t>(1, teacher.d_s / 2);
  d.d_h = std::max<std::size_t>(1, teacher.d_h / 2);
  return d;
}

ExperimentData prepare_experiment(SplitDataset split, const EvalConfig& eval, std::uint64_t seed) {
  ExperimentData data;
  data.prepared = prepare_graph(split);
  const auto& graph = data.prepared.graph;
  const auto& ids = data.prepared.ids;
  const std::uint64_t eval_seed = mix_seed(seed, kEvalStream);
  for (const auto& x : split.test) {
    EvalCase c;
    c.user = ids.user(x.user);
    c.positive = ids.item(x.item);
    c.candidates.push_back(c.positive);
    const NodeId u = graph.user_node(c.user);
    if (eval.candidates_per_user == 0) {
      for (std::uint32_t j = 0; j < graph.num_items(); ++j) {
        if (j != c.positive && !graph.has_edge(u, graph.item_node(j))) c.candidates.push_back(j);
      }
    } else {
      const std::size_t want = eval.candidates_per_user - 1;
      Rng rng(mix_seed(eval_seed, c.user));
      NegativeSample neg = sample_negatives(graph, c.user, want + 1, rng);
      std::erase(neg.items, c.positive);
      if (neg.items.size() > want) neg.items.resize(want);
      c.candidates.insert(c.candidates.end(), neg.items.begin(), neg.items.end());
    }
    data.cases.push_back(std::move(c));
  }
  data.split = std::move(split);
  return data;
}

AccuracyMetrics evaluate(const ServingModel& model, const EmbeddingCache& cache, std::span<const EvalCase> cases,
                         std::size_t k) {
  AccuracyMetrics m;
  for (const auto& c : cases) {
    const Recommendation rec = serve_topk(model, &cache, ServeMode::hot, c.user, c.candidates, k);
    RankedList list{rec.items, {c.positive}, k};
    m.precision += precision_at_k(list);
    m.recall += recall_at_k(list);
    m.ndcg += ndcg_at_k(list);
  }
  m.users = cases.size();
  if (m.users > 0) {
    const auto n = static_cast<double>(m.users);
    m.precision /= n;
    m.recall /= n;
    m.ndcg /= n;
  }
  return m;
}

ExperimentRunner::ExperimentRunner(const ExperimentData& data, ExperimentConfig base)
    : data_(&data), base_(std::move(base)) {}

TrainedModel ExperimentRunner::train_fresh(const ExperimentConfig& config, const ModelDims& dims,
                                           const TeacherFn* teacher) {
  const auto& graph = data_->prepared.graph;
  TrainedModel out{ModelParams::init(dims, config.variant, graph.num_nodes(), mix_seed(config.seed, kModelStream)),
                   {}};
  set_full_training(out.params, config.tune_text);
  TrainConfig tc = config.training;
  tc.seed = mix_seed(config.seed, kTrainStream);
  out.report = train(out.params, graph, data_->prepared.corpus, tc, teacher);
  return out;
}

const TrainedModel& ExperimentRunner::base_model(Variant variant) {
  auto it = trained_.find(variant);
  if (it != trained_.end()) return it->second;
  ExperimentConfig cfg = base_;
  cfg.variant = variant;
  return trained_.emplace(variant, train_fresh(cfg, cfg.dims, nullptr)).first->second;
}

const TrainedModel& ExperimentRunner::lora_model() {
  if (lora_) return *lora_;
  const TrainedModel& base = base_model(Variant::hybrid);
  TrainedModel out{base.params, {}};
  enable_lora(out.params, base_.lora_rank, base_.lora_alpha, mix_seed(base_.seed, kLoraStream));
  TrainConfig tc = base_.training;
  tc.seed = mix_seed(mix_seed(base_.seed, kTrainStream), kLoraStream);
  out.report = train(out.params, data_->prepared.graph, data_->prepared.corpus, tc, nullptr);
  lora_ = std::move(out);
  return *lora_;
}

const TrainedModel& ExperimentRunner::distilled_model() {
  if (distilled_) return *distilled_;
  const TrainedModel& teacher = base_model(Variant::hybrid);
  const ServingModel serving(teacher.params, data_->prepared.graph, data_->prepared.corpus, false);
  const EmbeddingCache cache = precompute(serving);
  const TeacherFn fn = cached_teacher(serving, cache);
  ExperimentConfig cfg = base_;
  cfg.variant = Variant::hybrid;
  distilled_ = train_fresh(cfg, student_dims(base_.dims), &fn);
  return *distilled_;
}

ExperimentResult ExperimentRunner::run(std::string_view preset) {
  const ExperimentConfig cfg = apply_preset(base_, preset);
  ExperimentResult result;
  result.preset = cfg.preset;
  try {
    const TrainedModel* model = nullptr;
    if (cfg.flags.lora && cfg.flags.distill) throw ConfigError("LoRA and distillation cannot be combined");
    if (cfg.flags.lora) {
      model = &lora_model();
    } else if (cfg.flags.distill) {
      model = &distilled_model();
    } else {
      model = &base_model(cfg.variant);
    }
    const auto& prepared = data_->prepared;
    const ServingModel serving(model->params, prepared.graph, prepared.corpus, cfg.flags.quantize);
    const EmbeddingCache cache = precompute(serving);
    const AccuracyMetrics acc = evaluate(serving, cache, data_->cases, cfg.eval.k);
    LatencyTrialConfig ltc;
    ltc.n_requests = cfg.eval.n_latency_requests;
    ltc.warmup = cfg.eval.warmup;
    ltc.k = cfg.eval.k;
    ltc.candidates_per_request = cfg.eval.candidates_per_user == 0 ? prepared.graph.num_items()
                                                                   : cfg.eval.candidates_per_user;
    ltc.seed = cfg.seed;
    const LatencyTrial trial =
        run_latency_trial(serving, &cache, cfg.flags.cache ? ServeMode::hot : ServeMode::cold, ltc);

    result.training = model->report;
    result.latency = trial.stats;
    result.row = ReportRow{cfg.label(),
                           acc.precision,
                           acc.recall,
                           acc.ndcg,
                           trial.stats.mean_ms,
                           trial.stats.std_ms,
                           model->report.wall_clock_seconds,
                           model->report.trainable_params,
                           cfg.seed};
  } catch (const DivergenceError& e) {
    throw DivergenceError(cfg.label() + ": " + e.what());
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data) {
  ExperimentRunner runner(data, config);
  return runner.run(config.preset);
}

std::vector<ExperimentResult> run_matrix(const ExperimentConfig& base, std::span<const std::string> preset_keys,
                                         const ExperimentData& data) {
  for (const auto& key : preset_keys) find_preset(key);
  ExperimentRunner runner(data, base);
  std::vector<ExperimentResult> out;
  for (const auto& key : preset_keys) out.push_back(runner.run(key));
  return out;
}

}  // namespace hybrec
