#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybrec/config.hpp"
#include "hybrec/data.hpp"
#include "hybrec/inference.hpp"
#include "hybrec/trainer.hpp"

namespace hybrec {

// One evaluated user: the held-out positive among the candidates to rank.
struct EvalCase {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::vector<std::uint32_t> candidates;  // includes `positive`
};

struct ExperimentData {
  SplitDataset split;
  PreparedGraph prepared;
  std::vector<EvalCase> cases;
};

// Builds the graph and, per test user, the positive plus
// `candidates_per_user - 1` items the user never trained on (0 = every such
// item). Negatives come from a per-user stream of `seed`.
ExperimentData prepare_experiment(SplitDataset split, const EvalConfig& eval, std::uint64_t seed);

struct AccuracyMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;
};

// Mean P@k, R@k and NDCG@k over the cases, ranking with the hot path.
AccuracyMetrics evaluate(const ServingModel& model, const EmbeddingCache& cache, std::span<const EvalCase> cases,
                         std::size_t k);

struct ReportRow {
  std::string config;  // display label
  double precision_at_10 = 0.0;
  double recall_at_10 = 0.0;
  double ndcg_at_10 = 0.0;
  double latency_mean_ms = 0.0;
  double latency_std_ms = 0.0;
  double train_seconds = 0.0;
  std::size_t trainable_params = 0;
  std::uint64_t seed = 0;

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentResult {
  ReportRow row;
  std::string preset;
  TrainingReport training;
  LatencyStats latency;
};

struct TrainedModel {
  ModelParams params;
  TrainingReport report;
};

// Runs presets against one dataset, training each distinct model once:
// quantized and cached rows reuse the plain hybrid, the LoRA row fine-tunes
// it and the distillation row uses it as teacher.
class ExperimentRunner {
 public:
  ExperimentRunner(const ExperimentData& data, ExperimentConfig base);

  ExperimentResult run(std::string_view preset);
  const TrainedModel& base_model(Variant variant);
  const TrainedModel& lora_model();
  const TrainedModel& distilled_model();

 private:
  TrainedModel train_fresh(const ExperimentConfig& config, const ModelDims& dims, const TeacherFn* teacher);

  const ExperimentData* data_;
  ExperimentConfig base_;
  std::map<Variant, TrainedModel> trained_;
  std::optional<TrainedModel> lora_;
  std::optional<TrainedModel> distilled_;
};

// A single row with its own runner.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data);

std::vector<ExperimentResult> run_matrix(const ExperimentConfig& base, std::span<const std::string> preset_keys,
                                         const ExperimentData& data);

// Dims of the distillation student: every width halved (at least 1).
ModelDims student_dims(const ModelDims& teacher);

}  // namespace hybrec
