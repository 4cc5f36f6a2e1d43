// hybrec: synthetic data, training, the benchmark matrix and report rendering.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hybrec/config.hpp"
#include "hybrec/data.hpp"
#include "hybrec/errors.hpp"
#include "hybrec/experiment.hpp"
#include "hybrec/model_io.hpp"
#include "hybrec/report.hpp"

namespace {

using namespace hybrec;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> rows;
  std::string format = "csv";
};

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  cfg.synth.seed = cfg.seed;
  return cfg;
}

Dataset load_or_generate(const Options& o, const ExperimentConfig& cfg) {
  if (!o.data.empty()) return load_dataset_dir(o.data);
  std::cerr << "no --data given; generating " << cfg.synth.n_users << " x " << cfg.synth.n_items
            << " synthetic dataset (seed " << cfg.seed << ")\n";
  return generate_synthetic(cfg.synth).data;
}

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw ConfigError("synth: --out <dir> is required");
  const ExperimentConfig cfg = resolve_config(o);
  const SyntheticData synth = generate_synthetic(cfg.synth);
  write_dataset(synth.data, o.out);
  std::cout << "wrote " << synth.data.interactions.size() << " interactions and " << synth.data.item_text.size()
            << " item texts to " << o.out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o) {
  if (o.out.empty()) throw ConfigError("train: --out <model file> is required");
  if (o.rows.size() > 1) throw ConfigError("train: --rows takes a single preset");
  ExperimentConfig cfg = resolve_config(o);
  if (!o.rows.empty()) cfg = apply_preset(cfg, o.rows.front());
  const ExperimentData data = prepare_experiment(split_leave_one_out(load_or_generate(o, cfg)), cfg.eval, cfg.seed);
  ExperimentRunner runner(data, cfg);
  const TrainedModel* trained = nullptr;
  try {
    trained = cfg.flags.lora      ? &runner.lora_model()
              : cfg.flags.distill ? &runner.distilled_model()
                                  : &runner.base_model(cfg.variant);
  } catch (const DivergenceError& e) {
    throw DivergenceError(cfg.label() + ": " + e.what());
  }
  const TrainedModel& model = *trained;
  ModelFile file{model.params, {}, {}, {}, std::nullopt};
  for (std::uint32_t u = 0; u < data.prepared.ids.num_users(); ++u) file.user_ids.push_back(data.prepared.ids.external_user(u));
  for (std::uint32_t i = 0; i < data.prepared.ids.num_items(); ++i) file.item_ids.push_back(data.prepared.ids.external_item(i));
  if (cfg.flags.quantize) attach_int8(file);
  save_model(o.out, file);
  const TrainingReport& r = model.report;
  std::cout << "preset " << cfg.preset << " (" << cfg.label() << ")\n"
            << "epochs " << r.epochs << ", wall clock " << r.wall_clock_seconds << " s\n"
            << "trainable params " << r.trainable_params << " of " << r.total_params << "\n"
            << "loss " << r.initial_loss << " -> " << r.final_loss << "\n"
            << "model written to " << o.out << "\n";
  return kExitOk;
}

int cmd_bench(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const ReportFormat format = report_format_from_string(o.format);
  std::vector<std::string> rows = o.rows;
  if (rows.empty()) {
    for (const auto& p : presets()) rows.emplace_back(p.key);
  }
  for (const auto& key : rows) find_preset(key);
  const ExperimentData data = prepare_experiment(split_leave_one_out(load_or_generate(o, cfg)), cfg.eval, cfg.seed);
  std::cerr << data.prepared.graph.num_users() << " users, " << data.prepared.graph.num_items() << " items, "
            << data.prepared.graph.num_edges() << " training edges, " << data.cases.size() << " test users\n";
  ExperimentRunner runner(data, cfg);
  std::vector<ReportRow> report;
  for (const auto& key : rows) {
    const auto t0 = std::chrono::steady_clock::now();
    report.push_back(runner.run(key).row);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  " << key << " done in " << s << " s\n";
  }
  emit_report(report, format, o.out);
  if (!o.out.empty()) {
    fs::path tradeoff = o.out;
    tradeoff.replace_filename(tradeoff.stem().string() + "_tradeoff.csv");
    std::ofstream(tradeoff, std::ios::binary) << render_tradeoff_csv(report);
  }
  return kExitOk;
}

int cmd_report(const Options& o) {
  if (o.data.empty()) throw ConfigError("report: --data <report.csv> is required");
  std::ifstream in(o.data, std::ios::binary);
  if (!in) throw DataError("cannot open " + o.data);
  std::ostringstream ss;
  ss << in.rdbuf();
  emit_report(parse_report_csv(ss.str()), report_format_from_string(o.format), o.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid graph + text recommender: data synthesis, training and benchmarks"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed for data, training and evaluation");
    sub->add_option("--out", o.out, "output path");
  };
  auto* synth = app.add_subcommand("synth", "generate the planted synthetic dataset");
  common(synth);
  auto* train = app.add_subcommand("train", "train one preset and write a model file");
  common(train);
  train->add_option("--data", o.data, "data directory (synthetic data when omitted)");
  train->add_option("--rows", o.rows, "preset to train")->delimiter(',');
  auto* bench = app.add_subcommand("bench", "run the experiment matrix and write a report");
  common(bench);
  bench->add_option("--data", o.data, "data directory (synthetic data when omitted)");
  bench->add_option("--rows", o.rows, "comma-separated presets (default: all)")->delimiter(',');
  bench->add_option("--format", o.format, "csv or table")->check(CLI::IsMember({"csv", "table"}));
  auto* report = app.add_subcommand("report", "re-render a report CSV");
  report->add_option("--data", o.data, "report CSV to read")->required();
  report->add_option("--out", o.out, "output path (stdout when omitted)");
  report->add_option("--format", o.format, "csv or table")->check(CLI::IsMember({"csv", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (train->parsed()) return cmd_train(o);
    if (bench->parsed()) return cmd_bench(o);
    return cmd_report(o);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
