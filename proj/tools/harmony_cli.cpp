// harmony: train and evaluate accuracy-balanced ensembles from the command line.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "harmony/analysis.hpp"
#include "harmony/baselines.hpp"
#include "harmony/harness.hpp"

namespace {

using namespace harmony;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kTraining = 3;

struct Options {
  std::string config_path;
  std::optional<Seed> seed;
  std::string out_dir;
  std::string model_path;
  std::string split = "val";
  std::string eval_split = "test";
  int repeats = 0;
};

ExperimentConfig resolve(const Options& opts) {
  ExperimentConfig config = load_config(opts.config_path);
  if (opts.seed) config.master_seed = *opts.seed;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.repeats > 0) config.repeats = opts.repeats;
  config.validate();
  return config;
}

std::string set_string(const ClassSet& set) {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) out += (i ? "," : "") + std::to_string(set[i]);
  return out + "}";
}

void print_report(const PerClassReport& report) {
  std::printf("class  support  accuracy\n");
  for (int k = 0; k < report.num_classes(); ++k) {
    std::printf("%5d  %7lld  %.4f\n", k, static_cast<long long>(report.support[static_cast<std::size_t>(k)]),
                report.per_class_accuracy[k]);
  }
  std::printf("mean %.4f  variance %.6f\n", report.mean, report.variance);
}

void print_partition(const WeakGroupPartition& partition) {
  std::printf("strong classes: %s\n", set_string(partition.strong).c_str());
  std::printf("weak classes: %s\n", set_string(partition.weak()).c_str());
  for (std::size_t g = 0; g < partition.groups.size(); ++g) {
    std::printf("weak group %zu: %s\n", g + 1, set_string(partition.groups[g]).c_str());
  }
}

const Dataset& pick_split(const DatasetSplits& data, const std::string& which) {
  if (which == "train") return data.train;
  if (which == "val") return data.val;
  if (which == "test") return data.test;
  throw UsageError("--split must be train, val or test");
}

int cmd_run(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  try {
    const ReportDocument report =
        run_experiment(config, [](const std::string& stage) { std::fprintf(stderr, "[run] %s\n", stage.c_str()); });
    emit_report(report, config.out_dir, {ReportFormat::json, ReportFormat::csv});
    std::printf("%-4s %-22s %8s %10s %5s\n", "row", "method", "avg", "var", "fwd");
    for (const auto& row : report.rows) {
      std::printf("%-4s %-22s %8.4f %10.6f %5d\n", row.method.c_str(), row.name.c_str(), row.mean, row.variance,
                  row.forward_passes);
    }
    std::printf("wrote %s\n", (config.out_dir / "report.json").string().c_str());
    return 0;
  } catch (const ExperimentError& e) {
    emit_report(e.partial(), config.out_dir, {ReportFormat::json, ReportFormat::csv}, "report.partial");
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  }
}

int cmd_train_target(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  const DatasetSplits data = prepare_data(config, config.master_seed);
  const ClassifierSpec spec = model_spec(config, data.train);
  const HarmonyConfig hc = harmony_config(config, config.master_seed);
  const TrainedClassifier target = train(data.train, spec, target_train_config(hc));
  std::filesystem::create_directories(config.out_dir);
  const auto path = config.out_dir / "target.model";
  save_classifier(target, path);
  std::printf("final train loss %.6f\n", target.metadata().final_loss);
  std::printf("validation accuracy %.4f\n", accuracy(predict(target, data.val.features()), data.val.labels()));
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_analyze(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  if (detect_model_kind(opts.model_path) != ModelKind::classifier) {
    throw DataError(opts.model_path + " is not a classifier model file");
  }
  const TrainedClassifier model = load_classifier(opts.model_path);
  const DatasetSplits data = prepare_data(config, config.master_seed);
  const Dataset& ds = pick_split(data, opts.split);
  const ConfusionMatrix cm = confusion_matrix(predict(model, ds.features()), ds.labels(), ds.num_classes());
  const PerClassReport report = per_class_report(cm);
  std::printf("confusion matrix (%s split, rows = true class):\n", opts.split.c_str());
  for (int i = 0; i < cm.num_classes(); ++i) {
    for (int j = 0; j < cm.num_classes(); ++j) std::printf("%6lld", static_cast<long long>(cm.counts()(i, j)));
    std::printf("\n");
  }
  print_report(report);
  ClassSet weak = config.explicit_weak_classes ? *config.explicit_weak_classes
                                               : detect_weak_classes(report, config.detection_delta);
  print_partition(group_weak_classes(cm, weak, config.coupling_threshold));
  return 0;
}

int cmd_train_harmony(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  const DatasetSplits data = prepare_data(config, config.master_seed);
  const ClassifierSpec spec = model_spec(config, data.train);
  const HarmonyModel model = train_harmony(data.train, data.val, spec, harmony_config(config, config.master_seed));
  std::filesystem::create_directories(config.out_dir);
  const auto path = config.out_dir / "harmony.model";
  save_harmony(model, path);
  print_partition(model.partition());
  std::printf("forward passes per sample %d\n", inference_cost(model).forward_passes_per_sample);
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_evaluate(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  const DatasetSplits data = prepare_data(config, config.master_seed);
  const Dataset& ds = pick_split(data, opts.eval_split);
  Labels predicted;
  int passes = 1;
  switch (detect_model_kind(opts.model_path)) {
    case ModelKind::classifier:
      predicted = predict(load_classifier(opts.model_path), ds.features());
      break;
    case ModelKind::harmony: {
      const HarmonyModel model = load_harmony(opts.model_path);
      predicted = predict(model, ds.features());
      passes = inference_cost(model).forward_passes_per_sample;
      break;
    }
    case ModelKind::ensemble:
      try {
        const BaggingEnsemble bag = load_bagging(opts.model_path);
        predicted = predict_majority(bag, ds.features());
        passes = static_cast<int>(bag.members.size());
      } catch (const DataError&) {
        predicted = predict_average(load_averaging(opts.model_path), ds.features());
        passes = 2;
      }
      break;
    case ModelKind::unknown:
      throw DataError(opts.model_path + " is not a recognised model file");
  }
  print_report(per_class_report(confusion_matrix(predicted, ds.labels(), ds.num_classes())));
  std::printf("forward passes per sample %d\n", passes);
  return 0;
}

int cmd_synth(const Options& opts) {
  const ExperimentConfig config = resolve(opts);
  if (config.source != DataSource::synthetic) throw UsageError("synth needs data.source = synthetic");
  const Dataset ds = load_dataset(config, config.master_seed);
  std::filesystem::create_directories(config.out_dir);
  const auto path = config.out_dir / "synthetic.csv";
  save_csv(ds, path);
  std::printf("wrote %zu samples x %ld features, %d classes to %s\n", ds.num_samples(),
              static_cast<long>(ds.num_dims()), ds.num_classes(), path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmony: accuracy-balanced ensembles (target, complementary, conductor)"};
  app.require_subcommand(1);
  Options opts;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "key = value experiment config")->required();
    sub->add_option("--seed", opts.seed, "override the master seed");
    sub->add_option("--out", opts.out_dir, "output directory");
  };

  auto* run = app.add_subcommand("run", "full experiment, rows a-h, writes report.json and report.csv");
  common(run);
  run->add_option("--repeats", opts.repeats, "independent repeats with derived seeds");

  auto* train_target_cmd = app.add_subcommand("train-target", "train the target model and save it");
  common(train_target_cmd);

  auto* analyze = app.add_subcommand("analyze", "confusion matrix and weak-class detection for a saved classifier");
  common(analyze);
  analyze->add_option("--model", opts.model_path, "classifier model file")->required();
  analyze->add_option("--split", opts.split, "train, val or test (default val)");

  auto* train_harmony_cmd = app.add_subcommand("train-harmony", "train target, complementary and conductor models");
  common(train_harmony_cmd);

  auto* evaluate = app.add_subcommand("evaluate", "per-class accuracy of a saved model on the test split");
  common(evaluate);
  evaluate->add_option("--model", opts.model_path, "model file")->required();
  evaluate->add_option("--split", opts.eval_split, "train, val or test (default test)");

  auto* synth = app.add_subcommand("synth", "write the configured synthetic dataset to CSV");
  common(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*run) return cmd_run(opts);
    if (*train_target_cmd) return cmd_train_target(opts);
    if (*analyze) return cmd_analyze(opts);
    if (*train_harmony_cmd) return cmd_train_harmony(opts);
    if (*evaluate) return cmd_evaluate(opts);
    if (*synth) return cmd_synth(opts);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
