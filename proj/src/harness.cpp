#include "harmony/harness.hpp"

#include <chrono>
#include <fstream>

#include "harmony/analysis.hpp"
#include "harmony/baselines.hpp"

namespace harmony {

const MethodRow* ReportDocument::find(std::string_view method, int repeat) const {
  for (const auto& row : rows) {
    if (row.method == method && row.repeat == repeat) return &row;
  }
  return nullptr;
}

std::size_t ReportDocument::max_groups() const {
  std::size_t n = 0;
  for (const auto& run : runs) n = std::max(n, run.partition.groups.size());
  for (const auto& row : rows) n = std::max(n, row.weak_accuracy.size());
  return n;
}

Seed repeat_seed(const ExperimentConfig& config, int repeat) {
  return repeat == 0 ? config.master_seed : derive_seed(config.master_seed, "repeat/" + std::to_string(repeat));
}

Dataset load_dataset(const ExperimentConfig& config, Seed run_seed) {
  switch (config.source) {
    case DataSource::csv:
      return load_csv(config.csv_path, config.label_column);
    case DataSource::idx:
      return load_idx(config.idx_images, config.idx_labels);
    case DataSource::synthetic: {
      SyntheticSpec spec = config.synthetic;
      spec.seed = config.synthetic_seed.value_or(derive_seed(run_seed, "synthetic"));
      return generate_synthetic(spec);
    }
  }
  throw UsageError("unknown data source");
}

DatasetSplits prepare_data(const ExperimentConfig& config, Seed run_seed) {
  SplitSpec split = config.split;
  split.seed = config.split_seed.value_or(derive_seed(run_seed, "split"));
  return stratified_split(load_dataset(config, run_seed), split);
}

ClassifierSpec model_spec(const ExperimentConfig& config, const Dataset& data) {
  ClassifierSpec spec = config.classifier;
  spec.input_dim = static_cast<int>(data.num_dims());
  spec.output_classes = data.num_classes();
  spec.validate();
  return spec;
}

HarmonyConfig harmony_config(const ExperimentConfig& config, Seed run_seed) {
  HarmonyConfig hc;
  hc.detection_delta = config.detection_delta;
  hc.coupling_threshold = config.coupling_threshold;
  hc.complementary_weight = config.complementary_weight;
  hc.explicit_weak_classes = config.explicit_weak_classes;
  hc.bias_mode = config.bias_mode;
  hc.train.sgd = config.sgd;
  hc.seed = derive_seed(run_seed, "row/e");
  return hc;
}

MethodRow make_row(std::string method, std::string name, int repeat, const PerClassReport& report,
                   const WeakGroupPartition& partition, int forward_passes) {
  MethodRow row;
  row.method = std::move(method);
  row.name = std::move(name);
  row.repeat = repeat;
  row.per_class_accuracy = report.per_class_accuracy;
  row.mean = report.mean;
  row.variance = report.variance;
  const GroupAccuracy groups = group_accuracy(report, partition);
  row.strong_accuracy = groups.strong;
  row.weak_accuracy = groups.weak;
  row.forward_passes = forward_passes;
  return row;
}

PerClassReport routing_report(const HarmonyModel& model, const Dataset& test) {
  const Labels routed = route(model, test.features());
  const Labels wanted = build_conductor_labels(test.labels(), model.partition());
  const int k = model.num_classes();
  CountMatrix counts = CountMatrix::Zero(k, k);
  // Diagonal holds correctly routed samples, column 0 (or 1 for class 0) the rest.
  for (std::size_t i = 0; i < test.num_samples(); ++i) {
    const ClassId y = test.labels()[i];
    if (routed[i] == wanted[i]) {
      ++counts(y, y);
    } else {
      ++counts(y, y == 0 ? 1 : 0);
    }
  }
  return per_class_report(ConfusionMatrix(std::move(counts)));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrainingError*>(&e)) return 3;
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  return 2;
}

PerClassReport evaluate_labels(const Labels& predicted, const Dataset& test) {
  return per_class_report(confusion_matrix(predicted, test.labels(), test.num_classes()));
}

std::map<std::string, Seed> train_seeds(const TrainConfig& tc) {
  return {{"init", tc.seed}, {"shuffle", tc.sgd.shuffle_seed}};
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

void add_mean_rows(ReportDocument& report, int repeats) {
  std::vector<MethodRow> means;
  for (const auto& first : report.rows) {
    if (first.repeat != 0) continue;
    MethodRow mean = first;
    mean.repeat = -1;
    mean.seeds.clear();
    mean.strong_accuracy.reset();
    mean.weak_accuracy.clear();
    int found = 1;
    for (int r = 1; r < repeats; ++r) {
      if (const MethodRow* row = report.find(first.method, r)) {
        mean.per_class_accuracy += row->per_class_accuracy;
        ++found;
      }
    }
    if (found != repeats) continue;
    mean.per_class_accuracy /= static_cast<double>(repeats);
    mean.mean = mean.per_class_accuracy.mean();
    mean.variance = population_variance(mean.per_class_accuracy);
    means.push_back(std::move(mean));
  }
  report.rows.insert(report.rows.end(), means.begin(), means.end());
}

}  // namespace

ReportDocument run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  ReportDocument report;
  report.environment = {
      {"backbone", "mlp"},
      {"compiler", __VERSION__},
      {"eigen", eigen_version()},
      {"prng", std::string(Prng::kAlgorithm)},
      {"scalar", "float64"},
      {"tool", "harmony 0.1.0"},
  };
  report.config = config_echo(config);

  std::string stage = "setup";
  const auto note = [&](std::string s) {
    stage = std::move(s);
    if (progress) progress(stage);
  };

  try {
    for (int r = 0; r < config.repeats; ++r) {
      const Seed seed = repeat_seed(config, r);
      const std::string tag = config.repeats > 1 ? " (repeat " + std::to_string(r) + ")" : "";

      note("data" + tag);
      const DatasetSplits data = prepare_data(config, seed);
      const ClassifierSpec spec = model_spec(config, data.train);
      report.num_classes = data.train.num_classes();
      const Dataset& test = data.test;

      // (a), (c), (d), (e) all come from one Harmony training run.
      note("harmony" + tag);
      const HarmonyConfig hc = harmony_config(config, seed);
      auto start = Clock::now();
      const HarmonyModel model = train_harmony(data.train, data.val, spec, hc);
      const double harmony_train = seconds_since(start);
      const WeakGroupPartition& partition = model.partition();
      report.runs.push_back(RunInfo{r, seed, partition});

      note("a: target" + tag);
      start = Clock::now();
      MethodRow row_a = make_row("a", "target", r, evaluate_labels(predict(model.target(), test.features()), test),
                                 partition, 1);
      row_a.seeds = train_seeds(target_train_config(hc));
      report.timings.push_back(RowTiming{"a", r, harmony_train, seconds_since(start)});
      report.rows.push_back(std::move(row_a));

      if (!partition.degenerate()) {
        note("b: weighted target" + tag);
        TrainConfig tb;
        tb.sgd = config.sgd;
        tb.seed = derive_seed(seed, "row/b/init");
        tb.sgd.shuffle_seed = derive_seed(seed, "row/b/shuffle");
        start = Clock::now();
        const auto weighted = train_weighted_target(data.train, spec, tb, config.weighted_lambda, partition.weak());
        const double train_b = seconds_since(start);
        start = Clock::now();
        MethodRow row_b = make_row("b", "target_weighted", r, evaluate_labels(predict(weighted, test.features()), test),
                                   partition, 1);
        row_b.seeds = train_seeds(tb);
        report.timings.push_back(RowTiming{"b", r, train_b, seconds_since(start)});
        report.rows.push_back(std::move(row_b));

        for (std::size_t g = 0; g < model.complementaries().size(); ++g) {
          const std::string id = model.complementaries().size() == 1 ? "c" : "c" + std::to_string(g + 1);
          note(id + ": complementary" + tag);
          start = Clock::now();
          MethodRow row_c = make_row(id, "complementary", r,
                                     evaluate_labels(predict(model.complementaries()[g], test.features()), test),
                                     partition, 1);
          row_c.seeds = train_seeds(complementary_train_config(hc, g));
          report.timings.push_back(RowTiming{id, r, 0.0, seconds_since(start)});
          report.rows.push_back(std::move(row_c));
        }

        note("d: conductor" + tag);
        start = Clock::now();
        MethodRow row_d = make_row("d", "conductor", r, routing_report(model, test), partition, 1);
        row_d.seeds = train_seeds(conductor_train_config(hc));
        report.timings.push_back(RowTiming{"d", r, 0.0, seconds_since(start)});
        report.rows.push_back(std::move(row_d));
      }

      note("e: harmony" + tag);
      start = Clock::now();
      MethodRow row_e = make_row("e", "harmony", r, evaluate_labels(predict(model, test.features()), test), partition,
                                 inference_cost(model).forward_passes_per_sample);
      row_e.seeds = {{"harmony", hc.seed}};
      report.timings.push_back(RowTiming{"e", r, harmony_train, seconds_since(start)});
      report.rows.push_back(std::move(row_e));

      for (std::size_t i = 0; i < config.bagging_sizes.size(); ++i) {
        const int n = config.bagging_sizes[i];
        const std::string id = i == 0 ? "f" : i == 1 ? "g" : "g" + std::to_string(i);
        note(id + ": bagging n=" + std::to_string(n) + tag);
        TrainConfig tf;
        tf.sgd = config.sgd;
        const Seed bag_seed = derive_seed(seed, "row/" + id);
        start = Clock::now();
        const BaggingEnsemble bag = train_bagging(data.train, spec, tf, n, config.weakening, bag_seed);
        const double train_f = seconds_since(start);
        start = Clock::now();
        MethodRow row = make_row(id, "bagging_n" + std::to_string(n), r,
                                 evaluate_labels(predict_majority(bag, test.features()), test), partition,
                                 inference_cost_baseline(EnsembleKind::bagging, n).forward_passes_per_sample);
        row.seeds = {{"bagging", bag_seed}};
        report.timings.push_back(RowTiming{id, r, train_f, seconds_since(start)});
        report.rows.push_back(std::move(row));
      }

      note("h: target + target2" + tag);
      TrainConfig second = target_train_config(hc);
      second.seed = derive_seed(seed, "row/h/init");
      second.sgd.shuffle_seed = derive_seed(seed, "row/h/shuffle");
      start = Clock::now();
      const AveragingEnsemble pair(model.target(), train(data.train, spec, second));
      const double train_h = seconds_since(start);
      start = Clock::now();
      MethodRow row_h = make_row("h", "target_plus_target2", r,
                                 evaluate_labels(predict_average(pair, test.features()), test), partition,
                                 inference_cost_baseline(EnsembleKind::averaging, 2).forward_passes_per_sample);
      row_h.seeds = train_seeds(second);
      report.timings.push_back(RowTiming{"h", r, train_h, seconds_since(start)});
      report.rows.push_back(std::move(row_h));
    }
  } catch (const Error& e) {
    throw ExperimentError(stage, e.what(), report, exit_code_for(e));
  }

  if (config.repeats > 1) add_mean_rows(report, config.repeats);
  return report;
}

ModelKind detect_model_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (in.gcount() != 8) return ModelKind::unknown;
  if (magic == std::string("HRMCLSF\0", 8)) return ModelKind::classifier;
  if (magic == std::string("HRMHARM\0", 8)) return ModelKind::harmony;
  if (magic == std::string("HRMENSB\0", 8)) return ModelKind::ensemble;
  return ModelKind::unknown;
}

}  // namespace harmony
