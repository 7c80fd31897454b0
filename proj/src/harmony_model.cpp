#include "harmony/harmony_model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "harmony/error.hpp"

namespace harmony {

std::string to_string(BiasMode mode) { return mode == BiasMode::weights ? "weights" : "oversample"; }

BiasMode parse_bias_mode(std::string_view name) {
  if (name == "weights") return BiasMode::weights;
  if (name == "oversample") return BiasMode::oversample;
  throw UsageError("unknown bias_mode '" + std::string(name) + "' (expected weights or oversample)");
}

void HarmonyConfig::validate() const {
  if (!(detection_delta >= 0.0)) throw UsageError("harmony: detection delta must be >= 0");
  if (!(complementary_weight > 1.0)) throw UsageError("harmony: complementary weight must be > 1");
  if (!std::isfinite(coupling_threshold)) throw UsageError("harmony: coupling threshold must be finite");
  train.sgd.validate();
}

namespace {

bool same_train_config(const TrainConfig& a, const TrainConfig& b) {
  return a.sgd.learning_rate == b.sgd.learning_rate && a.sgd.momentum == b.sgd.momentum &&
         a.sgd.batch_size == b.sgd.batch_size && a.sgd.epochs == b.sgd.epochs &&
         a.sgd.shuffle_seed == b.sgd.shuffle_seed && a.seed == b.seed &&
         a.class_weights.size() == b.class_weights.size() && a.class_weights == b.class_weights;
}

bool same_config(const HarmonyConfig& a, const HarmonyConfig& b) {
  return a.detection_delta == b.detection_delta && a.coupling_threshold == b.coupling_threshold &&
         a.complementary_weight == b.complementary_weight && a.explicit_weak_classes == b.explicit_weak_classes &&
         a.bias_mode == b.bias_mode && a.seed == b.seed && same_train_config(a.train, b.train);
}

// Re-throws a sub-training failure with the stage prefixed, keeping its category.
template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const TrainingError& e) {
    throw TrainingError(stage + ": " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(stage + ": " + e.what());
  }
}

TrainConfig seeded(const HarmonyConfig& config, const std::string& key) {
  TrainConfig out = config.train;
  out.seed = derive_seed(config.seed, key + "/init");
  out.sgd.shuffle_seed = derive_seed(config.seed, key + "/shuffle");
  out.class_weights = RealVector();
  return out;
}

}  // namespace

HarmonyModel::HarmonyModel(TrainedClassifier target, std::vector<TrainedClassifier> complementaries,
                           std::optional<TrainedClassifier> conductor, WeakGroupPartition partition,
                           HarmonyConfig config)
    : target_(std::move(target)),
      complementaries_(std::move(complementaries)),
      conductor_(std::move(conductor)),
      partition_(std::move(partition)),
      config_(std::move(config)) {
  const int k = target_.output_classes();
  partition_.validate(k);
  if (partition_.groups.size() != complementaries_.size()) {
    throw DataError("harmony: " + std::to_string(partition_.groups.size()) + " weak groups but " +
                    std::to_string(complementaries_.size()) + " complementary models");
  }
  if (complementaries_.empty() != !conductor_.has_value()) {
    throw DataError("harmony: a conductor is required exactly when complementary models exist");
  }
  const auto& base = target_.spec();
  for (const auto& comp : complementaries_) {
    if (!(comp.spec() == base)) throw DataError("harmony: complementary model architecture differs from target");
  }
  if (conductor_) {
    if (!(conductor_->spec() == respec_output(base, num_experts()))) {
      throw DataError("harmony: conductor must share the target architecture with " + std::to_string(num_experts()) +
                      " outputs");
    }
  }
}

const TrainedClassifier& HarmonyModel::expert(int id) const {
  if (id == 0) return target_;
  if (id < 0 || id > static_cast<int>(complementaries_.size())) throw DataError("harmony: no expert " + std::to_string(id));
  return complementaries_[static_cast<std::size_t>(id - 1)];
}

bool operator==(const HarmonyModel& a, const HarmonyModel& b) {
  return a.target_ == b.target_ && a.complementaries_ == b.complementaries_ && a.conductor_ == b.conductor_ &&
         a.partition_ == b.partition_ && same_config(a.config_, b.config_);
}

std::int64_t PassCounter::expert_total() const { return std::accumulate(experts.begin(), experts.end(), std::int64_t{0}); }

Labels build_conductor_labels(std::span<const ClassId> labels, const WeakGroupPartition& partition) {
  const int k = partition.num_classes();
  const auto expert = partition.expert_of_class();
  Labels out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DataError("build_conductor_labels: class " + std::to_string(labels[i]) + " not covered by partition");
    }
    out[i] = expert[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

RealVector build_complementary_weights(const WeakGroupPartition& partition, std::size_t group_index, double lambda_c,
                                       int num_classes) {
  if (group_index >= partition.groups.size()) {
    throw DataError("build_complementary_weights: no weak group " + std::to_string(group_index));
  }
  if (!(lambda_c > 1.0)) throw UsageError("build_complementary_weights: lambda_c must be > 1");
  RealVector weights = RealVector::Ones(num_classes);
  for (ClassId c : partition.groups[group_index]) {
    if (c < 0 || c >= num_classes) throw DataError("build_complementary_weights: class out of range");
    weights[c] = lambda_c;
  }
  return weights;
}

WeakGroupPartition weak_partition(const TrainedClassifier& target, const Dataset& val, const HarmonyConfig& config) {
  const int k = target.output_classes();
  const ConfusionMatrix cm = confusion_matrix(predict(target, val.features()), val.labels(), k);
  ClassSet weak;
  if (config.explicit_weak_classes) {
    weak = *config.explicit_weak_classes;
    for (ClassId c : weak) {
      if (c < 0 || c >= k) throw UsageError("harmony: explicit weak class " + std::to_string(c) + " out of range");
    }
  } else {
    weak = detect_weak_classes(per_class_report(cm), config.detection_delta);
  }
  return group_weak_classes(cm, weak, config.coupling_threshold);
}

TrainConfig target_train_config(const HarmonyConfig& config) { return seeded(config, "target"); }

TrainConfig complementary_train_config(const HarmonyConfig& config, std::size_t group_index) {
  return seeded(config, "complementary/" + std::to_string(group_index + 1));
}

TrainConfig conductor_train_config(const HarmonyConfig& config) { return seeded(config, "conductor"); }

TrainedClassifier train_complementary(const Dataset& train_set, const ClassifierSpec& spec, const HarmonyConfig& config,
                                      const WeakGroupPartition& partition, std::size_t group_index) {
  TrainConfig tc = complementary_train_config(config, group_index);
  const int k = train_set.num_classes();
  if (config.bias_mode == BiasMode::weights) {
    tc.class_weights = build_complementary_weights(partition, group_index, config.complementary_weight, k);
    return train(train_set, spec, tc);
  }
  // Oversampling: every group sample appears ceil(lambda_c) times in total.
  if (group_index >= partition.groups.size()) throw DataError("train_complementary: no weak group " + std::to_string(group_index));
  const auto copies = static_cast<std::size_t>(std::ceil(config.complementary_weight));
  std::vector<bool> in_group(static_cast<std::size_t>(k), false);
  for (ClassId c : partition.groups[group_index]) in_group[static_cast<std::size_t>(c)] = true;
  std::vector<std::size_t> rows(train_set.num_samples());
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t copy = 1; copy < copies; ++copy) {
    for (std::size_t i = 0; i < train_set.num_samples(); ++i) {
      if (in_group[static_cast<std::size_t>(train_set.labels()[i])]) rows.push_back(i);
    }
  }
  return train(subset(train_set, rows), spec, tc);
}

TrainedClassifier train_conductor(const Dataset& train_set, const ClassifierSpec& spec, const HarmonyConfig& config,
                                  const WeakGroupPartition& partition) {
  const int experts = 1 + static_cast<int>(partition.groups.size());
  Dataset routed(train_set.features(), build_conductor_labels(train_set.labels(), partition), experts);
  return train(routed, respec_output(spec, experts), conductor_train_config(config));
}

HarmonyModel train_harmony(const Dataset& train_set, const Dataset& val, const ClassifierSpec& spec,
                           const HarmonyConfig& config) {
  config.validate();
  if (val.empty()) throw DataError("train_harmony: validation set is empty");
  if (val.num_classes() != train_set.num_classes()) throw DataError("train_harmony: train and validation class counts differ");

  TrainedClassifier target =
      staged("harmony/target", [&] { return train(train_set, spec, target_train_config(config)); });
  WeakGroupPartition partition = staged("harmony/detect", [&] { return weak_partition(target, val, config); });

  std::vector<TrainedClassifier> complementaries;
  for (std::size_t g = 0; g < partition.groups.size(); ++g) {
    complementaries.push_back(staged("harmony/complementary " + std::to_string(g + 1), [&] {
      return train_complementary(train_set, spec, config, partition, g);
    }));
  }
  std::optional<TrainedClassifier> conductor;
  if (!partition.groups.empty()) {
    conductor = staged("harmony/conductor", [&] { return train_conductor(train_set, spec, config, partition); });
  }
  HarmonyConfig snapshot = config;
  snapshot.train.class_weights = RealVector();
  return HarmonyModel(std::move(target), std::move(complementaries), std::move(conductor), std::move(partition),
                      std::move(snapshot));
}

Labels route(const HarmonyModel& model, const RealMatrix& features, PassCounter* counter) {
  if (features.cols() != model.target().spec().input_dim) {
    throw DimensionError("harmony: features have " + std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(model.target().spec().input_dim));
  }
  if (model.degenerate()) return Labels(static_cast<std::size_t>(features.rows()), 0);
  if (counter) counter->conductor += features.rows();
  return predict(*model.conductor(), features);
}

Labels predict(const HarmonyModel& model, const RealMatrix& features, PassCounter* counter) {
  const Labels experts = route(model, features, counter);
  if (counter) counter->experts.resize(static_cast<std::size_t>(model.num_experts()), 0);

  std::vector<std::vector<Eigen::Index>> routed(static_cast<std::size_t>(model.num_experts()));
  for (std::size_t i = 0; i < experts.size(); ++i) routed[static_cast<std::size_t>(experts[i])].push_back(static_cast<Eigen::Index>(i));

  Labels out(experts.size());
  for (int g = 0; g < model.num_experts(); ++g) {
    const auto& rows = routed[static_cast<std::size_t>(g)];
    if (rows.empty()) continue;
    const RealMatrix x = features(rows, Eigen::all);
    const Labels labels = predict(model.expert(g), x);
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<std::size_t>(rows[i])] = labels[i];
    if (counter) counter->experts[static_cast<std::size_t>(g)] += static_cast<std::int64_t>(rows.size());
  }
  return out;
}

CostModel inference_cost(const HarmonyModel& model) {
  if (model.degenerate()) return CostModel{1, {{"target", 1}}};
  return CostModel{2, {{"conductor", 1}, {"routed expert", 1}}};
}

double AccuracyDecomposition::expert_accuracy(ClassId k, int g) const {
  const auto n = routed(k, g);
  return n > 0 ? static_cast<double>(correct(k, g)) / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

RealVector AccuracyDecomposition::reconstructed() const {
  RealVector out(routed.rows());
  for (Eigen::Index k = 0; k < routed.rows(); ++k) {
    out[k] = static_cast<double>(correct.row(k).sum()) / static_cast<double>(class_totals[static_cast<std::size_t>(k)]);
  }
  return out;
}

RealVector AccuracyDecomposition::reconstructed_weighted() const {
  RealVector out = RealVector::Zero(routed.rows());
  for (Eigen::Index k = 0; k < routed.rows(); ++k) {
    const auto total = static_cast<double>(class_totals[static_cast<std::size_t>(k)]);
    for (Eigen::Index g = 0; g < routed.cols(); ++g) {
      if (routed(k, g) > 0) out[k] += (static_cast<double>(routed(k, g)) / total) * expert_accuracy(static_cast<ClassId>(k), static_cast<int>(g));
    }
  }
  return out;
}

AccuracyDecomposition decompose_accuracy(const HarmonyModel& model, const Dataset& test) {
  if (test.empty()) throw DataError("decompose_accuracy: empty test set");
  const int k = model.num_classes();
  const Labels experts = route(model, test.features());
  const Labels predicted = predict(model, test.features());

  AccuracyDecomposition out;
  out.routed = CountMatrix::Zero(k, model.num_experts());
  out.correct = CountMatrix::Zero(k, model.num_experts());
  for (std::size_t i = 0; i < test.num_samples(); ++i) {
    const ClassId y = test.labels()[i];
    ++out.routed(y, experts[i]);
    out.correct(y, experts[i]) += predicted[i] == y;
  }
  const PerClassReport report = per_class_report(confusion_matrix(predicted, test.labels(), k));
  out.class_totals = report.support;
  out.measured = report.per_class_accuracy;
  return out;
}

// ---------------------------------------------------------------------------
// Container file
//
//   magic "HRMHARM\0", u32 version, u32 num_classes
//   partition: ids strong, u32 group count, ids per group
//   config: f64 delta, f64 coupling, f64 lambda_c, u8 bias_mode, u8 has_explicit, ids explicit,
//           u64 seed, f64 lr, f64 momentum, u32 batch, u32 epochs, u64 shuffle_seed, u64 train seed
//   target classifier, u32 complementary count, complementary classifiers, u8 has_conductor, conductor

namespace {
constexpr std::string_view kHarmonyMagic{"HRMHARM\0", 8};
constexpr std::uint32_t kHarmonyVersion = 1;
}  // namespace

void save_harmony(const HarmonyModel& model, std::ostream& out) {
  using namespace binary;
  put_magic(out, kHarmonyMagic);
  put_u32(out, kHarmonyVersion);
  put_u32(out, static_cast<std::uint32_t>(model.num_classes()));
  put_ids(out, model.partition().strong);
  put_u32(out, static_cast<std::uint32_t>(model.partition().groups.size()));
  for (const auto& g : model.partition().groups) put_ids(out, g);

  const auto& c = model.config();
  put_f64(out, c.detection_delta);
  put_f64(out, c.coupling_threshold);
  put_f64(out, c.complementary_weight);
  put_u8(out, c.bias_mode == BiasMode::weights ? 0 : 1);
  put_u8(out, c.explicit_weak_classes ? 1 : 0);
  put_ids(out, c.explicit_weak_classes.value_or(ClassSet{}));
  put_u64(out, c.seed);
  put_f64(out, c.train.sgd.learning_rate);
  put_f64(out, c.train.sgd.momentum);
  put_u32(out, static_cast<std::uint32_t>(c.train.sgd.batch_size));
  put_u32(out, static_cast<std::uint32_t>(c.train.sgd.epochs));
  put_u64(out, c.train.sgd.shuffle_seed);
  put_u64(out, c.train.seed);

  save_classifier(model.target(), out);
  put_u32(out, static_cast<std::uint32_t>(model.complementaries().size()));
  for (const auto& comp : model.complementaries()) save_classifier(comp, out);
  put_u8(out, model.conductor() ? 1 : 0);
  if (model.conductor()) save_classifier(*model.conductor(), out);
  if (!out) throw DataError("harmony file: write failure");
}

HarmonyModel load_harmony(std::istream& in) {
  using namespace binary;
  expect_magic(in, kHarmonyMagic);
  const auto version = get_u32(in, "version");
  if (version != kHarmonyVersion) throw DataError("harmony file: unsupported version " + std::to_string(version));
  const auto k = static_cast<int>(get_u32(in, "num_classes"));

  WeakGroupPartition partition;
  partition.strong = get_ids(in, "strong classes");
  const auto ngroups = get_u32(in, "group count");
  if (ngroups > static_cast<std::uint32_t>(k)) throw DataError("harmony file: implausible group count");
  for (std::uint32_t g = 0; g < ngroups; ++g) partition.groups.push_back(get_ids(in, "weak group"));

  HarmonyConfig c;
  c.detection_delta = get_f64(in, "delta");
  c.coupling_threshold = get_f64(in, "coupling");
  c.complementary_weight = get_f64(in, "lambda_c");
  c.bias_mode = get_u8(in, "bias_mode") == 0 ? BiasMode::weights : BiasMode::oversample;
  const bool has_explicit = get_u8(in, "explicit flag") != 0;
  ClassSet explicit_weak = get_ids(in, "explicit weak classes");
  if (has_explicit) c.explicit_weak_classes = std::move(explicit_weak);
  c.seed = get_u64(in, "seed");
  c.train.sgd.learning_rate = get_f64(in, "learning_rate");
  c.train.sgd.momentum = get_f64(in, "momentum");
  c.train.sgd.batch_size = static_cast<int>(get_u32(in, "batch_size"));
  c.train.sgd.epochs = static_cast<int>(get_u32(in, "epochs"));
  c.train.sgd.shuffle_seed = get_u64(in, "shuffle_seed");
  c.train.seed = get_u64(in, "train seed");

  TrainedClassifier target = load_classifier(in);
  if (target.output_classes() != k) throw DataError("harmony file: target class count mismatch");
  const auto ncomp = get_u32(in, "complementary count");
  if (ncomp != ngroups) throw DataError("harmony file: complementary count does not match group count");
  std::vector<TrainedClassifier> complementaries;
  for (std::uint32_t g = 0; g < ncomp; ++g) complementaries.push_back(load_classifier(in));
  std::optional<TrainedClassifier> conductor;
  if (get_u8(in, "conductor flag")) conductor = load_classifier(in);
  return HarmonyModel(std::move(target), std::move(complementaries), std::move(conductor), std::move(partition), std::move(c));
}

void save_harmony(const HarmonyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  save_harmony(model, out);
}

HarmonyModel load_harmony(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_harmony(in);
}

}  // namespace harmony
