#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "harmony/analysis.hpp"
#include "harmony/classifier.hpp"
#include "harmony/data.hpp"

namespace harmony {

enum class BiasMode { weights, oversample };

std::string to_string(BiasMode mode);
BiasMode parse_bias_mode(std::string_view name);

struct HarmonyConfig {
  double detection_delta = 0.04;
  double coupling_threshold = 0.05;
  // Loss weight on a complementary model's own weak group; must exceed 1.
  double complementary_weight = 4.0;
  // Replaces detection when set; grouping still runs on the given classes.
  std::optional<ClassSet> explicit_weak_classes;
  BiasMode bias_mode = BiasMode::weights;
  // Shared by every sub-model. Its seeds are replaced per sub-model by
  // substreams of `seed`.
  TrainConfig train;
  Seed seed = 0;

  void validate() const;
};

/// Target plus one complementary model per weak group and a (1 + |C|)-way
/// conductor. With no weak groups the model is a pass-through to the target
/// and has no conductor.
class HarmonyModel {
 public:
  HarmonyModel(TrainedClassifier target, std::vector<TrainedClassifier> complementaries,
               std::optional<TrainedClassifier> conductor, WeakGroupPartition partition, HarmonyConfig config);

  const TrainedClassifier& target() const noexcept { return target_; }
  const std::vector<TrainedClassifier>& complementaries() const noexcept { return complementaries_; }
  const std::optional<TrainedClassifier>& conductor() const noexcept { return conductor_; }
  const WeakGroupPartition& partition() const noexcept { return partition_; }
  const HarmonyConfig& config() const noexcept { return config_; }
  bool degenerate() const noexcept { return complementaries_.empty(); }
  int num_classes() const noexcept { return target_.output_classes(); }
  int num_experts() const noexcept { return 1 + static_cast<int>(complementaries_.size()); }
  // 0 is the target, g >= 1 is complementary g.
  const TrainedClassifier& expert(int id) const;

  friend bool operator==(const HarmonyModel&, const HarmonyModel&);

 private:
  TrainedClassifier target_;
  std::vector<TrainedClassifier> complementaries_;
  std::optional<TrainedClassifier> conductor_;
  WeakGroupPartition partition_;
  HarmonyConfig config_;
};

/// Forward passes per sample, in units of one network evaluation.
struct CostModel {
  int forward_passes_per_sample = 0;
  std::vector<std::pair<std::string, int>> per_model;
};

/// Rows pushed through each sub-model during inference.
struct PassCounter {
  std::int64_t conductor = 0;
  std::vector<std::int64_t> experts;

  std::int64_t expert_total() const;
  std::int64_t total() const { return conductor + expert_total(); }
};

/// Strong classes map to 0, members of group g (1-based) map to g.
Labels build_conductor_labels(std::span<const ClassId> labels, const WeakGroupPartition& partition);

/// lambda_c on the classes of groups[group_index], 1 elsewhere.
RealVector build_complementary_weights(const WeakGroupPartition& partition, std::size_t group_index, double lambda_c,
                                       int num_classes);

/// Weak-class partition for `target` on `val`: the explicit list when
/// configured, otherwise detect_weak_classes; grouped by confusion.
WeakGroupPartition weak_partition(const TrainedClassifier& target, const Dataset& val, const HarmonyConfig& config);

/// Train seeds for each sub-model, derived from config.seed.
TrainConfig target_train_config(const HarmonyConfig& config);
TrainConfig complementary_train_config(const HarmonyConfig& config, std::size_t group_index);
TrainConfig conductor_train_config(const HarmonyConfig& config);

TrainedClassifier train_complementary(const Dataset& train, const ClassifierSpec& spec, const HarmonyConfig& config,
                                      const WeakGroupPartition& partition, std::size_t group_index);
TrainedClassifier train_conductor(const Dataset& train, const ClassifierSpec& spec, const HarmonyConfig& config,
                                  const WeakGroupPartition& partition);

/// Target, then weak-class detection on `val`, then one complementary model
/// per group and the conductor, all on `train`.
HarmonyModel train_harmony(const Dataset& train, const Dataset& val, const ClassifierSpec& spec,
                           const HarmonyConfig& config);

/// Expert id per row: conductor argmax, or all zeros for a degenerate model.
Labels route(const HarmonyModel& model, const RealMatrix& features, PassCounter* counter = nullptr);

/// Each row is classified by the expert it is routed to; every expert runs
/// once over its routed subset only.
Labels predict(const HarmonyModel& model, const RealMatrix& features, PassCounter* counter = nullptr);

CostModel inference_cost(const HarmonyModel& model);

/// Per class k and expert g: samples routed (n_kg) and correct among them (c_kg).
struct AccuracyDecomposition {
  CountMatrix routed;
  CountMatrix correct;
  std::vector<std::int64_t> class_totals;
  RealVector measured;  // harmony per-class accuracy from the confusion matrix

  // c_kg / n_kg, NaN where nothing was routed.
  double expert_accuracy(ClassId k, int g) const;
  // sum_g c_kg / n_k
  RealVector reconstructed() const;
  // sum_g (n_kg / n_k) * a_kg, the weighted form of the same identity.
  RealVector reconstructed_weighted() const;
};

AccuracyDecomposition decompose_accuracy(const HarmonyModel& model, const Dataset& test);

void save_harmony(const HarmonyModel& model, std::ostream& out);
HarmonyModel load_harmony(std::istream& in);
void save_harmony(const HarmonyModel& model, const std::filesystem::path& path);
HarmonyModel load_harmony(const std::filesystem::path& path);

}  // namespace harmony
