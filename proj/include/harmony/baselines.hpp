#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "harmony/classifier.hpp"
#include "harmony/harmony_model.hpp"

namespace harmony {

/// How a "weak" bagging member is derived from the base training setup.
struct WeakeningPolicy {
  double epoch_fraction = 0.5;
  double bootstrap_fraction = 0.8;
  double hidden_fraction = 1.0;

  void validate() const;
  // max(1, round(fraction * value))
  int weakened_epochs(int epochs) const;
  ClassifierSpec weakened_spec(const ClassifierSpec& spec) const;
};

struct BaggingEnsemble {
  std::vector<TrainedClassifier> members;
  WeakeningPolicy policy;

  void validate() const;
};

/// Two classifiers with the same architecture, combined by averaging their
/// probabilities.
class AveragingEnsemble {
 public:
  AveragingEnsemble(TrainedClassifier first, TrainedClassifier second);

  const TrainedClassifier& first() const noexcept { return first_; }
  const TrainedClassifier& second() const noexcept { return second_; }

 private:
  TrainedClassifier first_;
  TrainedClassifier second_;
};

/// lambda on `weak`, 1 elsewhere.
RealVector weak_class_weights(int num_classes, const ClassSet& weak, double lambda);

TrainedClassifier train_weighted_target(const Dataset& train, const ClassifierSpec& spec, const TrainConfig& base,
                                        double lambda_b, const ClassSet& weak);

/// Member i (1-based) draws ceil(bootstrap_fraction * N) rows with
/// replacement from substream "bootstrap/i" of `seed` and trains a weakened
/// copy of the base setup with its own init and shuffle substreams.
BaggingEnsemble train_bagging(const Dataset& train, const ClassifierSpec& spec, const TrainConfig& base, int n,
                              const WeakeningPolicy& policy, Seed seed);

/// Plurality vote per row; ties go to the lowest tied class.
Labels majority_vote(const std::vector<Labels>& votes, int num_classes);

Labels predict_majority(const BaggingEnsemble& ensemble, const RealMatrix& features, PassCounter* counter = nullptr);

/// Second target trained like the first but seeded from `seed`.
AveragingEnsemble train_averaging(const Dataset& train, const ClassifierSpec& spec, const TrainConfig& first_config,
                                  Seed seed);

Labels predict_average(const AveragingEnsemble& ensemble, const RealMatrix& features, PassCounter* counter = nullptr);

enum class EnsembleKind { single, bagging, averaging };

CostModel inference_cost_baseline(EnsembleKind kind, int n);

// Ensemble container: magic, version, kind, policy, member classifiers.
void save_bagging(const BaggingEnsemble& ensemble, const std::filesystem::path& path);
BaggingEnsemble load_bagging(const std::filesystem::path& path);
void save_averaging(const AveragingEnsemble& ensemble, const std::filesystem::path& path);
AveragingEnsemble load_averaging(const std::filesystem::path& path);

}  // namespace harmony
