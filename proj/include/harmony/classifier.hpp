#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "harmony/data.hpp"
#include "harmony/numerics.hpp"
#include "harmony/types.hpp"

namespace harmony {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Architecture shared by the target, complementary, and conductor models.
/// An empty hidden_dims gives softmax regression.
struct ClassifierSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims{64};
  int output_classes = 2;
  Activation activation = Activation::relu;

  void validate() const;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// Same architecture with a different output width.
ClassifierSpec respec_output(const ClassifierSpec& spec, int k);

struct TrainConfig {
  SgdConfig sgd;
  // Empty means all ones.
  RealVector class_weights;
  // Parameter initialization seed; shuffling uses sgd.shuffle_seed.
  Seed seed = 0;
};

struct Layer {
  RealMatrix weights;  // fan_in x fan_out
  RealRowVector bias;  // 1 x fan_out

  friend bool operator==(const Layer& a, const Layer& b) { return a.weights == b.weights && a.bias == b.bias; }
};

struct TrainingMetadata {
  double final_loss = 0.0;
  int epochs_run = 0;
  Seed seed = 0;
  Seed shuffle_seed = 0;
  std::vector<double> class_weights;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

class TrainedClassifier {
 public:
  TrainedClassifier(ClassifierSpec spec, std::vector<Layer> layers, TrainingMetadata metadata);

  const ClassifierSpec& spec() const noexcept { return spec_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const TrainingMetadata& metadata() const noexcept { return metadata_; }
  int output_classes() const noexcept { return spec_.output_classes; }

  friend bool operator==(const TrainedClassifier& a, const TrainedClassifier& b) {
    return a.spec_ == b.spec_ && a.layers_ == b.layers_ && a.metadata_ == b.metadata_;
  }

 private:
  ClassifierSpec spec_;
  std::vector<Layer> layers_;
  TrainingMetadata metadata_;
};

/// Xavier weights, zero biases.
std::vector<Layer> init_layers(const ClassifierSpec& spec, Prng& rng);

/// Mean weighted cross-entropy of the network on (features, labels) and its
/// gradient with respect to every layer parameter.
struct NetworkGradient {
  double loss = 0.0;
  std::vector<Layer> grads;
};
NetworkGradient loss_and_gradient(const ClassifierSpec& spec, const std::vector<Layer>& layers,
                                  const RealMatrix& features, std::span<const ClassId> labels,
                                  const RealVector& class_weights);

RealMatrix forward_proba(const ClassifierSpec& spec, const std::vector<Layer>& layers, const RealMatrix& features);

/// Mini-batch momentum SGD on weighted cross-entropy for a fixed number of
/// epochs. Deterministic given (train, spec, config).
TrainedClassifier train(const Dataset& train, const ClassifierSpec& spec, const TrainConfig& config);

RealMatrix predict_proba(const TrainedClassifier& model, const RealMatrix& features);
Labels predict(const TrainedClassifier& model, const RealMatrix& features);

/// Fraction of rows predicted correctly.
double accuracy(const Labels& predicted, const Labels& truth);

// Self-describing binary model file, little-endian.
void save_classifier(const TrainedClassifier& model, std::ostream& out);
TrainedClassifier load_classifier(std::istream& in);
void save_classifier(const TrainedClassifier& model, const std::filesystem::path& path);
TrainedClassifier load_classifier(const std::filesystem::path& path);

}  // namespace harmony
