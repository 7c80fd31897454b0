#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmony/baselines.hpp"
#include "harmony/classifier.hpp"
#include "harmony/data.hpp"
#include "harmony/harmony_model.hpp"

namespace harmony {

enum class DataSource { synthetic, csv, idx };

/// Everything one experiment needs. Parsed from a flat `key = value` file;
/// see configs/README.md for the key list.
struct ExperimentConfig {
  DataSource source = DataSource::synthetic;
  std::filesystem::path csv_path;
  LabelColumn label_column = std::string("label");
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;

  SyntheticSpec synthetic;
  // Unset seeds are derived from the run seed.
  std::optional<Seed> synthetic_seed;
  SplitSpec split;
  std::optional<Seed> split_seed;

  // input_dim and output_classes are filled from the dataset.
  ClassifierSpec classifier;
  SgdConfig sgd;

  double detection_delta = 0.04;
  double coupling_threshold = 0.05;
  double complementary_weight = 4.0;
  std::optional<ClassSet> explicit_weak_classes;
  BiasMode bias_mode = BiasMode::weights;

  double weighted_lambda = 2.0;
  std::vector<int> bagging_sizes{2, 5};
  WeakeningPolicy weakening;

  Seed master_seed = 0;
  int repeats = 1;
  std::filesystem::path out_dir = "out";

  void validate() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical key/value rendering of every setting (defaults included).
std::map<std::string, std::string> config_echo(const ExperimentConfig& config);

}  // namespace harmony
