#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "harmony/types.hpp"

namespace harmony {

/// Dense features plus integer labels in [0, num_classes). Immutable once
/// constructed; the constructor enforces the shape and label invariants and
/// rejects non-finite features.
class Dataset {
 public:
  Dataset(RealMatrix features, Labels labels, int num_classes);

  const RealMatrix& features() const noexcept { return features_; }
  const Labels& labels() const noexcept { return labels_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t num_samples() const noexcept { return labels_.size(); }
  Eigen::Index num_dims() const noexcept { return features_.cols(); }
  bool empty() const noexcept { return labels_.empty(); }

  // Per-class sample counts, length num_classes.
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  RealMatrix features_;
  Labels labels_;
  int num_classes_;
};

/// Rows of `ds` at `indices`, in the given order (repeats allowed).
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// CSV

using LabelColumn = std::variant<std::size_t, std::string>;

/// Comma separated, optional header (detected by a non-numeric first row),
/// '\n' or '\r\n' line endings. num_classes = 1 + max label.
Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label_column);

/// Header `f0,...,f{d-1},label`, values with 17 significant digits so a
/// reload reproduces the dataset exactly.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IDX (MNIST layout)

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Pixels scaled by 1/255 and flattened row-major; num_classes = 1 + max label.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// ---------------------------------------------------------------------------
// Synthetic correlated clusters

struct SyntheticSpec {
  int num_classes = 10;
  int n_dims = 16;
  int samples_per_class = 500;
  // Disjoint class sets whose centers sit close together.
  std::vector<ClassSet> overlap_groups;
  double separation = 6.0;
  double overlap_separation = 1.0;
  double noise_sigma = 1.0;
  Seed seed = 0;

  void validate() const;
};

/// Class centers for `spec`. Every non-overlapping class and every overlap
/// group gets one anchor; anchors are placed along random orthonormal
/// directions (or by rejection sampling when there are more anchors than
/// dimensions) at pairwise distance >= separation + overlap_separation.
/// Members of an overlap group sit on a regular simplex of circumradius
/// overlap_separation / 2 around the group anchor, which is also the
/// group centroid. Consequently group members are within
/// overlap_separation of their centroid and of each other, and every pair
/// of centers not sharing a group is at least `separation` apart.
RealMatrix synthetic_centers(const SyntheticSpec& spec);

/// samples_per_class isotropic Gaussian draws around each center, grouped
/// by class in ascending order. Deterministic given spec.seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  Seed seed = 0;

  void validate() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Per-class sizes by the largest-remainder rule.
/// Remainder ties go to the earlier split (train, then val, then test).
std::vector<std::size_t> largest_remainder_sizes(std::size_t n, std::span<const double> fractions);

/// Stratified three-way partition. Each class is shuffled with its own
/// substream, then cut by largest_remainder_sizes. Output rows keep the
/// original relative order.
DatasetSplits stratified_split(const Dataset& ds, const SplitSpec& spec);

}  // namespace harmony
