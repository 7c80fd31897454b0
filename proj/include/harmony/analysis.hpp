#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "harmony/types.hpp"

namespace harmony {

using CountMatrix = Matrix<std::int64_t>;

/// K x K counts, rows are true classes and columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(CountMatrix counts);

  const CountMatrix& counts() const noexcept { return counts_; }
  int num_classes() const noexcept { return static_cast<int>(counts_.rows()); }
  std::int64_t row_sum(ClassId k) const { return counts_.row(k).sum(); }
  std::int64_t total() const { return counts_.sum(); }
  // (c[i][j] / rowsum_i + c[j][i] / rowsum_j) / 2; an empty row contributes 0.
  double symmetric_confusion(ClassId i, ClassId j) const;

 private:
  CountMatrix counts_;
};

ConfusionMatrix confusion_matrix(std::span<const ClassId> predicted, std::span<const ClassId> truth, int num_classes);

/// Per-class accuracy with its mean and population variance (divide by K).
struct PerClassReport {
  RealVector per_class_accuracy;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<std::int64_t> support;

  int num_classes() const noexcept { return static_cast<int>(per_class_accuracy.size()); }
};

PerClassReport per_class_report(const ConfusionMatrix& cm);

/// Report from an accuracy vector directly (e.g. published numbers). Equal
/// support is assumed when `support` is empty.
PerClassReport report_from_accuracies(std::span<const double> accuracies, std::span<const std::int64_t> support = {});

double population_variance(const RealVector& values);

/// {k : acc_k < mean - delta}, ascending. Throws when every class qualifies.
ClassSet detect_weak_classes(const PerClassReport& report, double delta);

/// Strong classes plus ordered, disjoint weak groups; together they cover
/// [0, K). Groups are ordered by their smallest member.
struct WeakGroupPartition {
  ClassSet strong;
  std::vector<ClassSet> groups;

  int num_classes() const;
  ClassSet weak() const;
  bool degenerate() const noexcept { return groups.empty(); }
  // 0 for strong classes, g (1-based) for members of groups[g-1].
  std::vector<int> expert_of_class() const;
  void validate(int num_classes) const;

  friend bool operator==(const WeakGroupPartition&, const WeakGroupPartition&) = default;
};

/// Partition with the given groups (each sorted, ordered by smallest member)
/// and every other class strong.
WeakGroupPartition make_partition(int num_classes, std::vector<ClassSet> groups);

/// Connected components of the weak classes under edges whose symmetric
/// confusion rate reaches `coupling_threshold`.
WeakGroupPartition group_weak_classes(const ConfusionMatrix& cm, const ClassSet& weak, double coupling_threshold);

struct GroupAccuracy {
  double strong = 0.0;
  std::vector<double> weak;
};

/// Support-weighted mean accuracy over the strong set and over each group.
/// An empty set yields NaN.
GroupAccuracy group_accuracy(const PerClassReport& report, const WeakGroupPartition& partition);

/// Disjoint sets with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace harmony
