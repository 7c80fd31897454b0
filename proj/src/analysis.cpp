#include "harmony/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "harmony/error.hpp"

namespace harmony {

ConfusionMatrix::ConfusionMatrix(CountMatrix counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw DimensionError("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw DataError("confusion matrix counts must be non-negative");
}

double ConfusionMatrix::symmetric_confusion(ClassId i, ClassId j) const {
  const auto rate = [this](ClassId a, ClassId b) {
    const auto total = row_sum(a);
    return total > 0 ? static_cast<double>(counts_(a, b)) / static_cast<double>(total) : 0.0;
  };
  return (rate(i, j) + rate(j, i)) / 2.0;
}

ConfusionMatrix confusion_matrix(std::span<const ClassId> predicted, std::span<const ClassId> truth, int num_classes) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("confusion_matrix: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  if (num_classes < 1) throw DataError("confusion_matrix: num_classes must be positive");
  CountMatrix counts = CountMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const ClassId t = truth[i];
    const ClassId p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("confusion_matrix: label out of range at sample " + std::to_string(i));
    }
    ++counts(t, p);
  }
  return ConfusionMatrix(std::move(counts));
}

double population_variance(const RealVector& values) {
  if (values.size() == 0) return 0.0;
  const double mean = values.mean();
  return (values.array() - mean).square().sum() / static_cast<double>(values.size());
}

PerClassReport per_class_report(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  PerClassReport report;
  report.per_class_accuracy.resize(k);
  report.support.resize(static_cast<std::size_t>(k));
  for (ClassId c = 0; c < k; ++c) {
    const auto total = cm.row_sum(c);
    if (total == 0) throw DataError("per_class_report: class " + std::to_string(c) + " has no test samples");
    report.support[static_cast<std::size_t>(c)] = total;
    report.per_class_accuracy[c] = static_cast<double>(cm.counts()(c, c)) / static_cast<double>(total);
  }
  report.mean = report.per_class_accuracy.mean();
  report.variance = population_variance(report.per_class_accuracy);
  return report;
}

PerClassReport report_from_accuracies(std::span<const double> accuracies, std::span<const std::int64_t> support) {
  if (accuracies.empty()) throw DataError("report_from_accuracies: empty accuracy vector");
  if (!support.empty() && support.size() != accuracies.size()) throw DimensionError("report_from_accuracies: support length mismatch");
  PerClassReport report;
  report.per_class_accuracy = Eigen::Map<const RealVector>(accuracies.data(), static_cast<Eigen::Index>(accuracies.size()));
  if ((report.per_class_accuracy.array() < 0.0).any() || (report.per_class_accuracy.array() > 1.0).any()) {
    throw DataError("report_from_accuracies: accuracies must lie in [0, 1]");
  }
  if (support.empty()) {
    report.support.assign(accuracies.size(), 1);
  } else {
    report.support.assign(support.begin(), support.end());
  }
  report.mean = report.per_class_accuracy.mean();
  report.variance = population_variance(report.per_class_accuracy);
  return report;
}

ClassSet detect_weak_classes(const PerClassReport& report, double delta) {
  if (!(delta >= 0.0)) throw UsageError("detect_weak_classes: delta must be >= 0");
  ClassSet weak;
  for (ClassId k = 0; k < report.num_classes(); ++k) {
    if (report.per_class_accuracy[k] < report.mean - delta) weak.push_back(k);
  }
  if (!weak.empty() && static_cast<int>(weak.size()) == report.num_classes()) {
    throw DataError("detect_weak_classes: every class is weak, no strong class left");
  }
  return weak;
}

int WeakGroupPartition::num_classes() const {
  std::size_t n = strong.size();
  for (const auto& g : groups) n += g.size();
  return static_cast<int>(n);
}

ClassSet WeakGroupPartition::weak() const {
  ClassSet out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> WeakGroupPartition::expert_of_class() const {
  std::vector<int> expert(static_cast<std::size_t>(num_classes()), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (ClassId c : groups[g]) {
      if (c < 0 || c >= num_classes()) throw DataError("partition: class " + std::to_string(c) + " out of range");
      expert[static_cast<std::size_t>(c)] = static_cast<int>(g + 1);
    }
  }
  return expert;
}

void WeakGroupPartition::validate(int k) const {
  std::vector<int> seen(static_cast<std::size_t>(k), 0);
  const auto mark = [&](ClassId c) {
    if (c < 0 || c >= k) throw DataError("partition: class " + std::to_string(c) + " outside [0, " + std::to_string(k) + ")");
    if (seen[static_cast<std::size_t>(c)]++) throw DataError("partition: class " + std::to_string(c) + " listed twice");
  };
  for (ClassId c : strong) mark(c);
  for (const auto& g : groups) {
    if (g.empty()) throw DataError("partition: empty weak group");
    for (ClassId c : g) mark(c);
  }
  for (int c = 0; c < k; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) throw DataError("partition: class " + std::to_string(c) + " not covered");
  }
  if (strong.empty()) throw DataError("partition: no strong classes");
}

WeakGroupPartition make_partition(int num_classes, std::vector<ClassSet> groups) {
  std::vector<bool> weak(static_cast<std::size_t>(num_classes), false);
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
    for (ClassId c : g) {
      if (c < 0 || c >= num_classes) throw DataError("partition: class " + std::to_string(c) + " out of range");
      weak[static_cast<std::size_t>(c)] = true;
    }
  }
  std::sort(groups.begin(), groups.end(), [](const ClassSet& a, const ClassSet& b) { return a.front() < b.front(); });
  WeakGroupPartition partition;
  for (ClassId c = 0; c < num_classes; ++c) {
    if (!weak[static_cast<std::size_t>(c)]) partition.strong.push_back(c);
  }
  partition.groups = std::move(groups);
  partition.validate(num_classes);
  return partition;
}

WeakGroupPartition group_weak_classes(const ConfusionMatrix& cm, const ClassSet& weak, double coupling_threshold) {
  const int k = cm.num_classes();
  ClassSet members = weak;
  std::sort(members.begin(), members.end());
  if (std::adjacent_find(members.begin(), members.end()) != members.end()) throw DataError("group_weak_classes: duplicate class");
  if (static_cast<int>(members.size()) >= k && k > 0) throw DataError("group_weak_classes: weak set covers every class");

  UnionFind sets(members.size());
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      if (cm.symmetric_confusion(members[a], members[b]) >= coupling_threshold) sets.unite(a, b);
    }
  }
  std::map<std::size_t, ClassSet> components;
  for (std::size_t a = 0; a < members.size(); ++a) components[sets.find(a)].push_back(members[a]);

  std::vector<ClassSet> groups;
  for (auto& [root, group] : components) groups.push_back(std::move(group));
  return make_partition(k, std::move(groups));
}

GroupAccuracy group_accuracy(const PerClassReport& report, const WeakGroupPartition& partition) {
  const auto weighted = [&](const ClassSet& set) {
    double correct = 0.0;
    double total = 0.0;
    for (ClassId c : set) {
      if (c < 0 || c >= report.num_classes()) throw DataError("group_accuracy: class out of range");
      const auto s = static_cast<double>(report.support[static_cast<std::size_t>(c)]);
      correct += s * report.per_class_accuracy[c];
      total += s;
    }
    return total > 0.0 ? correct / total : std::numeric_limits<double>::quiet_NaN();
  };
  GroupAccuracy out;
  out.strong = weighted(partition.strong);
  for (const auto& g : partition.groups) out.weak.push_back(weighted(g));
  return out;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

std::size_t UnionFind::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

}  // namespace harmony
