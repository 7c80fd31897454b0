#pragma once

// Slow, obviously-correct reimplementations used to cross-check the library.

#include <algorithm>
#include <queue>
#include <vector>

#include "harmony/analysis.hpp"
#include "harmony/baselines.hpp"
#include "harmony/harmony_model.hpp"

namespace oracle {

using namespace harmony;

/// Connected components of `weak` by breadth-first search over pairs whose
/// symmetric confusion rate reaches the threshold, computed from raw counts.
inline std::vector<ClassSet> bfs_groups(const CountMatrix& counts, ClassSet weak, double threshold) {
  std::sort(weak.begin(), weak.end());
  const auto rate = [&](int i, int j) {
    const double ri = static_cast<double>(counts.row(i).sum());
    const double rj = static_cast<double>(counts.row(j).sum());
    const double a = ri > 0 ? static_cast<double>(counts(i, j)) / ri : 0.0;
    const double b = rj > 0 ? static_cast<double>(counts(j, i)) / rj : 0.0;
    return (a + b) / 2.0;
  };
  std::vector<bool> seen(weak.size(), false);
  std::vector<ClassSet> groups;
  for (std::size_t s = 0; s < weak.size(); ++s) {
    if (seen[s]) continue;
    ClassSet group;
    std::queue<std::size_t> frontier;
    frontier.push(s);
    seen[s] = true;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      group.push_back(weak[u]);
      for (std::size_t v = 0; v < weak.size(); ++v) {
        if (!seen[v] && rate(weak[u], weak[v]) >= threshold) {
          seen[v] = true;
          frontier.push(v);
        }
      }
    }
    std::sort(group.begin(), group.end());
    groups.push_back(group);
  }
  std::sort(groups.begin(), groups.end(), [](auto& a, auto& b) { return a.front() < b.front(); });
  return groups;
}

/// Per row: count each member's vote, the largest count wins, lowest class on ties.
inline Labels vote_count(const std::vector<Labels>& votes, int num_classes) {
  Labels out(votes.front().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    int best = 0, best_count = -1;
    for (int c = 0; c < num_classes; ++c) {
      int count = 0;
      for (const auto& member : votes) count += member[i] == c;
      if (count > best_count) {
        best = c;
        best_count = count;
      }
    }
    out[i] = best;
  }
  return out;
}

/// One sample at a time: conductor, then the chosen expert, no batching.
inline Labels harmony_loop(const HarmonyModel& model, const RealMatrix& x) {
  Labels out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RealMatrix row = x.row(i);
    int expert = 0;
    if (!model.degenerate()) expert = predict(*model.conductor(), row)[0];
    out[static_cast<std::size_t>(i)] = predict(model.expert(expert), row)[0];
  }
  return out;
}

/// Random untrained Harmony model: K in [3, 7], 1-3 weak groups, small MLPs.
inline HarmonyModel random_harmony(Prng& rng, int input_dim) {
  const int k = 3 + static_cast<int>(rng.below(5));
  ClassSet order(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
  rng.shuffle(order.begin(), order.end());
  const int weak = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(k - 1, 4))));
  const int num_groups = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(weak, 3))));
  std::vector<ClassSet> groups(static_cast<std::size_t>(num_groups));
  for (int i = 0; i < weak; ++i) groups[static_cast<std::size_t>(i % num_groups)].push_back(order[static_cast<std::size_t>(i)]);
  const auto partition = make_partition(k, groups);

  ClassifierSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dims = {3 + static_cast<int>(rng.below(4))};
  spec.output_classes = k;
  const auto make = [&](const ClassifierSpec& s) {
    auto layers = init_layers(s, rng);
    for (auto& l : layers) {
      for (Eigen::Index j = 0; j < l.bias.cols(); ++j) l.bias(j) = rng.normal() * 0.5;
    }
    return TrainedClassifier(s, layers, {});
  };
  std::vector<TrainedClassifier> comps;
  for (std::size_t g = 0; g < partition.groups.size(); ++g) comps.push_back(make(spec));
  auto conductor = make(respec_output(spec, 1 + static_cast<int>(comps.size())));
  return HarmonyModel(make(spec), std::move(comps), std::move(conductor), partition, HarmonyConfig{});
}

}  // namespace oracle
