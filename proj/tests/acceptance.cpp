// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>

#include "harmony/harness.hpp"
#include "oracles.hpp"
#include "published.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::filesystem::path reference_config() {
  return std::filesystem::path(HARMONY_SOURCE_DIR) / "configs" / "reference.cfg";
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string set_string(const ClassSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

PerClassReport published_report(const std::array<double, 10>& acc) {
  return report_from_accuracies(std::span<const double>(acc));
}

// Shared by criteria 5, 7 and 10.
struct ReferenceRun {
  ReportDocument report;
  double seconds = 0.0;
};

const ReferenceRun& reference_run() {
  static const ReferenceRun run = [] {
    const auto start = Clock::now();
    ReferenceRun r;
    r.report = run_experiment(load_config(reference_config()));
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
  }();
  return run;
}

Outcome target_oracle() {
  const auto r = published_report(published::kTarget);
  const bool ok = std::abs(r.mean - published::kTargetMean) <= 1e-4 &&
                  std::abs(r.variance - published::kTargetVariance) <= 1e-5;
  return {ok, fmt("target row: mean %.6f (want 0.8820 +-1e-4), variance %.6f (want 0.00466 +-1e-5)", r.mean, r.variance)};
}

Outcome harmony_oracle() {
  const auto e = published_report(published::kHarmony);
  const auto a = published_report(published::kTarget);
  const double ratio = e.variance / a.variance;
  const bool ok = std::abs(e.mean - published::kHarmonyMean) <= 1e-4 &&
                  std::abs(e.variance - published::kHarmonyVariance) <= 1e-5 && ratio <= 0.33;
  return {ok, fmt("harmony row: mean %.6f, variance %.6f, var(e)/var(a) %.4f (want <= 0.33)", e.mean, e.variance, ratio)};
}

Outcome group_oracle() {
  const auto g = group_accuracy(published_report(published::kConductor), make_partition(10, {{2, 3, 5}}));
  const bool ok = g.weak.size() == 1 && std::abs(g.strong - published::kConductorStrong) <= 1e-3 &&
                  std::abs(g.weak[0] - published::kConductorWeak) <= 1e-3;
  return {ok, fmt("conductor row: strong %.4f (want 0.932), weak {2,3,5} %.4f (want 0.888)", g.strong,
                  g.weak.empty() ? NAN : g.weak[0])};
}

Outcome detection_oracle() {
  const auto weak = detect_weak_classes(published_report(published::kTarget), 0.04);
  return {weak == ClassSet{2, 3, 5}, "delta 0.04 on target row -> " + set_string(weak) + " (want {2,3,5})"};
}

Outcome desk_experiment() {
  const auto& run = reference_run();
  const auto* a = run.report.find("a");
  const auto* e = run.report.find("e");
  if (!a || !e) return {false, "rows a/e missing"};
  const auto& partition = run.report.runs.front().partition;
  std::vector<int> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return a->per_class_accuracy[x] < a->per_class_accuracy[y]; });
  ClassSet lowest(order.begin(), order.begin() + 3);
  std::sort(lowest.begin(), lowest.end());
  const double ratio = e->variance / a->variance;
  const bool ok = e->variance <= 0.6 * a->variance && e->mean >= a->mean - 0.01 && run.seconds < 60.0;
  std::string groups;
  for (const auto& g : partition.groups) groups += set_string(g);
  return {ok, fmt("reference run: var(e)/var(a) %.3f (want <= 0.6), mean(e) %.4f vs mean(a) %.4f, "
                  "groups %s, lowest-three target classes %s, %.2fs",
                  ratio, e->mean, a->mean, groups.c_str(), set_string(lowest).c_str(), run.seconds)};
}

Outcome cost_invariants() {
  Prng rng(606);
  const RealMatrix x = testing::random_matrix(1000, 6, rng);
  bool ok = true;
  std::string detail;
  for (int groups = 1; groups <= 3; ++groups) {
    // random 10-class model with `groups` singleton weak groups
    std::vector<ClassSet> g;
    for (int i = 0; i < groups; ++i) g.push_back({2 + i});
    const auto partition = make_partition(10, g);
    ClassifierSpec spec;
    spec.input_dim = 6;
    spec.hidden_dims = {5};
    spec.output_classes = 10;
    const auto make = [&](const ClassifierSpec& s) { return TrainedClassifier(s, init_layers(s, rng), {}); };
    std::vector<TrainedClassifier> comps;
    for (int i = 0; i < groups; ++i) comps.push_back(make(spec));
    const HarmonyModel model(make(spec), comps, make(respec_output(spec, 1 + groups)), partition, HarmonyConfig{});
    PassCounter counter;
    predict(model, x, &counter);
    const int declared = inference_cost(model).forward_passes_per_sample;
    ok = ok && declared == 2 && counter.conductor == 1000 && counter.expert_total() == 1000 &&
         counter.total() == declared * 1000;
    detail += fmt("|C|=%d: %d declared, %lld measured; ", groups, declared, static_cast<long long>(counter.total()));
  }
  BaggingEnsemble bag;
  for (int i = 0; i < 5; ++i) {
    ClassifierSpec spec;
    spec.input_dim = 6;
    spec.hidden_dims = {5};
    spec.output_classes = 10;
    bag.members.emplace_back(spec, init_layers(spec, rng), TrainingMetadata{});
  }
  PassCounter counter;
  predict_majority(bag, x, &counter);
  const int declared = inference_cost_baseline(EnsembleKind::bagging, 5).forward_passes_per_sample;
  ok = ok && declared == 5 && counter.total() == 5000;
  detail += fmt("bagging n=5: %d declared, %lld measured (1000 samples)", declared,
                static_cast<long long>(counter.total()));
  return {ok, detail};
}

Outcome routing_identity() {
  const ExperimentConfig config = load_config(reference_config());
  const Seed seed = repeat_seed(config, 0);
  const DatasetSplits data = prepare_data(config, seed);
  const HarmonyModel model =
      train_harmony(data.train, data.val, model_spec(config, data.train), harmony_config(config, seed));
  const auto dec = decompose_accuracy(model, data.test);
  const RealVector rebuilt = dec.reconstructed();
  bool ok = rebuilt == dec.measured;
  // the same numbers the experiment reported for row (e)
  const auto* e = reference_run().report.find("e");
  ok = ok && e && e->per_class_accuracy == dec.measured;
  std::int64_t routed = 0, correct = 0;
  for (Eigen::Index k = 0; k < dec.routed.rows(); ++k) {
    routed += dec.routed.row(k).sum();
    correct += dec.correct.row(k).sum();
    ok = ok && dec.routed.row(k).sum() == dec.class_totals[static_cast<std::size_t>(k)];
  }
  return {ok, fmt("sum_g c_kg / n_k equals measured accuracy for all %d classes (%lld routed, %lld correct, %d experts)",
                  static_cast<int>(rebuilt.size()), static_cast<long long>(routed), static_cast<long long>(correct),
                  model.num_experts())};
}

Outcome gradient_check() {
  ClassifierSpec spec;
  spec.input_dim = 4;
  spec.hidden_dims = {8};
  spec.output_classes = 3;
  Prng rng(808);
  auto layers = init_layers(spec, rng);
  for (auto& l : layers)
    for (Eigen::Index j = 0; j < l.bias.cols(); ++j) l.bias(j) = 0.1 * rng.normal();
  const RealMatrix x = testing::random_matrix(16, 4, rng);
  Labels y(16);
  for (auto& v : y) v = static_cast<ClassId>(rng.below(3));
  const RealVector w = RealVector::Ones(3);
  const auto analytic = loss_and_gradient(spec, layers, x, y, w);
  const double h = 1e-6;
  double worst = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    const auto l = static_cast<std::size_t>(rng.below(layers.size()));
    const bool bias = rng.below(4) == 0;
    const auto probe_at = [&](auto& p, const auto& g) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.rows())));
      const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.cols())));
      const double keep = p(i, j);
      p(i, j) = keep + h;
      const double up = loss_and_gradient(spec, layers, x, y, w).loss;
      p(i, j) = keep - h;
      const double down = loss_and_gradient(spec, layers, x, y, w).loss;
      p(i, j) = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(g(i, j)), 1e-8});
      worst = std::max(worst, std::abs(numeric - g(i, j)) / scale);
    };
    if (bias) probe_at(layers[l].bias, analytic.grads[l].bias);
    else probe_at(layers[l].weights, analytic.grads[l].weights);
  }
  return {worst < 1e-4, fmt("4-8-3 network, 20 probes, max relative error %.3g (want < 1e-4)", worst)};
}

Outcome brute_force() {
  constexpr int kInstances = 120;
  Prng rng(909);
  int vote_ok = 0, harmony_ok = 0, group_ok = 0;
  for (int t = 0; t < kInstances; ++t) {
    // bagging ensembles of random members
    const int k = 2 + static_cast<int>(rng.below(6));
    const int n = 1 + static_cast<int>(rng.below(6));
    BaggingEnsemble bag;
    ClassifierSpec spec;
    spec.input_dim = 3;
    spec.hidden_dims = {4};
    spec.output_classes = k;
    for (int i = 0; i < n; ++i) bag.members.emplace_back(spec, init_layers(spec, rng), TrainingMetadata{});
    const RealMatrix xs = testing::random_matrix(60, 3, rng);
    std::vector<Labels> votes;
    for (const auto& m : bag.members) votes.push_back(predict(m, xs));
    vote_ok += predict_majority(bag, xs) == oracle::vote_count(votes, k);

    const auto model = oracle::random_harmony(rng, 4);
    const RealMatrix hx = testing::random_matrix(80, 4, rng) * 2.0;
    harmony_ok += predict(model, hx) == oracle::harmony_loop(model, hx);

    const int kc = 3 + static_cast<int>(rng.below(8));
    CountMatrix counts(kc, kc);
    for (int i = 0; i < kc; ++i)
      for (int j = 0; j < kc; ++j)
        counts(i, j) = i == j ? 30 + static_cast<std::int64_t>(rng.below(60))
                              : (rng.uniform() < 0.5 ? 0 : static_cast<std::int64_t>(rng.below(12)));
    ClassSet classes(static_cast<std::size_t>(kc));
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(classes.begin(), classes.end());
    const ClassSet weak(classes.begin(), classes.begin() + 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(kc - 1))));
    const double threshold = rng.uniform(0.0, 0.2);
    group_ok += group_weak_classes(ConfusionMatrix(counts), weak, threshold).groups ==
                oracle::bfs_groups(counts, weak, threshold);
  }
  const bool ok = vote_ok == kInstances && harmony_ok == kInstances && group_ok == kInstances;
  return {ok, fmt("majority vote %d/%d, harmony predict %d/%d, weak grouping %d/%d", vote_ok, kInstances, harmony_ok,
                  kInstances, group_ok, kInstances)};
}

Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  const auto cfg = reference_config().string();
  const auto start = Clock::now();
  const int first = testing::run_cli("run --config " + cfg + " --out " + (dir / "first").string(), dir / "first.log");
  const int second = testing::run_cli("run --config " + cfg + " --out " + (dir / "second").string(), dir / "second.log");
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (first != 0 || second != 0) return {false, fmt("run exited with %d and %d", first, second)};
  const auto json1 = testing::read_text(dir / "first" / "report.json");
  const auto json2 = testing::read_text(dir / "second" / "report.json");
  const auto csv1 = testing::read_text(dir / "first" / "report.csv");
  const auto csv2 = testing::read_text(dir / "second" / "report.csv");
  const bool ok = !json1.empty() && !csv1.empty() && json1 == json2 && csv1 == csv2;
  return {ok, fmt("two CLI runs: JSON %zu bytes %s, CSV %zu bytes %s, %.2fs for both", json1.size(),
                  json1 == json2 ? "identical" : "DIFFER", csv1.size(), csv1 == csv2 ? "identical" : "DIFFER",
                  seconds)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"published target metrics", target_oracle},
      {"published harmony metrics", harmony_oracle},
      {"conductor group accuracies", group_oracle},
      {"weak-class detection", detection_oracle},
      {"desk-scale harmony experiment", desk_experiment},
      {"inference cost invariants", cost_invariants},
      {"routing identity", routing_identity},
      {"gradient check", gradient_check},
      {"brute-force equivalences", brute_force},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.pass;
    std::printf("[%s] %2zu %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
