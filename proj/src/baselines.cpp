#include "harmony/baselines.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "harmony/error.hpp"

namespace harmony {

void WeakeningPolicy::validate() const {
  for (double f : {epoch_fraction, bootstrap_fraction, hidden_fraction}) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("weakening policy: fractions must lie in (0, 1]");
  }
}

int WeakeningPolicy::weakened_epochs(int epochs) const {
  return std::max(1, static_cast<int>(std::lround(epoch_fraction * epochs)));
}

ClassifierSpec WeakeningPolicy::weakened_spec(const ClassifierSpec& spec) const {
  ClassifierSpec out = spec;
  for (int& h : out.hidden_dims) h = std::max(1, static_cast<int>(std::lround(hidden_fraction * h)));
  return out;
}

void BaggingEnsemble::validate() const {
  if (members.empty()) throw DataError("bagging: ensemble has no members");
  for (const auto& m : members) {
    if (m.output_classes() != members.front().output_classes()) throw DataError("bagging: members disagree on class count");
    if (m.spec().input_dim != members.front().spec().input_dim) throw DataError("bagging: members disagree on input width");
  }
}

AveragingEnsemble::AveragingEnsemble(TrainedClassifier first, TrainedClassifier second)
    : first_(std::move(first)), second_(std::move(second)) {
  if (!(first_.spec() == second_.spec())) throw DataError("averaging ensemble: members must share one architecture");
}

RealVector weak_class_weights(int num_classes, const ClassSet& weak, double lambda) {
  RealVector weights = RealVector::Ones(num_classes);
  for (ClassId c : weak) {
    if (c < 0 || c >= num_classes) throw DataError("weak class " + std::to_string(c) + " out of range");
    weights[c] = lambda;
  }
  return weights;
}

TrainedClassifier train_weighted_target(const Dataset& train_set, const ClassifierSpec& spec, const TrainConfig& base,
                                        double lambda_b, const ClassSet& weak) {
  if (weak.empty()) throw UsageError("weighted target: weak class set is empty");
  if (static_cast<int>(weak.size()) >= train_set.num_classes()) throw UsageError("weighted target: every class is weak");
  if (!(lambda_b > 1.0)) throw UsageError("weighted target: lambda_b must be > 1");
  TrainConfig config = base;
  config.class_weights = weak_class_weights(train_set.num_classes(), weak, lambda_b);
  return train(train_set, spec, config);
}

BaggingEnsemble train_bagging(const Dataset& train_set, const ClassifierSpec& spec, const TrainConfig& base, int n,
                              const WeakeningPolicy& policy, Seed seed) {
  if (n < 1) throw UsageError("bagging: n must be >= 1");
  policy.validate();
  if (train_set.empty()) throw DataError("bagging: empty training set");
  const Prng root(seed);
  const std::size_t rows = train_set.num_samples();
  const auto draws = static_cast<std::size_t>(std::ceil(policy.bootstrap_fraction * static_cast<double>(rows)));

  BaggingEnsemble ensemble{{}, policy};
  const ClassifierSpec member_spec = policy.weakened_spec(spec);
  for (int i = 1; i <= n; ++i) {
    const std::string id = std::to_string(i);
    Prng rng = root.substream("bootstrap/" + id);
    std::vector<std::size_t> sample(draws);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(rows));

    TrainConfig config = base;
    config.sgd.epochs = policy.weakened_epochs(base.sgd.epochs);
    config.seed = derive_seed(seed, "member/" + id + "/init");
    config.sgd.shuffle_seed = derive_seed(seed, "member/" + id + "/shuffle");
    ensemble.members.push_back(train(subset(train_set, sample), member_spec, config));
  }
  return ensemble;
}

Labels majority_vote(const std::vector<Labels>& votes, int num_classes) {
  if (votes.empty()) throw DataError("majority_vote: no voters");
  const std::size_t n = votes.front().size();
  for (const auto& v : votes) {
    if (v.size() != n) throw DimensionError("majority_vote: voters disagree on sample count");
  }
  Labels out(n);
  std::vector<int> tally(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(tally.begin(), tally.end(), 0);
    for (const auto& v : votes) {
      if (v[i] < 0 || v[i] >= num_classes) throw DataError("majority_vote: vote out of range");
      ++tally[static_cast<std::size_t>(v[i])];
    }
    ClassId best = 0;
    for (ClassId c = 1; c < num_classes; ++c) {
      if (tally[static_cast<std::size_t>(c)] > tally[static_cast<std::size_t>(best)]) best = c;
    }
    out[i] = best;
  }
  return out;
}

Labels predict_majority(const BaggingEnsemble& ensemble, const RealMatrix& features, PassCounter* counter) {
  ensemble.validate();
  std::vector<Labels> votes;
  for (const auto& member : ensemble.members) votes.push_back(predict(member, features));
  if (counter) {
    counter->experts.resize(ensemble.members.size(), 0);
    for (auto& c : counter->experts) c += features.rows();
  }
  return majority_vote(votes, ensemble.members.front().output_classes());
}

AveragingEnsemble train_averaging(const Dataset& train_set, const ClassifierSpec& spec, const TrainConfig& first_config,
                                  Seed seed) {
  TrainConfig second = first_config;
  second.seed = derive_seed(seed, "init");
  second.sgd.shuffle_seed = derive_seed(seed, "shuffle");
  if (second.seed == first_config.seed) throw UsageError("averaging ensemble: members need different seeds");
  return AveragingEnsemble(train(train_set, spec, first_config), train(train_set, spec, second));
}

Labels predict_average(const AveragingEnsemble& ensemble, const RealMatrix& features, PassCounter* counter) {
  const RealMatrix mean = (predict_proba(ensemble.first(), features) + predict_proba(ensemble.second(), features)) / 2.0;
  if (counter) {
    counter->experts.resize(2, 0);
    for (auto& c : counter->experts) c += features.rows();
  }
  return argmax_rows(mean);
}

CostModel inference_cost_baseline(EnsembleKind kind, int n) {
  switch (kind) {
    case EnsembleKind::single:
      return CostModel{1, {{"model", 1}}};
    case EnsembleKind::averaging:
      return CostModel{2, {{"member", 2}}};
    case EnsembleKind::bagging:
      if (n < 1) throw UsageError("inference_cost_baseline: n must be >= 1");
      return CostModel{n, {{"member", n}}};
  }
  throw UsageError("inference_cost_baseline: unknown ensemble kind");
}

// ---------------------------------------------------------------------------
// Ensemble container
//
//   magic "HRMENSB\0", u32 version, u8 kind (1 bagging, 2 averaging)
//   f64 epoch_fraction, f64 bootstrap_fraction, f64 hidden_fraction
//   u32 member count, member classifiers

namespace {

constexpr std::string_view kEnsembleMagic{"HRMENSB\0", 8};
constexpr std::uint32_t kEnsembleVersion = 1;

void write_container(const std::filesystem::path& path, std::uint8_t kind, const WeakeningPolicy& policy,
                     const std::vector<const TrainedClassifier*>& members) {
  using namespace binary;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  put_magic(out, kEnsembleMagic);
  put_u32(out, kEnsembleVersion);
  put_u8(out, kind);
  put_f64(out, policy.epoch_fraction);
  put_f64(out, policy.bootstrap_fraction);
  put_f64(out, policy.hidden_fraction);
  put_u32(out, static_cast<std::uint32_t>(members.size()));
  for (const auto* m : members) save_classifier(*m, out);
  if (!out) throw DataError("ensemble file: write failure");
}

std::pair<WeakeningPolicy, std::vector<TrainedClassifier>> read_container(const std::filesystem::path& path,
                                                                          std::uint8_t expected_kind) {
  using namespace binary;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  expect_magic(in, kEnsembleMagic);
  const auto version = get_u32(in, "version");
  if (version != kEnsembleVersion) throw DataError("ensemble file: unsupported version " + std::to_string(version));
  if (get_u8(in, "kind") != expected_kind) throw DataError("ensemble file: wrong ensemble kind in " + path.string());
  WeakeningPolicy policy;
  policy.epoch_fraction = get_f64(in, "policy");
  policy.bootstrap_fraction = get_f64(in, "policy");
  policy.hidden_fraction = get_f64(in, "policy");
  const auto n = get_u32(in, "member count");
  std::vector<TrainedClassifier> members;
  for (std::uint32_t i = 0; i < n; ++i) members.push_back(load_classifier(in));
  return {policy, std::move(members)};
}

}  // namespace

void save_bagging(const BaggingEnsemble& ensemble, const std::filesystem::path& path) {
  std::vector<const TrainedClassifier*> members;
  for (const auto& m : ensemble.members) members.push_back(&m);
  write_container(path, 1, ensemble.policy, members);
}

BaggingEnsemble load_bagging(const std::filesystem::path& path) {
  auto [policy, members] = read_container(path, 1);
  BaggingEnsemble out{std::move(members), policy};
  out.validate();
  return out;
}

void save_averaging(const AveragingEnsemble& ensemble, const std::filesystem::path& path) {
  write_container(path, 2, WeakeningPolicy{1.0, 1.0, 1.0}, {&ensemble.first(), &ensemble.second()});
}

AveragingEnsemble load_averaging(const std::filesystem::path& path) {
  auto [policy, members] = read_container(path, 2);
  if (members.size() != 2) throw DataError("averaging file: expected exactly two members");
  return AveragingEnsemble(std::move(members[0]), std::move(members[1]));
}

}  // namespace harmony
