#include <cmath>
#include <sstream>

#include <doctest.h>

#include "harmony/classifier.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

// Forward pass written out element by element from the stored weights.
RealMatrix reference_forward(const TrainedClassifier& model, const RealMatrix& x) {
  RealMatrix a = x;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weights;
    RealMatrix z(a.rows(), w.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = layers[l].bias(j);
        for (Eigen::Index t = 0; t < w.rows(); ++t) s += a(i, t) * w(t, j);
        if (l + 1 < layers.size()) {
          s = model.spec().activation == Activation::relu ? std::max(0.0, s) : std::tanh(s);
        }
        z(i, j) = s;
      }
    }
    a = z;
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double peak = a.row(i).maxCoeff(), total = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) total += std::exp(a(i, j) - peak);
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = std::exp(a(i, j) - peak) / total;
  }
  return a;
}

double max_gradient_error(const ClassifierSpec& spec, Seed seed) {
  Prng rng(seed);
  auto layers = init_layers(spec, rng);
  for (auto& l : layers) l.bias = testing::random_matrix(1, l.bias.cols(), rng) * 0.1;
  const RealMatrix x = testing::random_matrix(6, spec.input_dim, rng);
  Labels y(6);
  for (auto& v : y) v = static_cast<ClassId>(rng.below(static_cast<std::uint64_t>(spec.output_classes)));
  RealVector w(spec.output_classes);
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.uniform(0.5, 3.0);
  const auto analytic = loss_and_gradient(spec, layers, x, y, w);
  const double h = 1e-6;
  double worst = 0;
  const auto sweep = [&](auto& p, const auto& g) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double keep = p(i, j);
        p(i, j) = keep + h;
        const double up = loss_and_gradient(spec, layers, x, y, w).loss;
        p(i, j) = keep - h;
        const double down = loss_and_gradient(spec, layers, x, y, w).loss;
        p(i, j) = keep;
        const double numeric = (up - down) / (2 * h);
        const double err = std::abs(numeric - g(i, j)) / std::max(1e-8, std::abs(numeric) + std::abs(g(i, j)));
        worst = std::max(worst, err);
      }
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    sweep(layers[l].weights, analytic.grads[l].weights);
    sweep(layers[l].bias, analytic.grads[l].bias);
  }
  return worst;
}

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("spec validation and output respec") {
  ClassifierSpec spec;
  spec.input_dim = 8;
  spec.output_classes = 10;
  CHECK_NOTHROW(spec.validate());
  const auto conductor = respec_output(spec, 2);
  CHECK(conductor.output_classes == 2);
  CHECK(conductor.hidden_dims == spec.hidden_dims);
  CHECK(respec_output(spec, 10) == spec);
  CHECK(respec_output(spec, 4).output_classes == 4);
  CHECK_THROWS(respec_output(spec, 1));

  auto bad = spec;
  bad.input_dim = 0;
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.output_classes = 1;
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.hidden_dims = {4, 0};
  CHECK_THROWS(bad.validate());

  CHECK(parse_activation("tanh") == Activation::tanh);
  CHECK(to_string(Activation::relu) == "relu");
  CHECK_THROWS_AS(parse_activation("sigmoid"), UsageError);
}

TEST_CASE("backprop matches finite differences") {
  ClassifierSpec spec;
  spec.input_dim = 4;
  spec.output_classes = 3;
  for (auto act : {Activation::relu, Activation::tanh}) {
    spec.activation = act;
    spec.hidden_dims = {5, 3};
    CHECK(max_gradient_error(spec, 1) < 1e-4);
    spec.hidden_dims = {};
    CHECK(max_gradient_error(spec, 2) < 1e-4);
  }
}

TEST_CASE("training: separable data, determinism, smoke") {
  const Dataset ds = testing::blobs(2, 3, 100, 12, 10.0);
  ClassifierSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {8};
  spec.output_classes = 2;
  TrainConfig tc;
  tc.sgd.epochs = 5;
  tc.seed = 3;
  tc.sgd.shuffle_seed = 4;
  const auto a = train(ds, spec, tc);
  CHECK(accuracy(predict(a, ds.features()), ds.labels()) >= 0.99);
  CHECK(train(ds, spec, tc) == a);
  CHECK(a.metadata().epochs_run == 5);
  CHECK(a.metadata().seed == 3);

  tc.sgd.epochs = 1;
  const auto once = train(ds, spec, tc);
  CHECK(std::isfinite(once.metadata().final_loss));

  tc.seed = 5;
  CHECK(!(train(ds, spec, tc) == once));

  auto wide = spec;
  wide.output_classes = 3;
  CHECK_THROWS_AS(train(ds, wide, tc), DimensionError);
  auto narrow = spec;
  narrow.input_dim = 2;
  CHECK_THROWS_AS(train(ds, narrow, tc), DimensionError);
}

TEST_CASE("diverging training is reported") {
  const Dataset ds = testing::blobs(2, 3, 50, 1, 40.0);
  ClassifierSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {};
  spec.output_classes = 2;
  TrainConfig tc;
  tc.class_weights = RealVector::Constant(2, 1e308);
  CHECK_THROWS_AS(train(ds, spec, tc), TrainingError);
}

TEST_CASE("class weights shift the decision toward the heavy class") {
  SyntheticSpec s;
  s.num_classes = 2;
  s.n_dims = 2;
  s.samples_per_class = 300;
  s.separation = 1.5;
  s.overlap_separation = 0.5;
  s.seed = 6;
  const Dataset ds = generate_synthetic(s);
  ClassifierSpec spec;
  spec.input_dim = 2;
  spec.hidden_dims = {};
  spec.output_classes = 2;
  TrainConfig tc;
  tc.sgd.learning_rate = 0.05;
  const auto plain = train(ds, spec, tc);
  tc.class_weights = RealVector(2);
  tc.class_weights << 1.0, 8.0;
  const auto biased = train(ds, spec, tc);
  const auto count_ones = [&](const TrainedClassifier& m) {
    const auto p = predict(m, ds.features());
    return std::count(p.begin(), p.end(), 1);
  };
  CHECK(count_ones(biased) > count_ones(plain));
  CHECK(biased.metadata().class_weights == std::vector<double>{1.0, 8.0});
}

TEST_CASE("inference matches an independent forward pass") {
  const Dataset ds = testing::blobs(3, 4, 40, 2);
  ClassifierSpec spec;
  spec.input_dim = 4;
  spec.hidden_dims = {6, 5};
  spec.output_classes = 3;
  for (auto act : {Activation::relu, Activation::tanh}) {
    spec.activation = act;
    TrainConfig tc;
    tc.sgd.epochs = 2;
    const auto model = train(ds, spec, tc);
    Prng rng(31);
    const RealMatrix x = testing::random_matrix(1000, 4, rng) * 4.0;
    const RealMatrix p = predict_proba(model, x);
    CHECK((p - reference_forward(model, x)).cwiseAbs().maxCoeff() < 1e-10);
    const Labels labels = predict(model, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index best = 0;
      p.row(i).maxCoeff(&best);
      CHECK(labels[static_cast<std::size_t>(i)] == best);
    }
    RealMatrix same(5, 4);
    for (int i = 0; i < 5; ++i) same.row(i) = x.row(0);
    const RealMatrix q = predict_proba(model, same);
    for (int i = 1; i < 5; ++i) CHECK(q.row(i) == q.row(0));
  }
}

TEST_CASE("predict on hand-set weights") {
  // Softmax regression with identity weights: logits are the inputs.
  ClassifierSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {};
  spec.output_classes = 3;
  std::vector<Layer> layers{{RealMatrix::Identity(3, 3), RealRowVector::Zero(3)}};
  const TrainedClassifier model(spec, layers, {});
  RealMatrix x(2, 3);
  x << std::log(0.2), std::log(0.5), std::log(0.3),
       0.0, 0.0, -1.0;
  CHECK(predict(model, x) == Labels{1, 0});
  CHECK(predict_proba(model, x)(0, 1) == doctest::Approx(0.5));

  std::vector<Layer> wrong{{RealMatrix::Identity(2, 3), RealRowVector::Zero(3)}};
  CHECK_THROWS(TrainedClassifier(spec, wrong, {}));
  CHECK_THROWS_AS(predict(model, RealMatrix::Zero(1, 2)), DimensionError);
  CHECK(accuracy(Labels{0, 1, 1, 0}, Labels{0, 1, 0, 0}) == doctest::Approx(0.75));
}

TEST_CASE("model files round trip and reject corruption") {
  const Dataset ds = testing::blobs(3, 4, 30, 6);
  ClassifierSpec spec;
  spec.input_dim = 4;
  spec.hidden_dims = {7};
  spec.output_classes = 3;
  spec.activation = Activation::tanh;
  TrainConfig tc;
  tc.sgd.epochs = 2;
  tc.class_weights = RealVector::Constant(3, 1.5);
  const auto model = train(ds, spec, tc);

  std::stringstream buffer;
  save_classifier(model, buffer);
  const std::string bytes = buffer.str();
  std::stringstream in(bytes);
  CHECK(load_classifier(in) == model);

  const auto dir = testing::scratch_dir("classifier_io");
  save_classifier(model, dir / "m.model");
  CHECK(load_classifier(dir / "m.model") == model);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream bm(bad_magic);
  CHECK_THROWS_AS(load_classifier(bm), DataError);
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_classifier(cut), DataError);
  CHECK_THROWS_AS(load_classifier(dir / "absent.model"), DataError);
}

}
