#include "harmony/classifier.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "harmony/error.hpp"

namespace harmony {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw UsageError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

void ClassifierSpec::validate() const {
  if (input_dim < 1) throw UsageError("classifier: input_dim must be positive");
  for (int h : hidden_dims) {
    if (h < 1) throw UsageError("classifier: hidden layer widths must be positive");
  }
  if (output_classes < 2) throw UsageError("classifier: output_classes must be >= 2");
}

ClassifierSpec respec_output(const ClassifierSpec& spec, int k) {
  if (k < 2) throw UsageError("respec_output: k must be >= 2, got " + std::to_string(k));
  ClassifierSpec out = spec;
  out.output_classes = k;
  return out;
}

TrainedClassifier::TrainedClassifier(ClassifierSpec spec, std::vector<Layer> layers, TrainingMetadata metadata)
    : spec_(std::move(spec)), layers_(std::move(layers)), metadata_(std::move(metadata)) {
  spec_.validate();
  if (layers_.size() != spec_.hidden_dims.size() + 1) throw DimensionError("classifier: layer count does not match spec");
  Eigen::Index fan_in = spec_.input_dim;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Eigen::Index fan_out = l < spec_.hidden_dims.size() ? spec_.hidden_dims[l] : spec_.output_classes;
    if (layers_[l].weights.rows() != fan_in || layers_[l].weights.cols() != fan_out ||
        layers_[l].bias.cols() != fan_out) {
      throw DimensionError("classifier: layer " + std::to_string(l) + " shape does not match spec");
    }
    fan_in = fan_out;
  }
}

std::vector<Layer> init_layers(const ClassifierSpec& spec, Prng& rng) {
  std::vector<Layer> layers;
  Eigen::Index fan_in = spec.input_dim;
  for (std::size_t l = 0; l <= spec.hidden_dims.size(); ++l) {
    const Eigen::Index fan_out = l < spec.hidden_dims.size() ? spec.hidden_dims[l] : spec.output_classes;
    layers.push_back(Layer{xavier_init<double>(fan_in, fan_out, rng), RealRowVector::Zero(fan_out)});
    fan_in = fan_out;
  }
  return layers;
}

namespace {

void activate(RealMatrix& z, Activation a) {
  if (a == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// Derivative of the activation expressed through its output h.
RealMatrix activation_slope(const RealMatrix& h, Activation a) {
  if (a == Activation::relu) return (h.array() > 0.0).cast<double>().matrix();
  return (1.0 - h.array().square()).matrix();
}

RealMatrix affine(const RealMatrix& x, const Layer& layer) {
  RealMatrix z = x * layer.weights;
  z.rowwise() += layer.bias;
  return z;
}

void check_input(const ClassifierSpec& spec, const RealMatrix& features) {
  if (features.cols() != spec.input_dim) {
    throw DimensionError("classifier: features have " + std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(spec.input_dim));
  }
}

RealVector resolve_weights(const TrainConfig& config, int k) {
  if (config.class_weights.size() == 0) return RealVector::Ones(k);
  if (config.class_weights.size() != k) {
    throw DimensionError("train: " + std::to_string(config.class_weights.size()) + " class weights for " +
                         std::to_string(k) + " classes");
  }
  if (!(config.class_weights.array() > 0.0).all() || !config.class_weights.allFinite()) {
    throw UsageError("train: class weights must be finite and > 0");
  }
  return config.class_weights;
}

}  // namespace

RealMatrix forward_proba(const ClassifierSpec& spec, const std::vector<Layer>& layers, const RealMatrix& features) {
  check_input(spec, features);
  RealMatrix h = features;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = affine(h, layers[l]);
    if (l + 1 < layers.size()) activate(h, spec.activation);
  }
  return softmax_rows(h);
}

NetworkGradient loss_and_gradient(const ClassifierSpec& spec, const std::vector<Layer>& layers,
                                  const RealMatrix& features, std::span<const ClassId> labels,
                                  const RealVector& class_weights) {
  check_input(spec, features);
  // activations[l] is the input to layer l.
  std::vector<RealMatrix> activations{features};
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    RealMatrix h = affine(activations.back(), layers[l]);
    activate(h, spec.activation);
    activations.push_back(std::move(h));
  }
  const RealMatrix probs = softmax_rows(affine(activations.back(), layers.back()));
  auto [loss, delta] = weighted_cross_entropy(probs, labels, class_weights);

  NetworkGradient out{loss, std::vector<Layer>(layers.size())};
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.grads[l].weights = activations[l].transpose() * delta;
    out.grads[l].bias = delta.colwise().sum();
    if (l > 0) {
      RealMatrix back = delta * layers[l].weights.transpose();
      delta = back.cwiseProduct(activation_slope(activations[l], spec.activation));
    }
  }
  return out;
}

TrainedClassifier train(const Dataset& data, const ClassifierSpec& spec, const TrainConfig& config) {
  spec.validate();
  config.sgd.validate();
  if (data.empty()) throw DataError("train: empty dataset");
  if (data.num_dims() != spec.input_dim) {
    throw DimensionError("train: dataset has " + std::to_string(data.num_dims()) + " features, spec expects " +
                         std::to_string(spec.input_dim));
  }
  if (data.num_classes() != spec.output_classes) {
    throw DimensionError("train: dataset has " + std::to_string(data.num_classes()) + " classes, spec expects " +
                         std::to_string(spec.output_classes));
  }
  const RealVector weights = resolve_weights(config, spec.output_classes);

  Prng init_rng = Prng(config.seed).substream("init");
  std::vector<Layer> layers = init_layers(spec, init_rng);
  std::vector<Layer> velocity;
  for (const auto& layer : layers) {
    velocity.push_back(Layer{RealMatrix::Zero(layer.weights.rows(), layer.weights.cols()),
                             RealRowVector::Zero(layer.bias.cols())});
  }

  Prng shuffle_rng = Prng(config.sgd.shuffle_seed).substream("shuffle");
  const std::size_t n = data.num_samples();
  const auto batch = static_cast<std::size_t>(config.sgd.batch_size);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Labels batch_labels;

  for (int epoch = 0; epoch < config.sgd.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::size_t stop = std::min(n, start + batch);
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      const RealMatrix x = data.features()(rows, Eigen::all);
      batch_labels.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) batch_labels[i] = data.labels()[static_cast<std::size_t>(rows[i])];

      const auto step = loss_and_gradient(spec, layers, x, batch_labels, weights);
      if (!std::isfinite(step.loss)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b + 1));
      }
      for (std::size_t l = 0; l < layers.size(); ++l) {
        sgd_step(layers[l].weights, velocity[l].weights, step.grads[l].weights, config.sgd);
        sgd_step(layers[l].bias, velocity[l].bias, step.grads[l].bias, config.sgd);
      }
    }
  }

  const RealMatrix probs = forward_proba(spec, layers, data.features());
  const double final_loss = weighted_cross_entropy(probs, data.labels(), weights).loss;
  if (!std::isfinite(final_loss)) throw TrainingError("train: non-finite loss after final epoch");

  TrainingMetadata metadata{final_loss, config.sgd.epochs, config.seed, config.sgd.shuffle_seed,
                            std::vector<double>(weights.data(), weights.data() + weights.size())};
  return TrainedClassifier(spec, std::move(layers), std::move(metadata));
}

RealMatrix predict_proba(const TrainedClassifier& model, const RealMatrix& features) {
  return forward_proba(model.spec(), model.layers(), features);
}

Labels predict(const TrainedClassifier& model, const RealMatrix& features) {
  return argmax_rows(predict_proba(model, features));
}

double accuracy(const Labels& predicted, const Labels& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Model file
//
//   magic "HRMCLSF\0", u32 version
//   u32 input_dim, u32 hidden count, u32 hidden widths..., u32 output_classes, u8 activation
//   f64 final_loss, u32 epochs_run, u64 seed, u64 shuffle_seed, u32 K + f64 class weights
//   per layer: u32 rows, u32 cols, f64 weights (row-major), f64 bias[cols]

namespace {
constexpr std::string_view kClassifierMagic{"HRMCLSF\0", 8};
constexpr std::uint32_t kClassifierVersion = 1;
}  // namespace

void save_classifier(const TrainedClassifier& model, std::ostream& out) {
  using namespace binary;
  const auto& spec = model.spec();
  put_magic(out, kClassifierMagic);
  put_u32(out, kClassifierVersion);
  put_u32(out, static_cast<std::uint32_t>(spec.input_dim));
  put_u32(out, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(spec.output_classes));
  put_u8(out, spec.activation == Activation::relu ? 0 : 1);

  const auto& meta = model.metadata();
  put_f64(out, meta.final_loss);
  put_u32(out, static_cast<std::uint32_t>(meta.epochs_run));
  put_u64(out, meta.seed);
  put_u64(out, meta.shuffle_seed);
  put_u32(out, static_cast<std::uint32_t>(meta.class_weights.size()));
  for (double w : meta.class_weights) put_f64(out, w);

  for (const auto& layer : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(layer.weights.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.cols()));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) put_f64(out, layer.weights.data()[i]);
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) put_f64(out, layer.bias(j));
  }
  if (!out) throw DataError("model file: write failure");
}

TrainedClassifier load_classifier(std::istream& in) {
  using namespace binary;
  expect_magic(in, kClassifierMagic);
  const auto version = get_u32(in, "version");
  if (version != kClassifierVersion) throw DataError("classifier file: unsupported version " + std::to_string(version));

  ClassifierSpec spec;
  spec.input_dim = static_cast<int>(get_u32(in, "input_dim"));
  const auto hidden = get_u32(in, "hidden count");
  if (hidden > 1024) throw DataError("classifier file: implausible hidden layer count");
  spec.hidden_dims.clear();
  for (std::uint32_t l = 0; l < hidden; ++l) spec.hidden_dims.push_back(static_cast<int>(get_u32(in, "hidden width")));
  spec.output_classes = static_cast<int>(get_u32(in, "output_classes"));
  const auto act = get_u8(in, "activation");
  if (act > 1) throw DataError("classifier file: unknown activation code");
  spec.activation = act == 0 ? Activation::relu : Activation::tanh;
  try {
    spec.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("classifier file: ") + e.what());
  }

  TrainingMetadata meta;
  meta.final_loss = get_f64(in, "final_loss");
  meta.epochs_run = static_cast<int>(get_u32(in, "epochs_run"));
  meta.seed = get_u64(in, "seed");
  meta.shuffle_seed = get_u64(in, "shuffle_seed");
  const auto nweights = get_u32(in, "class weight count");
  if (nweights != static_cast<std::uint32_t>(spec.output_classes)) throw DataError("classifier file: class weight count mismatch");
  for (std::uint32_t k = 0; k < nweights; ++k) meta.class_weights.push_back(get_f64(in, "class weights"));

  std::vector<Layer> layers;
  Eigen::Index fan_in = spec.input_dim;
  for (std::size_t l = 0; l <= spec.hidden_dims.size(); ++l) {
    const Eigen::Index fan_out = l < spec.hidden_dims.size() ? spec.hidden_dims[l] : spec.output_classes;
    const auto rows = get_u32(in, "layer rows");
    const auto cols = get_u32(in, "layer cols");
    if (rows != fan_in || cols != fan_out) throw DataError("classifier file: layer " + std::to_string(l) + " shape mismatch");
    Layer layer{RealMatrix(rows, cols), RealRowVector(cols)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = get_f64(in, "weights");
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias(j) = get_f64(in, "bias");
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return TrainedClassifier(std::move(spec), std::move(layers), std::move(meta));
}

void save_classifier(const TrainedClassifier& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  save_classifier(model, out);
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_classifier(in);
}

}  // namespace harmony
