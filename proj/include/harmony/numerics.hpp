#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "harmony/error.hpp"
#include "harmony/types.hpp"

namespace harmony {

/// Seeded pseudo-random stream (mt19937_64 engine, seed mixed through
/// splitmix64). Substreams are derived from the construction seed and a
/// label, never from the current engine state, so consumers keyed by
/// different labels are independent of each other and of draw order.
class Prng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/splitmix64-substreams";

  explicit Prng(Seed seed);

  Seed seed() const noexcept { return seed_; }
  Prng substream(std::string_view key) const;

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Box-Muller; no cached second variate so the stream stays positional.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  Seed seed_;
  std::mt19937_64 engine_;
};

Seed derive_seed(Seed base, std::string_view key);

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 30;
  Seed shuffle_seed = 0;

  void validate() const;
};

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix<Scalar> out = a * b;
  return out;
}

/// Row-wise softmax with per-row max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar peak = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Scalar>
struct LossGradient {
  Scalar loss;
  Matrix<Scalar> grad_logits;
};

inline constexpr double kLogClamp = 1e-12;

/// Mean class-weighted negative log likelihood of softmax outputs and its
/// gradient with respect to the pre-softmax logits:
///   loss = (1/n) sum_i w[y_i] * -log(max(p[i, y_i], 1e-12))
///   grad = (1/n) w[y_i] * (p_i - onehot(y_i))
/// The clamp only affects the loss value, never the gradient.
template <typename Scalar>
LossGradient<Scalar> weighted_cross_entropy(const Matrix<Scalar>& probs, std::span<const ClassId> labels,
                                            const Vector<Scalar>& class_weights) {
  const auto n = probs.rows();
  const auto k = probs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionError("weighted_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  if (class_weights.size() != k) {
    throw DimensionError("weighted_cross_entropy: " + std::to_string(class_weights.size()) +
                         " class weights for " + std::to_string(k) + " classes");
  }
  LossGradient<Scalar> out{Scalar(0), probs};
  if (n == 0) return out;
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ClassId y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw DataError("weighted_cross_entropy: label " + std::to_string(y) + " out of range");
    const Scalar w = class_weights[y];
    const Scalar p = std::max(probs(i, y), Scalar(kLogClamp));
    out.loss -= w * std::log(p);
    out.grad_logits(i, y) -= Scalar(1);
    out.grad_logits.row(i) *= w * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

/// Momentum SGD: v <- momentum*v - lr*g; p <- p + v.
template <typename Scalar, int Rows, int Cols, int Options>
void sgd_step(Eigen::Matrix<Scalar, Rows, Cols, Options>& params, Eigen::Matrix<Scalar, Rows, Cols, Options>& velocity,
              const Eigen::Matrix<Scalar, Rows, Cols, Options>& grads, const SgdConfig& config) {
  if (params.rows() != velocity.rows() || params.cols() != velocity.cols() || params.rows() != grads.rows() ||
      params.cols() != grads.cols()) {
    throw DimensionError("sgd_step: parameter, velocity and gradient shapes differ");
  }
  velocity = Scalar(config.momentum) * velocity - Scalar(config.learning_rate) * grads;
  params += velocity;
}

/// Glorot-uniform initialization, entries ~ U(-a, a) with a = sqrt(6/(rows+cols)).
template <typename Scalar = double>
Matrix<Scalar> xavier_init(Eigen::Index rows, Eigen::Index cols, Prng& rng) {
  if (rows <= 0 || cols <= 0) throw DimensionError("xavier_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<Scalar> out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return out;
}

/// Index of the row maximum; ties go to the lowest index.
template <typename Derived>
ClassId argmax(const Eigen::MatrixBase<Derived>& row) {
  ClassId best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<ClassId>(j);
  }
  return best;
}

template <typename Scalar>
Labels argmax_rows(const Matrix<Scalar>& m) {
  Labels out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax(m.row(i));
  return out;
}

}  // namespace harmony
