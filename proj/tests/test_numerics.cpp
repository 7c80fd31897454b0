#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "harmony/numerics.hpp"
#include "support.hpp"

using namespace harmony;

TEST_SUITE("numerics") {

TEST_CASE("prng is reproducible and substreams ignore draw order") {
  Prng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Prng fresh(42);
  const auto s1 = fresh.substream("x").next_u64();
  fresh.next_u64();
  fresh.next_u64();
  CHECK(fresh.substream("x").next_u64() == s1);
  CHECK(Prng(42).substream("y").next_u64() != s1);
  CHECK(Prng(43).substream("x").next_u64() != s1);
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
  CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
}

TEST_CASE("prng ranges and moments") {
  Prng rng(1);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sumsq / n - 1.0) < 0.05);

  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
  for (int h : hits) CHECK(h > 800);

  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("shuffle is a permutation") {
  Prng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w.begin(), w.end());
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("matmul agrees with the triple loop") {
  Prng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto c = static_cast<Eigen::Index>(1 + rng.below(6));
    const RealMatrix a = testing::random_matrix(r, k, rng);
    const RealMatrix b = testing::random_matrix(k, c, rng);
    const RealMatrix got = matmul(a, b);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        double want = 0;
        for (Eigen::Index t = 0; t < k; ++t) want += a(i, t) * b(t, j);
        CHECK(got(i, j) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(matmul(RealMatrix(2, 3), RealMatrix(2, 3)), DimensionError);
}

TEST_CASE("softmax rows are distributions and shift invariant") {
  Prng rng(9);
  const RealMatrix logits = testing::random_matrix(8, 5, rng);
  const RealMatrix p = softmax_rows(logits);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.row(i).minCoeff() > 0.0);
  }
  RealMatrix shifted = logits;
  for (Eigen::Index i = 0; i < shifted.rows(); ++i) shifted.row(i).array() += rng.uniform(-50, 50);
  CHECK((softmax_rows(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);

  RealMatrix huge(1, 3);
  huge << 1000.0, 1000.0, -1000.0;
  const RealMatrix q = softmax_rows(huge);
  CHECK(q.allFinite());
  CHECK(q(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("weighted cross-entropy by hand") {
  RealMatrix p(2, 3);
  p << 0.7, 0.2, 0.1,
       0.1, 0.3, 0.6;
  const Labels y{0, 2};
  RealVector w(3);
  w << 1.0, 1.0, 3.0;
  const auto out = weighted_cross_entropy(p, std::span<const ClassId>(y), w);
  CHECK(out.loss == doctest::Approx((-std::log(0.7) - 3.0 * std::log(0.6)) / 2.0));
  CHECK(out.grad_logits(0, 0) == doctest::Approx((0.7 - 1.0) / 2.0));
  CHECK(out.grad_logits(0, 1) == doctest::Approx(0.2 / 2.0));
  CHECK(out.grad_logits(1, 2) == doctest::Approx(3.0 * (0.6 - 1.0) / 2.0));
  CHECK(out.grad_logits(1, 0) == doctest::Approx(3.0 * 0.1 / 2.0));

  // clamp keeps the loss finite
  RealMatrix zero(1, 2);
  zero << 1.0, 0.0;
  const Labels y1{1};
  const auto clamped = weighted_cross_entropy(zero, std::span<const ClassId>(y1), RealVector::Ones(2).eval());
  CHECK(clamped.loss == doctest::Approx(-std::log(kLogClamp)));

  CHECK_THROWS_AS(weighted_cross_entropy(p, std::span<const ClassId>(y1), w), DimensionError);
  CHECK_THROWS_AS(weighted_cross_entropy(p, std::span<const ClassId>(y), RealVector::Ones(2).eval()), DimensionError);
  const Labels bad{0, 3};
  CHECK_THROWS_AS(weighted_cross_entropy(p, std::span<const ClassId>(bad), w), DataError);
}

TEST_CASE("uniform weights scale loss and gradient linearly") {
  Prng rng(11);
  const RealMatrix p = softmax_rows(testing::random_matrix(6, 4, rng));
  const Labels y{0, 1, 2, 3, 1, 0};
  const RealVector ones = RealVector::Ones(4);
  const auto base = weighted_cross_entropy(p, std::span<const ClassId>(y), ones);
  const auto doubled = weighted_cross_entropy(p, std::span<const ClassId>(y), (2.0 * ones).eval());
  // multiplying by 2 is exact in binary floating point
  CHECK(doubled.loss == 2.0 * base.loss);
  CHECK(doubled.grad_logits == (2.0 * base.grad_logits).eval());
}

TEST_CASE("cross-entropy gradient matches finite differences in the logits") {
  Prng rng(13);
  RealMatrix z = testing::random_matrix(4, 3, rng);
  const Labels y{2, 0, 1, 2};
  RealVector w(3);
  w << 1.0, 2.5, 0.5;
  const auto loss_at = [&](const RealMatrix& logits) {
    return weighted_cross_entropy(softmax_rows(logits), std::span<const ClassId>(y), w).loss;
  };
  const auto analytic = weighted_cross_entropy(softmax_rows(z), std::span<const ClassId>(y), w).grad_logits;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      RealMatrix up = z, down = z;
      up(i, j) += h;
      down(i, j) -= h;
      CHECK(analytic(i, j) == doctest::Approx((loss_at(up) - loss_at(down)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("sgd_step follows the unrolled momentum recurrence") {
  SgdConfig cfg;
  cfg.learning_rate = 0.25;
  cfg.momentum = 0.5;
  RealMatrix p(1, 2), v = RealMatrix::Zero(1, 2), g(1, 2);
  p << 1.0, -1.0;
  g << 1.0, 2.0;
  // v1 = -0.25 g, p1 = p0 + v1
  sgd_step(p, v, g, cfg);
  CHECK(p(0, 0) == doctest::Approx(0.75));
  CHECK(p(0, 1) == doctest::Approx(-1.5));
  // v2 = 0.5 v1 - 0.25 g = -0.375 g
  sgd_step(p, v, g, cfg);
  CHECK(v(0, 0) == doctest::Approx(-0.375));
  CHECK(p(0, 0) == doctest::Approx(0.375));
  CHECK(p(0, 1) == doctest::Approx(-2.25));

  RealMatrix wrong(2, 2);
  CHECK_THROWS_AS(sgd_step(p, v, wrong, cfg), DimensionError);
}

TEST_CASE("xavier init bounds and variance") {
  Prng rng(17);
  const RealMatrix w = xavier_init(100, 60, rng);
  const double bound = std::sqrt(6.0 / 160.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  // U(-a, a) has variance a^2 / 3 = 2 / (fan_in + fan_out)
  CHECK(var == doctest::Approx(2.0 / 160.0).epsilon(0.05));
  CHECK_THROWS_AS(xavier_init(0, 3, rng), DimensionError);
}

TEST_CASE("argmax ties go to the lowest index") {
  RealMatrix m(3, 3);
  m << 1, 3, 3,
       2, 2, 2,
       0, 0, 5;
  CHECK(argmax_rows(m) == Labels{1, 0, 2});
}

TEST_CASE("sgd config validation") {
  SgdConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = ok;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = ok;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = ok;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = ok;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

}
