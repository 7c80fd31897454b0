#include "harmony/numerics.hpp"

#include <numbers>

namespace harmony {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Seed derive_seed(Seed base, std::string_view key) { return splitmix64(splitmix64(base) ^ fnv1a(key)); }

Prng::Prng(Seed seed) : seed_(seed), engine_(splitmix64(seed)) {}

Prng Prng::substream(std::string_view key) const { return Prng(derive_seed(seed_, key)); }

std::uint64_t Prng::next_u64() { return engine_(); }

double Prng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Prng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Prng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Prng::below(std::uint64_t n) {
  if (n == 0) throw DataError("Prng::below: empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("sgd: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("sgd: momentum must be in [0, 1)");
  if (batch_size < 1) throw UsageError("sgd: batch_size must be >= 1");
  if (epochs < 1) throw UsageError("sgd: epochs must be >= 1");
}

}  // namespace harmony
