#pragma once

#include <array>

// Published per-class accuracies of a CIFAR-10 image classifier,
// re-indexed by class id (0 airplane ... 9 truck). The source lists strong
// classes first, so columns arrive in the order 0,1,4,6,7,8,9,2,3,5.
namespace published {

inline constexpr std::array<int, 10> kColumnOrder{0, 1, 4, 6, 7, 8, 9, 2, 3, 5};

constexpr std::array<double, 10> by_class(std::array<double, 10> columns) {
  std::array<double, 10> out{};
  for (std::size_t i = 0; i < 10; ++i) out[static_cast<std::size_t>(kColumnOrder[i])] = columns[i];
  return out;
}

inline constexpr auto kTarget = by_class({0.901, 0.953, 0.867, 0.924, 0.922, 0.94, 0.932, 0.827, 0.719, 0.835});
inline constexpr auto kConductor = by_class({0.942, 0.986, 0.878, 0.855, 0.892, 0.986, 0.989, 0.857, 0.886, 0.921});
inline constexpr auto kHarmony = by_class({0.88, 0.952, 0.851, 0.885, 0.883, 0.938, 0.926, 0.854, 0.832, 0.852});

inline constexpr double kTargetMean = 0.8820, kTargetVariance = 0.00466;
inline constexpr double kHarmonyMean = 0.8853, kHarmonyVariance = 0.00150;
inline constexpr double kConductorStrong = 0.932, kConductorWeak = 0.888;

}  // namespace published
