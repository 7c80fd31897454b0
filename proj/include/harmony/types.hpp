#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace harmony {

// Dense storage is row-major so one sample is one contiguous row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using RealMatrix = Matrix<double>;
using RealVector = Vector<double>;
using RealRowVector = RowVector<double>;

using ClassId = int;
using Labels = std::vector<ClassId>;
using ClassSet = std::vector<ClassId>;

using Seed = std::uint64_t;

}  // namespace harmony
