// Global type aliases used throughout the library.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ngil {

template <typename T>
using MatrixX_t = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX_t = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVectorX_t = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Matrix = MatrixX_t<double>;
using Vector = VectorX_t<double>;
using RowVector = RowVectorX_t<double>;
using Index = Eigen::Index;

// Rows are samples, columns are embedding/feature coordinates.
using SampleMatrix = Matrix;

using VertexId = std::int32_t;
using VertexList = std::vector<VertexId>;
using Edge = std::pair<VertexId, VertexId>;  // normalized u < v

}  // namespace ngil
