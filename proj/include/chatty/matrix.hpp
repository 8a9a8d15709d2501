#pragma once

#include <Eigen/Core>

#include <string>

namespace chatty {

using Real = double;

/// Dense row-major matrix, templated on scalar. Batches are rows.
template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mat = MatX<Real>;
using Index = Eigen::Index;

inline std::string shape_str(Index rows, Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

inline std::string shape_str(const Mat& m) {
    return shape_str(m.rows(), m.cols());
}

inline bool all_finite(const Mat& m) {
    return m.allFinite();
}

}  // namespace chatty
