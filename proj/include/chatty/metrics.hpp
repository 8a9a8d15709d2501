#pragma once

#include <vector>

#include "chatty/matrix.hpp"

namespace chatty {

// Fraction of positions where pred == truth. Sizes must match (ShapeError).
Real accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Mean silhouette coefficient over all points (Euclidean distances).
// Points in singleton clusters contribute 0; a single cluster scores 0.
Real silhouette(const Mat& points, const std::vector<int>& labels);

// Mean pairwise angle (radians) between the per-class centroid directions of
// `points`. Pairs involving a near-zero centroid contribute 0.
Real mean_centroid_angle(const Mat& points, const std::vector<int>& labels);

}  // namespace chatty
