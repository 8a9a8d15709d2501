#include <cmath>
#include <numbers>
#include <vector>

#include "chatty/errors.hpp"
#include "chatty/metrics.hpp"
#include "chatty/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace chatty;

TEST_CASE("accuracy counts exact matches") {
    CHECK(accuracy({1, 0, 2, 1}, {1, 0, 1, 1}) == doctest::Approx(0.75));
    CHECK(accuracy({0, 0}, {1, 1}) == 0.0);
    CHECK(accuracy({3, 3, 3}, {3, 3, 3}) == 1.0);
    CHECK(accuracy({}, {}) == 0.0);
    CHECK_THROWS_AS(accuracy({1, 2}, {1}), ShapeError);
}

TEST_CASE("silhouette approaches one for far-apart tight clusters") {
    Mat points(6, 2);
    points << 0.0, 0.0, 0.1, 0.0, 0.0, 0.1,  //
        100.0, 100.0, 100.1, 100.0, 100.0, 100.1;
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    CHECK(silhouette(points, labels) > 0.99);
    CHECK(silhouette(points, labels) <= 1.0);
}

TEST_CASE("silhouette is negative when clusters are swapped") {
    Mat points(6, 2);
    points << 0.0, 0.0, 0.1, 0.0, 0.0, 0.1,  //
        100.0, 100.0, 100.1, 100.0, 100.0, 100.1;
    const std::vector<int> swapped = {1, 1, 1, 0, 0, 0};
    // Same geometry, labels permuted consistently: still a perfect split.
    CHECK(silhouette(points, swapped) > 0.99);
    const std::vector<int> mixed = {0, 1, 0, 1, 0, 1};
    CHECK(silhouette(points, mixed) < 0.0);
}

TEST_CASE("silhouette conventions: single cluster and singletons") {
    Mat points(4, 2);
    points << 0, 0, 1, 0, 0, 1, 1, 1;
    CHECK(silhouette(points, {0, 0, 0, 0}) == 0.0);

    // One singleton cluster: that point contributes 0, the rest are scored.
    Mat far(3, 1);
    far << 0.0, 0.2, 50.0;
    const Real s = silhouette(far, {0, 0, 1});
    // point 0: a = 0.2, b = 50; point 1: a = 0.2, b = 49.8; the singleton
    // contributes 0; mean over all 3 points.
    const Real expected = ((50.0 - 0.2) / 50.0 + (49.8 - 0.2) / 49.8 + 0.0) / 3.0;
    CHECK(s == doctest::Approx(expected).epsilon(1e-12));
    CHECK(silhouette(Mat::Zero(0, 2), {}) == 0.0);
    CHECK_THROWS_AS(silhouette(far, {0, 0}), ShapeError);
}

TEST_CASE("silhouette matches the scalar-loop oracle on random data") {
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 12 + static_cast<Index>(rng.uniform_int(10));
        const Mat points = oracle::random_mat(rng, n, 3, -2.0, 2.0);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& y : labels) y = static_cast<int>(rng.uniform_int(3));
        CHECK(silhouette(points, labels) ==
              doctest::Approx(oracle::silhouette(points, labels)).epsilon(1e-12));
    }
}

TEST_CASE("centroid angle on axis-aligned clusters") {
    Mat points(4, 2);
    points << 1.0, 0.0, 3.0, 0.0,  // class 0 centroid (2, 0)
        0.0, 2.0, 0.0, 4.0;        // class 1 centroid (0, 3)
    const std::vector<int> labels = {0, 0, 1, 1};
    CHECK(mean_centroid_angle(points, labels) ==
          doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-12));
}

TEST_CASE("centroid angle is zero for aligned directions") {
    Mat points(2, 2);
    points << 1.0, 1.0, 2.0, 2.0;
    // acos near its flat end loses half the mantissa; allow sqrt(eps)-scale.
    CHECK(std::abs(mean_centroid_angle(points, {0, 1})) < 1e-6);
}

TEST_CASE("centroid angle for three evenly spread directions") {
    // Three unit centroids at 0, 120, 240 degrees: every pair subtends 120.
    Mat points(3, 2);
    const Real a = 2.0 * std::numbers::pi / 3.0;
    points << 1.0, 0.0, std::cos(a), std::sin(a), std::cos(2.0 * a), std::sin(2.0 * a);
    CHECK(mean_centroid_angle(points, {0, 1, 2}) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("centroid angle skips near-zero centroids") {
    // Class 1 centroid sits at the origin; the pair contributes 0.
    Mat points(3, 2);
    points << 1.0, 0.0, 0.5, 0.5, -0.5, -0.5;
    CHECK(mean_centroid_angle(points, {0, 1, 1}) == 0.0);
    CHECK_THROWS_AS(mean_centroid_angle(points, {0, 1}), ShapeError);
}
