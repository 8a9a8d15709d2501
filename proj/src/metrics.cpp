#include "chatty/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

int class_count(const std::vector<int>& labels) {
    int top = -1;
    for (int y : labels) {
        if (y < 0) throw IndexError("labels must be non-negative");
        top = std::max(top, y);
    }
    return top + 1;
}

}  // namespace

Real accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw ShapeError("accuracy: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
    }
    if (pred.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) ++hits;
    }
    return static_cast<Real>(hits) / static_cast<Real>(pred.size());
}

Real silhouette(const Mat& points, const std::vector<int>& labels) {
    const Index n = points.rows();
    if (static_cast<Index>(labels.size()) != n) {
        throw ShapeError("silhouette: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " points");
    }
    if (n == 0) return 0.0;
    const int c = class_count(labels);
    if (c < 2) return 0.0;

    std::vector<Index> cluster_size(static_cast<std::size_t>(c), 0);
    for (int y : labels) ++cluster_size[static_cast<std::size_t>(y)];

    Real total = 0.0;
    std::vector<Real> dist_sum(static_cast<std::size_t>(c));
    for (Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (cluster_size[static_cast<std::size_t>(own)] <= 1) {
            continue;  // singleton contributes 0
        }
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const Real d = (points.row(i) - points.row(j)).norm();
            dist_sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += d;
        }
        const Real a = dist_sum[static_cast<std::size_t>(own)] /
                       static_cast<Real>(cluster_size[static_cast<std::size_t>(own)] - 1);
        Real b = std::numeric_limits<Real>::infinity();
        for (int k = 0; k < c; ++k) {
            if (k == own || cluster_size[static_cast<std::size_t>(k)] == 0) continue;
            b = std::min(b, dist_sum[static_cast<std::size_t>(k)] /
                                static_cast<Real>(cluster_size[static_cast<std::size_t>(k)]));
        }
        if (!std::isfinite(b)) continue;  // every other cluster empty
        const Real m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<Real>(n);
}

Real mean_centroid_angle(const Mat& points, const std::vector<int>& labels) {
    const Index n = points.rows();
    if (static_cast<Index>(labels.size()) != n) {
        throw ShapeError("mean_centroid_angle: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " points");
    }
    if (n == 0) return 0.0;
    const int c = class_count(labels);
    Mat centroids = Mat::Zero(c, points.cols());
    std::vector<Real> counts(static_cast<std::size_t>(c), 0.0);
    for (Index i = 0; i < n; ++i) {
        centroids.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int k = 0; k < c; ++k) {
        if (counts[static_cast<std::size_t>(k)] > 0.0) {
            centroids.row(k) /= counts[static_cast<std::size_t>(k)];
        }
    }

    Real total = 0.0;
    int pairs = 0;
    for (int a = 0; a < c; ++a) {
        for (int b = a + 1; b < c; ++b) {
            ++pairs;
            const Real na = centroids.row(a).norm();
            const Real nb = centroids.row(b).norm();
            if (na < 1e-12 || nb < 1e-12) continue;
            Real cosine = centroids.row(a).dot(centroids.row(b)) / (na * nb);
            cosine = std::clamp(cosine, -1.0, 1.0);
            total += std::acos(cosine);
        }
    }
    return pairs > 0 ? total / static_cast<Real>(pairs) : 0.0;
}

}  // namespace chatty
