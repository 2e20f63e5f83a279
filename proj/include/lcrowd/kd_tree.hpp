#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace lcrowd {

/// Static kd-tree over fixed-dimension points. Nearest-neighbor ties are
/// resolved toward the smallest point index, so queries agree exactly with a
/// linear scan that keeps the first minimum.
template <int Dim, typename Scalar = double>
class KdTree {
public:
    using Point = Eigen::Matrix<Scalar, Dim, 1>;

    struct Hit {
        std::size_t index = 0;
        Scalar distance_sq = std::numeric_limits<Scalar>::infinity();
    };

    KdTree() = default;

    explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
        std::vector<std::size_t> order(points_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        nodes_.reserve(points_.size());
        if (!order.empty()) root_ = build(order.begin(), order.end(), 0);
    }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Point& point(std::size_t i) const { return points_[i]; }

    Hit nearest(const Point& query) const {
        Hit best;
        if (root_ >= 0) search(root_, query, best);
        return best;
    }

private:
    struct Node {
        std::size_t point = 0;
        int axis = 0;
        int left = -1;
        int right = -1;
    };

    using Iter = std::vector<std::size_t>::iterator;

    int build(Iter first, Iter last, int depth) {
        if (first == last) return -1;
        const int axis = depth % Dim;
        Iter mid = first + (last - first) / 2;
        std::nth_element(first, mid, last, [&](std::size_t a, std::size_t b) {
            return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
        });
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({*mid, axis, -1, -1});
        const int left = build(first, mid, depth + 1);
        const int right = build(mid + 1, last, depth + 1);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(int node_id, const Point& q, Hit& best) const {
        const Node& node = nodes_[node_id];
        const Scalar d = (points_[node.point] - q).squaredNorm();
        if (d < best.distance_sq || (d == best.distance_sq && node.point < best.index)) {
            best = {node.point, d};
        }
        const Scalar diff = q[node.axis] - points_[node.point][node.axis];
        const int near = diff < 0 ? node.left : node.right;
        const int far = diff < 0 ? node.right : node.left;
        if (near >= 0) search(near, q, best);
        // Equal-distance candidates may sit across the plane, so prune strictly.
        if (far >= 0 && diff * diff <= best.distance_sq) search(far, q, best);
    }

    std::vector<Point> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace lcrowd
