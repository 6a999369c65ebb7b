#include "dynreg/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dynreg/errors.hpp"

namespace dynreg {

KdIndex::KdIndex(const PointCloud& cloud) : points_(cloud.points) {
    if (points_.empty()) return;
    nodes_.reserve(points_.size());
    std::vector<std::size_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0);
    root_ = build(order, 0, order.size(), 0);
}

std::int32_t KdIndex::build(std::vector<std::size_t>& order, std::size_t begin,
                            std::size_t end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    // Tie on coordinate falls back to point index so the tree layout is a
    // pure function of the input cloud.
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         const double ca = points_[a][axis];
                         const double cb = points_[b][axis];
                         if (ca != cb) return ca < cb;
                         return a < b;
                     });
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({order[mid], axis, -1, -1});
    nodes_[id].left = build(order, begin, mid, depth + 1);
    nodes_[id].right = build(order, mid + 1, end, depth + 1);
    return id;
}

KdIndex::Hit KdIndex::nearest(const Point3& query) const {
    if (empty()) throw EmptyIndexError("nearest: index holds no points");
    Hit best{0, std::numeric_limits<double>::infinity()};
    best.index = points_.size();  // sentinel, replaced on first visit
    search(root_, query, best);
    best.distance = std::sqrt(best.distance);
    return best;
}

void KdIndex::search(std::int32_t node, const Point3& query, Hit& best) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const double d2 = (points_[n.point] - query).squaredNorm();
    if (d2 < best.distance || (d2 == best.distance && n.point < best.index)) {
        best.distance = d2;
        best.index = n.point;
    }
    const double diff = query[n.axis] - points_[n.point][n.axis];
    const std::int32_t first = diff < 0.0 ? n.left : n.right;
    const std::int32_t second = diff < 0.0 ? n.right : n.left;
    search(first, query, best);
    // Equal plane distance is not prunable: a tied point may live there and
    // the smallest-index rule must see it.
    if (diff * diff <= best.distance) search(second, query, best);
}

}  // namespace dynreg
