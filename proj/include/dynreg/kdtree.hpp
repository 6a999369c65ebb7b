#pragma once

#include <cstddef>
#include <vector>

#include "dynreg/geometry.hpp"

namespace dynreg {

/// Static kd-tree over a point cloud. Queries are read-only and return the
/// same answer as a linear scan; exact-distance ties resolve to the smallest
/// point index.
class KdIndex {
public:
    struct Hit {
        std::size_t index = 0;
        double distance = 0.0;  // meters
    };

    KdIndex() = default;
    explicit KdIndex(const PointCloud& cloud);

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }

    /// Throws EmptyIndexError when the index holds no points.
    Hit nearest(const Point3& query) const;

private:
    struct Node {
        std::size_t point = 0;
        int axis = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::vector<std::size_t>& order, std::size_t begin,
                       std::size_t end, int depth);
    void search(std::int32_t node, const Point3& query, Hit& best) const;

    std::vector<Point3> points_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

inline KdIndex build_index(const PointCloud& cloud) { return KdIndex(cloud); }

inline KdIndex::Hit nearest(const KdIndex& index, const Point3& query) {
    return index.nearest(query);
}

}  // namespace dynreg
