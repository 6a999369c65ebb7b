#pragma once

#include <vector>

#include "dynreg/detection.hpp"
#include "dynreg/geometry.hpp"

namespace dynreg {

/// Default inflation applied to every cuboid extent before containment;
/// detector boxes are tight and lidar returns on object surfaces straddle the
/// exact boundary.
inline constexpr double kDefaultCuboidMargin = 0.1;

/// A cuboid as an anchor corner plus three mutually orthogonal edge vectors.
struct CuboidFrame {
    Point3 anchor = Point3::Zero();          // corner A
    Eigen::Vector3d edge_l = Eigen::Vector3d::Zero();  // AB, |AB| = length
    Eigen::Vector3d edge_w = Eigen::Vector3d::Zero();  // AD, |AD| = width
    Eigen::Vector3d edge_h = Eigen::Vector3d::Zero();  // AC, |AC| = height
};

/// Builds the corner frame of a detection inflated by `margin` on every side.
CuboidFrame cuboid_frame(const Detection& det, double margin = kDefaultCuboidMargin);

/// Dot-product containment: all three projections of AP onto the unit edge
/// directions must lie in [0, edge length] (closed on both faces).
bool contains_point(const CuboidFrame& frame, const Point3& p);

/// Split of a cloud into the points outside every cuboid and one bucket per
/// detection.
struct CloudPartition {
    PointCloud outside;
    std::vector<PointCloud> inside;  // one bucket per detection, input order

    std::size_t inside_total() const {
        std::size_t n = 0;
        for (const auto& bucket : inside) n += bucket.size();
        return n;
    }
};

/// Assigns every point to exactly one bucket: the lowest-index detection
/// containing it, or `outside`. Order is preserved within each bucket.
CloudPartition partition_cloud(const PointCloud& cloud, const DetectionSet& dets,
                               double margin = kDefaultCuboidMargin);

}  // namespace dynreg
