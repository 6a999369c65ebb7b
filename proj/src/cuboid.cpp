#include "dynreg/cuboid.hpp"

#include <cmath>

namespace dynreg {

CuboidFrame cuboid_frame(const Detection& det, double margin) {
    const double l = det.length + 2.0 * margin;
    const double w = det.width + 2.0 * margin;
    const double h = det.height + 2.0 * margin;
    const double c = std::cos(det.yaw);
    const double s = std::sin(det.yaw);

    CuboidFrame frame;
    frame.edge_l = Eigen::Vector3d(c * l, s * l, 0.0);
    frame.edge_w = Eigen::Vector3d(-s * w, c * w, 0.0);
    frame.edge_h = Eigen::Vector3d(0.0, 0.0, h);
    frame.anchor = det.center - 0.5 * (frame.edge_l + frame.edge_w + frame.edge_h);
    return frame;
}

bool contains_point(const CuboidFrame& frame, const Point3& p) {
    const Eigen::Vector3d ap = p - frame.anchor;
    for (const Eigen::Vector3d* edge : {&frame.edge_l, &frame.edge_w, &frame.edge_h}) {
        const double len = edge->norm();
        const double proj = ap.dot(*edge) / len;
        if (proj < 0.0 || proj > len) return false;
    }
    return true;
}

CloudPartition partition_cloud(const PointCloud& cloud, const DetectionSet& dets,
                               double margin) {
    CloudPartition part;
    part.inside.resize(dets.size());

    std::vector<CuboidFrame> frames;
    frames.reserve(dets.size());
    for (const Detection& det : dets.detections) frames.push_back(cuboid_frame(det, margin));

    const bool with_intensity = cloud.has_intensities();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        PointCloud* bucket = &part.outside;
        for (std::size_t d = 0; d < frames.size(); ++d) {
            if (contains_point(frames[d], p)) {
                bucket = &part.inside[d];
                break;  // lowest detection index wins
            }
        }
        bucket->points.push_back(p);
        if (with_intensity) bucket->intensities.push_back(cloud.intensities[i]);
    }
    return part;
}

}  // namespace dynreg
