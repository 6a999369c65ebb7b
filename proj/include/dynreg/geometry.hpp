#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <vector>

namespace dynreg {

using Point3 = Eigen::Vector3d;

/// Ordered list of 3D points in meters, optionally carrying one intensity
/// value per point (unitless, [0,1]).
struct PointCloud {
    std::vector<Point3> points;
    std::vector<float> intensities;  // empty, or same length as points

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_intensities() const { return !intensities.empty(); }

    /// Intensity sequence, when present, must match the point count.
    bool is_consistent() const {
        return intensities.empty() || intensities.size() == points.size();
    }

    void append(const PointCloud& other);
};

/// Rigid transform in SE(3): p' = R * p + t.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return {}; }
    static Pose from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

    Point3 apply(const Point3& p) const { return rotation * p + translation; }

    Pose inverse() const {
        Pose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
    friend Pose operator*(const Pose& a, const Pose& b) {
        Pose out;
        out.rotation = a.rotation * b.rotation;
        out.translation = a.rotation * b.translation + a.translation;
        return out;
    }

    Eigen::Matrix4d matrix() const;

    /// Yaw of the rotation about +z, in (-pi, pi].
    double yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

    /// Rotation angle in [0, pi].
    double rotation_angle() const;

    /// max(|R^T R - I|, |det R - 1|).
    double orthonormality_drift() const;

    bool is_valid(double tol = 1e-9) const;

    /// Nearest rotation by polar decomposition, applied only when drift
    /// exceeds the tolerance so already-clean poses round-trip bit-exactly.
    Pose renormalized(double tol = 1e-9) const;
};

/// Axis-aligned crop volume; closed intervals on every axis.
struct RangeBox {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    double z_min = 0.0, z_max = 0.0;

    bool is_valid() const {
        return x_min < x_max && y_min < y_max && z_min < z_max;
    }

    bool contains(const Point3& p) const {
        return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min &&
               p.y() <= y_max && p.z() >= z_min && p.z() <= z_max;
    }
};

/// Normalize an angle to (-pi, pi].
double normalize_angle(double radians);

/// Applies pose to every point; intensities and order preserved.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

/// Collapses each occupied voxel to the centroid of its members. Voxel key is
/// floor(coordinate / voxel) per axis; output is sorted by voxel key so the
/// result is independent of input order. Intensities are averaged per voxel.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// Keeps exactly the points inside the box (closed intervals), order preserved.
PointCloud crop_range(const PointCloud& cloud, const RangeBox& box);

}  // namespace dynreg
