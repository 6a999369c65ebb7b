#include "dynreg/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include "dynreg/errors.hpp"

namespace dynreg {

void PointCloud::append(const PointCloud& other) {
    // Mixing clouds with and without intensities drops the attribute rather
    // than inventing values.
    if (has_intensities() && other.has_intensities()) {
        intensities.insert(intensities.end(), other.intensities.begin(),
                           other.intensities.end());
    } else {
        intensities.clear();
    }
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (has_intensities() && intensities.size() != points.size()) intensities.clear();
}

Pose Pose::from_yaw(double yaw, const Eigen::Vector3d& t) {
    Pose p;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    p.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    p.translation = t;
    return p;
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

double Pose::rotation_angle() const {
    // Quaternion form: atan2 keeps full precision near zero, where the
    // acos-of-trace formula bottoms out around 1e-8.
    const Eigen::Quaterniond q(rotation);
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double Pose::orthonormality_drift() const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    const double ortho = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det = std::abs(rotation.determinant() - 1.0);
    return std::max(ortho, det);
}

bool Pose::is_valid(double tol) const {
    return rotation.allFinite() && translation.allFinite() &&
           orthonormality_drift() <= tol;
}

Pose Pose::renormalized(double tol) const {
    if (orthonormality_drift() <= tol) return *this;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d fixed = svd.matrixU() * svd.matrixV().transpose();
    if (fixed.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        fixed = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    Pose out;
    out.rotation = fixed;
    out.translation = translation;
    return out;
}

double normalize_angle(double radians) {
    double a = std::fmod(radians, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point3& p : cloud.points) out.points.push_back(pose.apply(p));
    out.intensities = cloud.intensities;
    return out;
}

namespace {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator<(const VoxelKey& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }
};

VoxelKey voxel_key(const Point3& p, double voxel) {
    return {static_cast<std::int64_t>(std::floor(p.x() / voxel)),
            static_cast<std::int64_t>(std::floor(p.y() / voxel)),
            static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

struct VoxelAccum {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double intensity_sum = 0.0;
    std::size_t count = 0;
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
    if (!(voxel > 0.0)) {
        throw InvalidParameterError("voxel_downsample: voxel size must be > 0");
    }
    std::map<VoxelKey, VoxelAccum> cells;
    const bool with_intensity = cloud.has_intensities();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        VoxelAccum& cell = cells[voxel_key(cloud.points[i], voxel)];
        cell.sum += cloud.points[i];
        if (with_intensity) cell.intensity_sum += cloud.intensities[i];
        ++cell.count;
    }
    PointCloud out;
    out.points.reserve(cells.size());
    if (with_intensity) out.intensities.reserve(cells.size());
    for (const auto& [key, cell] : cells) {
        out.points.push_back(cell.sum / static_cast<double>(cell.count));
        if (with_intensity) {
            out.intensities.push_back(
                static_cast<float>(cell.intensity_sum / static_cast<double>(cell.count)));
        }
    }
    return out;
}

PointCloud crop_range(const PointCloud& cloud, const RangeBox& box) {
    if (!box.is_valid()) throw InvalidParameterError("crop_range: min must be < max on every axis");
    PointCloud out;
    const bool with_intensity = cloud.has_intensities();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (box.contains(cloud.points[i])) {
            out.points.push_back(cloud.points[i]);
            if (with_intensity) out.intensities.push_back(cloud.intensities[i]);
        }
    }
    return out;
}

}  // namespace dynreg
