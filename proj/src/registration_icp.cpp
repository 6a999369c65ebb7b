#include <Eigen/SVD>

#include <cmath>

#include "dynreg/errors.hpp"
#include "dynreg/kdtree.hpp"
#include "dynreg/registration.hpp"

namespace dynreg {

namespace {

struct CorrespondenceSet {
    std::vector<std::size_t> source_index;
    std::vector<std::size_t> target_index;
    double capped_cost = 0.0;  // mean over all source points of min(d^2, gate^2)
};

CorrespondenceSet match(const KdIndex& index, const std::vector<Point3>& transformed,
                        const PointCloud& target, double gate) {
    CorrespondenceSet set;
    const double gate2 = gate * gate;
    double total = 0.0;
    for (std::size_t i = 0; i < transformed.size(); ++i) {
        const KdIndex::Hit hit = index.nearest(transformed[i]);
        const double d2 = (target.points[hit.index] - transformed[i]).squaredNorm();
        if (d2 <= gate2) {
            set.source_index.push_back(i);
            set.target_index.push_back(hit.index);
            total += d2;
        } else {
            total += gate2;
        }
    }
    set.capped_cost = transformed.empty() ? 0.0 : total / static_cast<double>(transformed.size());
    return set;
}

}  // namespace

RegistrationResult icp_register(const PointCloud& target, const PointCloud& source,
                                const RegistrationConfig& cfg) {
    if (!cfg.is_valid()) throw InvalidParameterError("icp_register: invalid config");
    if (target.empty() || source.empty()) {
        throw NoOverlapError("icp_register: empty input cloud");
    }

    const KdIndex index(target);
    RegistrationResult result;
    result.pose = cfg.initial_guess;

    std::vector<Point3> transformed(source.size());
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        for (std::size_t i = 0; i < source.size(); ++i) {
            transformed[i] = result.pose.apply(source.points[i]);
        }
        const CorrespondenceSet corr =
            match(index, transformed, target, cfg.max_correspondence_distance);
        if (corr.source_index.empty()) {
            throw NoOverlapError("icp_register: no correspondences within gate");
        }
        result.cost_trace.push_back(corr.capped_cost);
        result.final_cost = corr.capped_cost;
        result.iterations_used = iter + 1;

        // Closed-form least-squares update from the cross-covariance SVD.
        const std::size_t n = corr.source_index.size();
        Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
        Eigen::Vector3d tgt_mean = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < n; ++k) {
            src_mean += transformed[corr.source_index[k]];
            tgt_mean += target.points[corr.target_index[k]];
        }
        src_mean /= static_cast<double>(n);
        tgt_mean /= static_cast<double>(n);

        Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
        for (std::size_t k = 0; k < n; ++k) {
            cross += (target.points[corr.target_index[k]] - tgt_mean) *
                     (transformed[corr.source_index[k]] - src_mean).transpose();
        }
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::Vector3d sv = svd.singularValues();
        if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0)) {
            throw DegenerateInputError(
                "icp_register: rank-deficient cross-covariance (collinear or coincident points)");
        }

        Eigen::Matrix3d det_fix = Eigen::Matrix3d::Identity();
        if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
            det_fix(2, 2) = -1.0;
        }
        Pose delta;
        delta.rotation = svd.matrixU() * det_fix * svd.matrixV().transpose();
        delta.translation = tgt_mean - delta.rotation * src_mean;

        result.pose = (delta * result.pose).renormalized();

        if (delta.translation.norm() < cfg.translation_epsilon &&
            delta.rotation_angle() < cfg.rotation_epsilon) {
            result.converged = true;
            break;
        }
    }

    // Cost at the final pose, same capped objective as the trace.
    for (std::size_t i = 0; i < source.size(); ++i) {
        transformed[i] = result.pose.apply(source.points[i]);
    }
    result.final_cost =
        match(index, transformed, target, cfg.max_correspondence_distance).capped_cost;
    result.cost_trace.push_back(result.final_cost);
    return result;
}

Registrar make_icp_registrar(const RegistrationConfig& cfg) {
    return [cfg](const PointCloud& target, const PointCloud& source) {
        return icp_register(target, source, cfg);
    };
}

Registrar make_fixed_registrar(const Pose& pose) {
    return [pose](const PointCloud&, const PointCloud&) {
        RegistrationResult r;
        r.pose = pose;
        r.converged = true;
        r.iterations_used = 1;
        r.final_cost = 0.0;
        return r;
    };
}

}  // namespace dynreg
