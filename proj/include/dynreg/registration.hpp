#pragma once

#include <functional>
#include <vector>

#include "dynreg/geometry.hpp"

namespace dynreg {

struct RegistrationConfig {
    int max_iterations = 50;
    double translation_epsilon = 1e-4;        // meters
    double rotation_epsilon = 1e-4;           // radians
    double max_correspondence_distance = 1.0; // meters, ICP gate
    double ndt_voxel = 1.0;                   // meters
    Pose initial_guess = Pose::identity();

    bool is_valid() const {
        return max_iterations >= 1 && translation_epsilon > 0.0 &&
               rotation_epsilon > 0.0 && max_correspondence_distance > 0.0 &&
               ndt_voxel > 0.0 && initial_guess.is_valid();
    }
};

struct RegistrationResult {
    Pose pose;                  // maps source (current) frame into target (previous)
    double final_cost = 0.0;    // nonnegative; lower is better for both backends
    int iterations_used = 0;
    bool converged = false;
    std::vector<double> cost_trace;  // monitored objective per iteration
};

/// Point-to-point ICP with a hard correspondence-distance gate. The monitored
/// objective is the mean of per-point squared distances capped at the gate,
/// which is non-increasing across iterations.
RegistrationResult icp_register(const PointCloud& target, const PointCloud& source,
                                const RegistrationConfig& cfg);

/// Normal Distributions Transform: per-voxel Gaussians over the target
/// (eigenvalue-floored covariances), fitted by damped Gauss-Newton steps on a
/// translation + centroid-anchored rotation. A broad Gaussian-score stage
/// finds the basin; the monitored objective is then the mean capped half
/// squared Mahalanobis distance to each point's nearest cell, so the cost is
/// nonnegative, non-increasing across accepted steps, and lower-is-better
/// like ICP's.
RegistrationResult ndt_register(const PointCloud& target, const PointCloud& source,
                                const RegistrationConfig& cfg);

/// Pure scan-matching callback: (target, source) -> result. Identical inputs
/// must yield identical results.
using Registrar =
    std::function<RegistrationResult(const PointCloud&, const PointCloud&)>;

Registrar make_icp_registrar(const RegistrationConfig& cfg);
Registrar make_ndt_registrar(const RegistrationConfig& cfg);

/// Bypasses scan matching and returns a fixed pose; used to inject known
/// ground-truth motion into the pipeline.
Registrar make_fixed_registrar(const Pose& pose);

}  // namespace dynreg
