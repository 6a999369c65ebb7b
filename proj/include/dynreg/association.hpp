#pragma once

#include <Eigen/Core>

#include <vector>

#include "dynreg/detection.hpp"
#include "dynreg/geometry.hpp"

namespace dynreg {

inline constexpr double kDefaultAssociationGate = 2.0;  // meters

/// Matched index pairs between two detection sets plus the leftovers on each
/// side. `prev`/`curr` index into the respective DetectionSet.
struct Association {
    struct Pair {
        int prev = 0;
        int curr = 0;
        double distance = 0.0;  // BEV center distance, meters
    };
    std::vector<Pair> pairs;
    std::vector<int> unmatched_prev;
    std::vector<int> unmatched_curr;

    double total_cost() const {
        double sum = 0.0;
        for (const Pair& p : pairs) sum += p.distance;
        return sum;
    }
};

/// Rectangular assignment costs; infinity marks an infeasible (gated) pair.
struct CostMatrix {
    Eigen::MatrixXd costs;  // rows: prev detections, cols: curr detections

    static double infeasible() { return std::numeric_limits<double>::infinity(); }

    Eigen::Index rows() const { return costs.rows(); }
    Eigen::Index cols() const { return costs.cols(); }
};

/// Maps detection centers by the pose and adds its extracted yaw to each
/// heading; extents, labels, scores and states are untouched.
DetectionSet reproject(const DetectionSet& dets, const Pose& pose);

/// Minimum-cost assignment over the feasible entries, maximizing the number
/// of matches first (rectangular matrices handled by internal padding).
/// Infeasible entries are never matched.
Association hungarian(const CostMatrix& costs);

/// Builds a BEV center-distance cost matrix between the two sets, gates
/// distances above `gate` and any cross-class pair, then solves it.
Association associate(const DetectionSet& prev, const DetectionSet& curr_reprojected,
                      double gate = kDefaultAssociationGate);

/// BEV (x, y) Euclidean distance between two detection centers.
double bev_distance(const Detection& a, const Detection& b);

}  // namespace dynreg
