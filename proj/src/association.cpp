#include "dynreg/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynreg/errors.hpp"

namespace dynreg {

DetectionSet reproject(const DetectionSet& dets, const Pose& pose) {
    if (!pose.is_valid(1e-6)) throw InvalidParameterError("reproject: invalid pose");
    DetectionSet out = dets;
    const double pose_yaw = pose.yaw();
    for (Detection& det : out.detections) {
        det.center = pose.apply(det.center);
        det.yaw = normalize_angle(det.yaw + pose_yaw);
    }
    return out;
}

double bev_distance(const Detection& a, const Detection& b) {
    return (a.center.head<2>() - b.center.head<2>()).norm();
}

namespace {

// Shortest-augmenting-path assignment on a square matrix (Jonker-Volgenant
// potentials). Column scans go in increasing index order with strict
// comparisons, so tied optima resolve toward low indices deterministically.
std::vector<int> solve_square(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match_col(n + 1, 0);  // column -> row (1-based), 0 = free
    std::vector<int> way(n + 1, 0);

    for (int row = 1; row <= n; ++row) {
        match_col[0] = row;
        int j0 = 0;
        std::vector<double> min_reduced(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match_col[j0];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (reduced < min_reduced[j]) {
                    min_reduced[j] = reduced;
                    way[j] = j0;
                }
                if (min_reduced[j] < delta) {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_reduced[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            const int j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (match_col[j] != 0) row_to_col[match_col[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

Association hungarian(const CostMatrix& costs) {
    const int rows = static_cast<int>(costs.rows());
    const int cols = static_cast<int>(costs.cols());
    Association out;

    double max_finite = 0.0;
    int finite_count = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double value = costs.costs(r, c);
            if (value < 0.0) throw InvalidParameterError("hungarian: negative cost entry");
            if (std::isfinite(value)) {
                max_finite = std::max(max_finite, value);
                ++finite_count;
            }
        }
    }

    if (finite_count == 0) {
        for (int r = 0; r < rows; ++r) out.unmatched_prev.push_back(r);
        for (int c = 0; c < cols; ++c) out.unmatched_curr.push_back(c);
        return out;
    }

    // Pad to square; one shared surrogate cost for padding and infeasible
    // entries makes the solver maximize feasible matches first, then minimize
    // their total cost.
    const int n = std::max(rows, cols);
    const double big = (max_finite + 1.0) * (n + 1);
    Eigen::MatrixXd padded = Eigen::MatrixXd::Constant(n, n, big);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (std::isfinite(costs.costs(r, c))) padded(r, c) = costs.costs(r, c);
        }
    }

    const std::vector<int> row_to_col = solve_square(padded);
    std::vector<char> curr_matched(cols, 0);
    for (int r = 0; r < rows; ++r) {
        const int c = row_to_col[r];
        if (c >= 0 && c < cols && std::isfinite(costs.costs(r, c))) {
            out.pairs.push_back({r, c, costs.costs(r, c)});
            curr_matched[c] = 1;
        } else {
            out.unmatched_prev.push_back(r);
        }
    }
    for (int c = 0; c < cols; ++c) {
        if (!curr_matched[c]) out.unmatched_curr.push_back(c);
    }
    return out;
}

Association associate(const DetectionSet& prev, const DetectionSet& curr_reprojected,
                      double gate) {
    if (!(gate > 0.0)) throw InvalidParameterError("associate: gate must be > 0");
    CostMatrix costs;
    costs.costs.resize(static_cast<Eigen::Index>(prev.size()),
                       static_cast<Eigen::Index>(curr_reprojected.size()));
    for (std::size_t r = 0; r < prev.size(); ++r) {
        for (std::size_t c = 0; c < curr_reprojected.size(); ++c) {
            const Detection& a = prev.detections[r];
            const Detection& b = curr_reprojected.detections[c];
            const double d = bev_distance(a, b);
            const bool feasible = a.label == b.label && d <= gate;
            costs.costs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                feasible ? d : CostMatrix::infeasible();
        }
    }
    return hungarian(costs);
}

}  // namespace dynreg
