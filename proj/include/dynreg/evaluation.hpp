#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dynreg/geometry.hpp"

namespace dynreg {

/// Absolute poses in frame-0 coordinates, one per frame.
struct Trajectory {
    std::vector<Pose> poses;
    std::vector<std::int64_t> frame_ids;

    std::size_t size() const { return poses.size(); }
};

/// Translational relative pose error over a sequence of frame pairs.
struct RpeReport {
    std::vector<double> errors;  // meters, one per pair
    double rmse = 0.0;           // sqrt(mean of squared errors)
    std::size_t pairs = 0;
};

/// Per-pair error is the translation norm of gt_i^-1 * est_i; both sequences
/// hold pair poses (frame t mapped into t-1) in the same convention.
RpeReport rpe_trans(const std::vector<Pose>& gt_pairs, const std::vector<Pose>& est_pairs);

/// Chains pair poses left-to-right from identity: absolute_k = pair_1 * ... *
/// pair_k, so positions land in frame-0 coordinates. N pairs yield N+1 poses.
Trajectory accumulate(const std::vector<Pose>& pair_poses);

/// One (sequence, backend, mode) cell of the comparison table.
struct ReportCell {
    std::string seq;
    std::string backend;
    std::string mode;
    RpeReport report;
};

/// CSV with header `seq,backend,mode,rmse,pairs`, data rows sorted by
/// (seq, backend, mode), rmse to 4 decimals, then one mean row per
/// (backend, mode) with seq = "mean" and pairs summed.
std::string report_csv(const std::vector<ReportCell>& cells);

}  // namespace dynreg
