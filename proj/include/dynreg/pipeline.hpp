#pragma once

#include <utility>
#include <vector>

#include "dynreg/association.hpp"
#include "dynreg/cuboid.hpp"
#include "dynreg/detection.hpp"
#include "dynreg/registration.hpp"

namespace dynreg {

/// BEV reprojection error above which a matched object counts as moving.
struct MotionThreshold {
    double meters = 0.5;

    bool is_valid() const { return meters > 0.0; }
};

struct PipelineOptions {
    MotionThreshold motion_threshold{};
    double gate = kDefaultAssociationGate;
    double margin = kDefaultCuboidMargin;
    int max_loop = 10;
    /// Loop on the literal two-sided condition (stop as soon as either
    /// frame's static set repeats) instead of looping until both repeat.
    bool strict_loop = false;

    bool is_valid() const {
        return motion_threshold.is_valid() && gate > 0.0 && margin >= 0.0 && max_loop >= 1;
    }
};

/// Per-frame motion states plus the per-pair BEV errors that produced them.
struct SegmentationOutcome {
    std::vector<MotionState> prev_states;
    std::vector<MotionState> curr_states;
    std::vector<double> pair_errors;  // aligned with the association's pairs
};

/// Classifies every matched pair by its BEV reprojection error (error within
/// the threshold means both sides are static); unmatched detections are
/// conservatively marked dynamic so their points never rejoin the environment.
SegmentationOutcome motion_segment(const DetectionSet& prev,
                                   const DetectionSet& curr_reprojected,
                                   const Association& assoc, MotionThreshold thresh);

/// Appends each frame's static-object points to that frame's environment
/// cloud. No transformation is applied; points stay in their native frames.
std::pair<PointCloud, PointCloud> merge_and_concatenate(
    const std::vector<PointCloud>& static_prev, const std::vector<PointCloud>& static_curr,
    const PointCloud& env_prev, const PointCloud& env_curr);

/// Object removal plus the initial registration on the cleaned clouds; the
/// shared head of the plain remove-all mode and the dynamic pipeline.
struct RemoveAllOutcome {
    CloudPartition prev;
    CloudPartition curr;
    RegistrationResult initial;  // T0 on the object-free clouds
};

RemoveAllOutcome remove_all_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                     const DetectionSet& d_prev, const DetectionSet& d_curr,
                                     const Registrar& registrar, double margin);

struct FramePairResult {
    Pose pose;  // maps the current frame into the previous frame
    DetectionSet dets_prev;  // input detections with final motion states
    DetectionSet dets_curr;
    Association assoc;                // final association
    std::vector<double> pair_errors;  // aligned with assoc.pairs
    int iterations = 0;               // dynamic-registration passes (>= 1)
    std::vector<Pose> pose_trace;     // initial pose, then one entry per pass
    PointCloud env_prev;              // environment merged with final static sets
    PointCloud env_curr;
    CloudPartition part_prev;  // remove-all partition of the inputs
    CloudPartition part_curr;
};

/// One pass of dynamic registration: remove all objects, register, reproject,
/// segment, merge the static objects back, register again.
FramePairResult dynamic_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                 const DetectionSet& d_prev, const DetectionSet& d_curr,
                                 const Registrar& registrar, const PipelineOptions& opts);

/// Dynamic registration iterated until the static sets stop changing (or a
/// previously seen segmentation recurs, or max_loop passes are spent).
FramePairResult iterative_dynamic_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                           const DetectionSet& d_prev, const DetectionSet& d_curr,
                                           const Registrar& registrar,
                                           const PipelineOptions& opts);

}  // namespace dynreg
