#include "dynreg/pipeline.hpp"

#include <algorithm>

#include "dynreg/errors.hpp"

namespace dynreg {

namespace {

void check_assoc(const DetectionSet& prev, const DetectionSet& curr,
                 const Association& assoc) {
    std::vector<char> prev_seen(prev.size(), 0), curr_seen(curr.size(), 0);
    for (const Association::Pair& p : assoc.pairs) {
        if (p.prev < 0 || static_cast<std::size_t>(p.prev) >= prev.size() || p.curr < 0 ||
            static_cast<std::size_t>(p.curr) >= curr.size() || prev_seen[p.prev] ||
            curr_seen[p.curr]) {
            throw InvalidInputError("motion_segment: association inconsistent with detection sets");
        }
        prev_seen[p.prev] = 1;
        curr_seen[p.curr] = 1;
    }
}

std::vector<PointCloud> select_static(const CloudPartition& part,
                                      const std::vector<MotionState>& states) {
    std::vector<PointCloud> buckets;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i] == MotionState::Static) buckets.push_back(part.inside[i]);
    }
    return buckets;
}

SegmentationOutcome segment_under_pose(const DetectionSet& d_prev, const DetectionSet& d_curr,
                                       const Pose& pose, const PipelineOptions& opts,
                                       Association& assoc_out) {
    const DetectionSet curr_reproj = reproject(d_curr, pose);
    assoc_out = associate(d_prev, curr_reproj, opts.gate);
    return motion_segment(d_prev, curr_reproj, assoc_out, opts.motion_threshold);
}

struct StateSnapshot {
    std::vector<MotionState> prev;
    std::vector<MotionState> curr;

    bool operator==(const StateSnapshot&) const = default;
};

StateSnapshot snapshot(const SegmentationOutcome& seg) {
    return {seg.prev_states, seg.curr_states};
}

void validate_inputs(const PointCloud& m_prev, const PointCloud& m_curr,
                     const DetectionSet& d_prev, const DetectionSet& d_curr,
                     const PipelineOptions& opts) {
    if (!opts.is_valid()) throw InvalidParameterError("pipeline: invalid options");
    if (!m_prev.is_consistent() || !m_curr.is_consistent()) {
        throw InvalidInputError("pipeline: cloud intensity length mismatch");
    }
    if (!d_prev.is_consistent() || !d_curr.is_consistent()) {
        throw InvalidInputError("pipeline: detection state length mismatch");
    }
    if (d_prev.frame_id >= d_curr.frame_id) {
        throw InvalidInputError("pipeline: detection frame ids must be increasing");
    }
}

}  // namespace

SegmentationOutcome motion_segment(const DetectionSet& prev,
                                   const DetectionSet& curr_reprojected,
                                   const Association& assoc, MotionThreshold thresh) {
    if (!thresh.is_valid()) throw InvalidParameterError("motion_segment: threshold must be > 0");
    check_assoc(prev, curr_reprojected, assoc);

    SegmentationOutcome out;
    out.prev_states.assign(prev.size(), MotionState::Dynamic);
    out.curr_states.assign(curr_reprojected.size(), MotionState::Dynamic);
    out.pair_errors.reserve(assoc.pairs.size());
    for (const Association::Pair& p : assoc.pairs) {
        const double error =
            bev_distance(prev.detections[p.prev], curr_reprojected.detections[p.curr]);
        const MotionState state =
            error <= thresh.meters ? MotionState::Static : MotionState::Dynamic;
        out.prev_states[p.prev] = state;
        out.curr_states[p.curr] = state;
        out.pair_errors.push_back(error);
    }
    return out;
}

std::pair<PointCloud, PointCloud> merge_and_concatenate(
    const std::vector<PointCloud>& static_prev, const std::vector<PointCloud>& static_curr,
    const PointCloud& env_prev, const PointCloud& env_curr) {
    PointCloud out_prev = env_prev;
    for (const PointCloud& bucket : static_prev) out_prev.append(bucket);
    PointCloud out_curr = env_curr;
    for (const PointCloud& bucket : static_curr) out_curr.append(bucket);
    return {std::move(out_prev), std::move(out_curr)};
}

RemoveAllOutcome remove_all_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                     const DetectionSet& d_prev, const DetectionSet& d_curr,
                                     const Registrar& registrar, double margin) {
    RemoveAllOutcome out;
    out.prev = partition_cloud(m_prev, d_prev, margin);
    out.curr = partition_cloud(m_curr, d_curr, margin);
    out.initial = registrar(out.prev.outside, out.curr.outside);
    return out;
}

namespace {

FramePairResult run_pipeline(const PointCloud& m_prev, const PointCloud& m_curr,
                             const DetectionSet& d_prev, const DetectionSet& d_curr,
                             const Registrar& registrar, const PipelineOptions& opts,
                             bool iterate) {
    validate_inputs(m_prev, m_curr, d_prev, d_curr, opts);

    FramePairResult result;
    result.dets_prev = d_prev;
    result.dets_curr = d_curr;

    RemoveAllOutcome removed =
        remove_all_register(m_prev, m_curr, d_prev, d_curr, registrar, opts.margin);
    const Pose initial_pose = removed.initial.pose;
    result.pose_trace.push_back(initial_pose);

    // First pass: segment under T0, merge the static sets, re-register.
    Association assoc0;
    SegmentationOutcome seg0 =
        segment_under_pose(d_prev, d_curr, initial_pose, opts, assoc0);
    auto merged = merge_and_concatenate(select_static(removed.prev, seg0.prev_states),
                                        select_static(removed.curr, seg0.curr_states),
                                        removed.prev.outside, removed.curr.outside);
    Pose pose = registrar(merged.first, merged.second).pose;
    result.pose_trace.push_back(pose);
    result.iterations = 1;

    Association assoc = assoc0;
    SegmentationOutcome seg = seg0;
    if (iterate) {
        seg = segment_under_pose(d_prev, d_curr, pose, opts, assoc);
        StateSnapshot previous = snapshot(seg0);
        StateSnapshot current = snapshot(seg);
        std::vector<StateSnapshot> history{previous, current};

        auto keep_looping = [&] {
            const bool prev_changed = current.prev != previous.prev;
            const bool curr_changed = current.curr != previous.curr;
            return opts.strict_loop ? (prev_changed && curr_changed)
                                          : (prev_changed || curr_changed);
        };

        while (keep_looping() && result.iterations < opts.max_loop) {
            merged = merge_and_concatenate(select_static(removed.prev, seg.prev_states),
                                           select_static(removed.curr, seg.curr_states),
                                           removed.prev.outside, removed.curr.outside);
            pose = registrar(merged.first, merged.second).pose;
            result.pose_trace.push_back(pose);
            ++result.iterations;

            previous = current;
            seg = segment_under_pose(d_prev, d_curr, pose, opts, assoc);
            current = snapshot(seg);
            // A segmentation seen before means the loop has closed a cycle;
            // continuing could only replay it.
            if (std::find(history.begin(), history.end(), current) != history.end()) break;
            history.push_back(current);
        }
    } else {
        // Single-pass mode reports the first segmentation with the refined pose.
        seg = seg0;
        assoc = assoc0;
    }

    result.pose = pose;
    result.assoc = assoc;
    result.pair_errors = seg.pair_errors;
    result.dets_prev.states = seg.prev_states;
    result.dets_curr.states = seg.curr_states;
    auto final_env = merge_and_concatenate(select_static(removed.prev, seg.prev_states),
                                           select_static(removed.curr, seg.curr_states),
                                           removed.prev.outside, removed.curr.outside);
    result.env_prev = std::move(final_env.first);
    result.env_curr = std::move(final_env.second);
    result.part_prev = std::move(removed.prev);
    result.part_curr = std::move(removed.curr);
    return result;
}

}  // namespace

FramePairResult dynamic_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                 const DetectionSet& d_prev, const DetectionSet& d_curr,
                                 const Registrar& registrar, const PipelineOptions& opts) {
    return run_pipeline(m_prev, m_curr, d_prev, d_curr, registrar, opts, false);
}

FramePairResult iterative_dynamic_register(const PointCloud& m_prev, const PointCloud& m_curr,
                                           const DetectionSet& d_prev, const DetectionSet& d_curr,
                                           const Registrar& registrar,
                                           const PipelineOptions& opts) {
    return run_pipeline(m_prev, m_curr, d_prev, d_curr, registrar, opts, true);
}

}  // namespace dynreg
