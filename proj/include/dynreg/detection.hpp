#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynreg/geometry.hpp"

namespace dynreg {

enum class Label { Car, Cyclist, Pedestrian };

enum class MotionState { Unknown, Static, Dynamic };

std::string to_string(Label label);
std::string to_string(MotionState state);
bool label_from_string(const std::string& token, Label& out);
bool motion_state_from_string(const std::string& token, MotionState& out);

/// One detected cuboid: center, extents, heading about +z, class, confidence.
struct Detection {
    Point3 center = Point3::Zero();      // box center, meters
    double length = 0.0;                 // extent along heading, meters
    double width = 0.0;
    double height = 0.0;
    double yaw = 0.0;                    // radians about +z, in (-pi, pi]
    Label label = Label::Car;
    double score = 0.0;                  // confidence in [0, 1]

    bool is_valid() const {
        return center.allFinite() && length > 0.0 && width > 0.0 && height > 0.0 &&
               std::isfinite(yaw) && score >= 0.0 && score <= 1.0;
    }
};

/// All detections of one frame together with per-object motion states.
struct DetectionSet {
    std::int64_t frame_id = 0;
    std::vector<Detection> detections;
    std::vector<MotionState> states;  // same length as detections

    std::size_t size() const { return detections.size(); }
    bool empty() const { return detections.empty(); }

    bool is_consistent() const { return states.size() == detections.size(); }

    void add(const Detection& det, MotionState state = MotionState::Unknown) {
        detections.push_back(det);
        states.push_back(state);
    }
};

/// Drops detections with score below the minimum; order preserved.
DetectionSet filter_by_score(const DetectionSet& dets, double score_min);

}  // namespace dynreg
