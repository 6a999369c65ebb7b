#include "dynreg/detection.hpp"

namespace dynreg {

std::string to_string(Label label) {
    switch (label) {
        case Label::Car: return "Car";
        case Label::Cyclist: return "Cyclist";
        case Label::Pedestrian: return "Pedestrian";
    }
    return "Car";
}

std::string to_string(MotionState state) {
    switch (state) {
        case MotionState::Unknown: return "unknown";
        case MotionState::Static: return "static";
        case MotionState::Dynamic: return "dynamic";
    }
    return "unknown";
}

bool label_from_string(const std::string& token, Label& out) {
    if (token == "Car") out = Label::Car;
    else if (token == "Cyclist") out = Label::Cyclist;
    else if (token == "Pedestrian") out = Label::Pedestrian;
    else return false;
    return true;
}

bool motion_state_from_string(const std::string& token, MotionState& out) {
    if (token == "unknown") out = MotionState::Unknown;
    else if (token == "static") out = MotionState::Static;
    else if (token == "dynamic") out = MotionState::Dynamic;
    else return false;
    return true;
}

DetectionSet filter_by_score(const DetectionSet& dets, double score_min) {
    DetectionSet out;
    out.frame_id = dets.frame_id;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets.detections[i].score >= score_min) {
            out.add(dets.detections[i], dets.states[i]);
        }
    }
    return out;
}

}  // namespace dynreg
