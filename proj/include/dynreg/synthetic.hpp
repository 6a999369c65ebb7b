#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dynreg/detection.hpp"
#include "dynreg/geometry.hpp"

namespace dynreg {

/// One ego motion step: the pair pose mapping frame t into frame t-1
/// (yaw about +z plus translation).
struct EgoStep {
    double yaw = 0.0;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

/// One simulated object: a box standing on the ground plane, translating at a
/// constant world BEV velocity (zero velocity = parked).
struct BoxSpec {
    Label label = Label::Car;
    double length = 4.2;
    double width = 1.8;
    double height = 1.6;
    double x = 0.0;    // initial world BEV position
    double y = 0.0;
    double yaw = 0.0;  // world heading, radians
    double vx = 0.0;   // meters per frame
    double vy = 0.0;
    int points = 250;  // surface samples per frame

    bool moving() const { return vx != 0.0 || vy != 0.0; }
};

/// Detector imperfections: Gaussian BEV center jitter, per-detection dropout,
/// and uniformly placed false positives (expected count per frame).
struct NoiseSpec {
    double sigma = 0.0;
    double dropout = 0.0;
    double false_positives = 0.0;
};

/// Full scene description. World coordinates are the frame-0 ego frame; the
/// environment is a ground plane at `ground_z` plus `walls` vertical panels,
/// all inside the BEV extent. `ego` may hold one step per pair, a single step
/// replicated for every pair, or nothing (identity motion).
struct SceneSpec {
    std::uint64_t seed = 1;
    int frames = 5;
    std::vector<EgoStep> ego;
    int env_points = 4000;
    int walls = 6;
    double ground_z = -1.5;
    double x_min = 0.0;
    double x_max = 40.0;
    double y_min = -20.0;
    double y_max = 20.0;
    std::vector<BoxSpec> boxes;
    NoiseSpec noise;
};

/// Everything the generator knows about the scene it produced. Detection
/// states carry the ground truth (moving box -> Dynamic, parked -> Static,
/// false positive -> Unknown).
struct SceneTruth {
    std::vector<PointCloud> clouds;                   // per frame, ego coordinates
    std::vector<std::vector<int>> provenance;         // per point: -1 env, else box index
    std::vector<DetectionSet> detections;             // per frame, truth states
    std::vector<std::vector<int>> detection_origin;   // box index, -1 for false positives
    std::vector<Pose> pair_poses;                     // frames-1, frame t into t-1
    std::vector<Pose> ego_poses;                      // frames, absolute world poses
};

/// Deterministic for a fixed spec: the same seed always yields bit-identical
/// clouds, detections, and poses.
SceneTruth generate(const SceneSpec& spec);

/// Key-value scene description, one entry per line (`#` comments allowed):
///   seed N | frames N | env_points N | walls N | ground_z F
///   extent XMIN XMAX YMIN YMAX
///   ego YAW TX TY TZ                    (repeatable, one per pair)
///   box LABEL L W H X Y YAW VX VY POINTS (repeatable)
///   noise SIGMA DROPOUT FP_RATE
/// Missing keys keep the defaults above; a missing ego defaults to a single
/// 0.8 m forward step.
SceneSpec parse_scene_spec_text(const std::string& text);
SceneSpec parse_scene_spec(const std::filesystem::path& path);

/// Writes clouds/<frame>.bin, detections.txt, poses.txt (pair poses), and
/// true_states.txt (`frame obj_index state` lines) under out_dir.
void emit_scene(const SceneTruth& truth, const std::filesystem::path& out_dir);

}  // namespace dynreg
