#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "dynreg/detection.hpp"
#include "dynreg/geometry.hpp"

namespace dynreg {

/// Binary cloud frames: consecutive little-endian float32 quadruplets
/// (x, y, z, intensity). Reading always yields an intensity channel; writing a
/// cloud without one emits zeros. Round trips of intensity-bearing clouds are
/// bit-identical.
PointCloud read_cloud_bin(const std::filesystem::path& path);
void write_cloud_bin(const std::filesystem::path& path, const PointCloud& cloud);

/// Detection text files, one line per object:
///   frame label score x y z l w h yaw
/// yaw in radians about +z, z is the box center. `#` starts a comment line.
/// Reader groups lines by frame (file order kept within a frame) and leaves
/// all states Unknown; errors carry 1-based line numbers.
std::map<std::int64_t, DetectionSet> read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path,
                      const std::vector<DetectionSet>& sets);

/// Pose text files, one line per pose: the row-major upper 3x4 of the
/// homogeneous matrix as 12 decimals (shortest exact representation, so
/// write-then-read is bit-identical). The reader re-orthonormalizes rotations
/// whose drift exceeds 1e-9 and rejects drift beyond 1e-6.
std::vector<Pose> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);

/// Per-point origin tag controlling PLY vertex color:
/// environment white, static object green, dynamic object red.
enum class PointTag { Environment, StaticObject, DynamicObject };

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<PointTag>& tags);

/// Resolved layout of one on-disk sequence: numbered cloud frames plus the
/// optional detection and ground-truth pose files.
struct SequenceManifest {
    std::vector<std::int64_t> frame_ids;               // strictly increasing
    std::vector<std::filesystem::path> cloud_paths;    // parallel to frame_ids
    std::filesystem::path detections_path;             // empty when absent
    std::filesystem::path gt_pose_path;                // empty when absent

    std::size_t size() const { return frame_ids.size(); }
};

/// Scans `cloud_dir` for *.bin frames named by a decimal frame id
/// (e.g. 000012.bin). Paths passed for detections / ground truth must exist.
SequenceManifest load_sequence(const std::filesystem::path& cloud_dir,
                               const std::filesystem::path& detections_path = {},
                               const std::filesystem::path& gt_pose_path = {});

}  // namespace dynreg
