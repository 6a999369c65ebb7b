#include "dynreg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "dynreg/errors.hpp"

namespace dynreg {

namespace {

std::string quoted(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + quoted(path));
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError("read failure on " + quoted(path));
    return bytes;
}

float float_from_le(const char* bytes) {
    std::uint32_t bits = static_cast<std::uint8_t>(bytes[0]) |
                         static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[1])) << 8 |
                         static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[2])) << 16 |
                         static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[3])) << 24;
    float value;
    std::memcpy(&value, &bits, sizeof value);
    return value;
}

void float_to_le(float value, char* bytes) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    bytes[0] = static_cast<char>(bits & 0xff);
    bytes[1] = static_cast<char>((bits >> 8) & 0xff);
    bytes[2] = static_cast<char>((bits >> 16) & 0xff);
    bytes[3] = static_cast<char>((bits >> 24) & 0xff);
}

// Shortest decimal that parses back to exactly the same value.
void append_number(std::string& out, double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, res.ptr);
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

double parse_double(const std::string& token, const std::filesystem::path& path,
                    std::size_t line_no) {
    double value = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        std::ostringstream msg;
        msg << quoted(path) << " line " << line_no << ": bad number '" << token << "'";
        throw FormatError(msg.str());
    }
    return value;
}

std::int64_t parse_frame_id(const std::string& token, const std::filesystem::path& path,
                            std::size_t line_no) {
    std::int64_t value = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || value < 0) {
        std::ostringstream msg;
        msg << quoted(path) << " line " << line_no << ": bad frame id '" << token << "'";
        throw FormatError(msg.str());
    }
    return value;
}

// Yields (1-based line number, content) pairs, skipping blank and `#` lines.
template <typename Fn>
void for_each_data_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + quoted(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        fn(line_no, line);
    }
    if (in.bad()) throw FormatError("read failure on " + quoted(path));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw FormatError("cannot open " + quoted(path) + " for writing");
    out << text;
    out.flush();
    if (!out) throw FormatError("write failure on " + quoted(path));
}

}  // namespace

PointCloud read_cloud_bin(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_all_bytes(path);
    if (bytes.size() % 16 != 0) {
        std::ostringstream msg;
        msg << quoted(path) << ": size " << bytes.size() << " is not a multiple of 16 bytes";
        throw FormatError(msg.str());
    }
    PointCloud cloud;
    const std::size_t n = bytes.size() / 16;
    cloud.points.reserve(n);
    cloud.intensities.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const char* rec = bytes.data() + 16 * i;
        const float x = float_from_le(rec);
        const float y = float_from_le(rec + 4);
        const float z = float_from_le(rec + 8);
        const float intensity = float_from_le(rec + 12);
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
            !std::isfinite(intensity)) {
            std::ostringstream msg;
            msg << quoted(path) << ": non-finite value at point " << i + 1 << " (byte offset "
                << 16 * i + 1 << ")";
            throw FormatError(msg.str());
        }
        cloud.points.emplace_back(x, y, z);
        cloud.intensities.push_back(intensity);
    }
    return cloud;
}

void write_cloud_bin(const std::filesystem::path& path, const PointCloud& cloud) {
    if (!cloud.is_consistent()) throw InvalidInputError("write_cloud_bin: inconsistent cloud");
    std::string bytes(cloud.size() * 16, '\0');
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        char* rec = bytes.data() + 16 * i;
        float_to_le(static_cast<float>(cloud.points[i].x()), rec);
        float_to_le(static_cast<float>(cloud.points[i].y()), rec + 4);
        float_to_le(static_cast<float>(cloud.points[i].z()), rec + 8);
        float_to_le(cloud.has_intensities() ? cloud.intensities[i] : 0.0f, rec + 12);
    }
    write_text_file(path, bytes);
}

std::map<std::int64_t, DetectionSet> read_detections(const std::filesystem::path& path) {
    std::map<std::int64_t, DetectionSet> out;
    for_each_data_line(path, [&](std::size_t line_no, const std::string& line) {
        const std::vector<std::string> tok = split_ws(line);
        if (tok.size() != 10) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no << ": expected 10 fields, got "
                << tok.size();
            throw FormatError(msg.str());
        }
        const std::int64_t frame = parse_frame_id(tok[0], path, line_no);
        Detection det;
        if (!label_from_string(tok[1], det.label)) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no << ": unknown label '" << tok[1] << "'";
            throw FormatError(msg.str());
        }
        det.score = parse_double(tok[2], path, line_no);
        det.center = Point3(parse_double(tok[3], path, line_no),
                            parse_double(tok[4], path, line_no),
                            parse_double(tok[5], path, line_no));
        det.length = parse_double(tok[6], path, line_no);
        det.width = parse_double(tok[7], path, line_no);
        det.height = parse_double(tok[8], path, line_no);
        det.yaw = normalize_angle(parse_double(tok[9], path, line_no));
        if (!det.is_valid()) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no << ": invalid detection values";
            throw FormatError(msg.str());
        }
        DetectionSet& set = out[frame];
        set.frame_id = frame;
        set.add(det, MotionState::Unknown);
    });
    return out;
}

void write_detections(const std::filesystem::path& path,
                      const std::vector<DetectionSet>& sets) {
    std::string text;
    for (const DetectionSet& set : sets) {
        if (!set.is_consistent()) {
            throw InvalidInputError("write_detections: inconsistent detection set");
        }
        for (const Detection& det : set.detections) {
            if (!det.is_valid()) throw InvalidInputError("write_detections: invalid detection");
            append_number(text, static_cast<double>(set.frame_id));
            text += ' ';
            text += to_string(det.label);
            text += ' ';
            append_number(text, det.score);
            text += ' ';
            append_number(text, det.center.x());
            text += ' ';
            append_number(text, det.center.y());
            text += ' ';
            append_number(text, det.center.z());
            text += ' ';
            append_number(text, det.length);
            text += ' ';
            append_number(text, det.width);
            text += ' ';
            append_number(text, det.height);
            text += ' ';
            append_number(text, det.yaw);
            text += '\n';
        }
    }
    write_text_file(path, text);
}

std::vector<Pose> read_poses(const std::filesystem::path& path) {
    std::vector<Pose> out;
    for_each_data_line(path, [&](std::size_t line_no, const std::string& line) {
        const std::vector<std::string> tok = split_ws(line);
        if (tok.size() != 12) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no << ": expected 12 fields, got "
                << tok.size();
            throw FormatError(msg.str());
        }
        double v[12];
        for (int i = 0; i < 12; ++i) v[i] = parse_double(tok[i], path, line_no);
        Pose pose;
        pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
        pose.translation = Eigen::Vector3d(v[3], v[7], v[11]);
        if (!pose.translation.allFinite() || !pose.rotation.allFinite() ||
            pose.rotation.determinant() <= 0.0) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no << ": not a rigid transform";
            throw FormatError(msg.str());
        }
        const double drift = pose.orthonormality_drift();
        if (drift > 1e-6) {
            std::ostringstream msg;
            msg << quoted(path) << " line " << line_no
                << ": rotation drifts from orthonormal by " << drift;
            throw FormatError(msg.str());
        }
        out.push_back(pose.renormalized());  // no-op below 1e-9 drift
    });
    return out;
}

void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses) {
    std::string text;
    for (const Pose& pose : poses) {
        if (!pose.is_valid(1e-6)) throw InvalidInputError("write_poses: invalid pose");
        const Eigen::Matrix3d& r = pose.rotation;
        const Eigen::Vector3d& t = pose.translation;
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) {
                append_number(text, r(row, col));
                text += ' ';
            }
            append_number(text, t(row));
            text += row == 2 ? '\n' : ' ';
        }
    }
    write_text_file(path, text);
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<PointTag>& tags) {
    if (tags.size() != cloud.size()) {
        throw InvalidInputError("write_ply: tag count does not match point count");
    }
    std::string text;
    text += "ply\nformat ascii 1.0\nelement vertex ";
    append_number(text, static_cast<double>(cloud.size()));
    text +=
        "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        append_number(text, static_cast<double>(static_cast<float>(cloud.points[i].x())));
        text += ' ';
        append_number(text, static_cast<double>(static_cast<float>(cloud.points[i].y())));
        text += ' ';
        append_number(text, static_cast<double>(static_cast<float>(cloud.points[i].z())));
        switch (tags[i]) {
            case PointTag::Environment: text += " 255 255 255\n"; break;
            case PointTag::StaticObject: text += " 0 255 0\n"; break;
            case PointTag::DynamicObject: text += " 255 0 0\n"; break;
        }
    }
    write_text_file(path, text);
}

SequenceManifest load_sequence(const std::filesystem::path& cloud_dir,
                               const std::filesystem::path& detections_path,
                               const std::filesystem::path& gt_pose_path) {
    if (!std::filesystem::is_directory(cloud_dir)) {
        throw FormatError("cloud directory " + quoted(cloud_dir) + " does not exist");
    }
    std::vector<std::pair<std::int64_t, std::filesystem::path>> frames;
    for (const auto& entry : std::filesystem::directory_iterator(cloud_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".bin") continue;
        const std::string stem = entry.path().stem().string();
        std::int64_t id = 0;
        auto res = std::from_chars(stem.data(), stem.data() + stem.size(), id);
        if (res.ec != std::errc() || res.ptr != stem.data() + stem.size() || id < 0) {
            throw FormatError("cloud file " + quoted(entry.path()) +
                              " is not named by a frame id");
        }
        frames.emplace_back(id, entry.path());
    }
    std::sort(frames.begin(), frames.end());
    SequenceManifest manifest;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i > 0 && frames[i].first == frames[i - 1].first) {
            throw FormatError("duplicate frame id in " + quoted(frames[i].second) + " and " +
                              quoted(frames[i - 1].second));
        }
        manifest.frame_ids.push_back(frames[i].first);
        manifest.cloud_paths.push_back(frames[i].second);
    }
    if (!detections_path.empty()) {
        if (!std::filesystem::is_regular_file(detections_path)) {
            throw FormatError("detection file " + quoted(detections_path) + " does not exist");
        }
        manifest.detections_path = detections_path;
    }
    if (!gt_pose_path.empty()) {
        if (!std::filesystem::is_regular_file(gt_pose_path)) {
            throw FormatError("pose file " + quoted(gt_pose_path) + " does not exist");
        }
        manifest.gt_pose_path = gt_pose_path;
    }
    return manifest;
}

}  // namespace dynreg
