#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/io.hpp"

using namespace dynreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "dynreg_io_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

fs::path scratch(const std::string& name) { return scratch_dir() / name; }

void write_raw(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

std::string le_floats(const std::vector<float>& values) {
    std::string bytes(values.size() * 4, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &values[i], 4);
        bytes[4 * i + 0] = static_cast<char>(bits & 0xff);
        bytes[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
        bytes[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
        bytes[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
    }
    return bytes;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

}  // namespace

TEST_CASE("binary cloud reader decodes little-endian float quadruplets") {
    const fs::path path = scratch("two_points.bin");
    write_raw(path, le_floats({1, 2, 3, 0.5f, 4, 5, 6, 0.25f}));
    REQUIRE(fs::file_size(path) == 32);

    const PointCloud cloud = read_cloud_bin(path);
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.points[0].x() == 1.0);
    CHECK(cloud.points[0].y() == 2.0);
    CHECK(cloud.points[0].z() == 3.0);
    CHECK(cloud.points[1].x() == 4.0);
    CHECK(cloud.points[1].y() == 5.0);
    CHECK(cloud.points[1].z() == 6.0);
    REQUIRE(cloud.intensities.size() == 2);
    CHECK(cloud.intensities[0] == 0.5);
    CHECK(cloud.intensities[1] == 0.25);
}

TEST_CASE("binary cloud reader accepts empty files and rejects bad ones") {
    const fs::path empty = scratch("empty.bin");
    write_raw(empty, "");
    const PointCloud cloud = read_cloud_bin(empty);
    CHECK(cloud.size() == 0);

    const fs::path ragged = scratch("ragged.bin");
    write_raw(ragged, std::string(20, '\0'));
    CHECK_THROWS_AS(read_cloud_bin(ragged), FormatError);

    const fs::path nan_file = scratch("nan.bin");
    write_raw(nan_file, le_floats({1, 2, 3, 0.5f,
                                   std::numeric_limits<float>::quiet_NaN(), 5, 6, 0.0f}));
    CHECK_THROWS_AS(read_cloud_bin(nan_file), FormatError);
    const std::string msg = message_of([&] { read_cloud_bin(nan_file); });
    CHECK(msg.find("2") != std::string::npos);  // names the offending point

    CHECK_THROWS_AS(read_cloud_bin(scratch("missing.bin")), FormatError);
}

TEST_CASE("binary cloud write-read round trip is byte-identical") {
    std::mt19937_64 rng(20240902);
    PointCloud cloud;
    for (int i = 0; i < 1000; ++i) {
        cloud.points.emplace_back(uniform(rng, -80, 80), uniform(rng, -80, 80),
                                  uniform(rng, -5, 5));
        cloud.intensities.push_back(uniform(rng, 0, 1));
    }
    const fs::path first = scratch("round_a.bin");
    const fs::path second = scratch("round_b.bin");
    write_cloud_bin(first, cloud);
    write_cloud_bin(second, read_cloud_bin(first));
    CHECK(slurp(first) == slurp(second));
    CHECK(fs::file_size(first) == 16000);
}

TEST_CASE("clouds without an intensity channel are written as zeros") {
    PointCloud cloud;
    cloud.points = {{7, 8, 9}};
    const fs::path path = scratch("no_intensity.bin");
    write_cloud_bin(path, cloud);
    const PointCloud back = read_cloud_bin(path);
    REQUIRE(back.intensities.size() == 1);
    CHECK(back.intensities[0] == 0.0);
}

TEST_CASE("detection reader parses the canonical line format") {
    const fs::path path = scratch("dets.txt");
    write_raw(path,
              "# detector output\n"
              "\n"
              "0 Car 0.92 12.1 -3.0 -0.8 4.2 1.8 1.6 0.05\n"
              "1 Pedestrian 0.6 2.0 1.0 -1.0 0.6 0.6 1.7 1.5\n"
              "0 Cyclist 0.7 -4.0 6.0 -0.9 1.8 0.6 1.7 -0.4\n");
    const auto sets = read_detections(path);
    REQUIRE(sets.size() == 2);
    const DetectionSet& f0 = sets.at(0);
    REQUIRE(f0.size() == 2);
    CHECK(f0.frame_id == 0);
    CHECK(f0.detections[0].label == Label::Car);
    CHECK(f0.detections[0].score == 0.92);
    CHECK(f0.detections[0].center.x() == 12.1);
    CHECK(f0.detections[0].center.y() == -3.0);
    CHECK(f0.detections[0].center.z() == -0.8);
    CHECK(f0.detections[0].length == 4.2);
    CHECK(f0.detections[0].width == 1.8);
    CHECK(f0.detections[0].height == 1.6);
    CHECK(f0.detections[0].yaw == 0.05);
    CHECK(f0.states[0] == MotionState::Unknown);
    // file order kept within the frame
    CHECK(f0.detections[1].label == Label::Cyclist);
    CHECK(sets.at(1).detections[0].label == Label::Pedestrian);
}

TEST_CASE("detection reader reports 1-based line numbers") {
    const fs::path path = scratch("dets_bad.txt");
    write_raw(path,
              "# header comment\n"
              "0 Car 0.9 1 2 3 4 1.8 1.6 0.0\n"
              "0 Car 0.9 1 2 3 4 1.8 1.6\n");  // 9 fields
    CHECK_THROWS_AS(read_detections(path), FormatError);
    CHECK(message_of([&] { read_detections(path); }).find("line 3") != std::string::npos);

    write_raw(path, "0 Tree 0.9 1 2 3 4 1.8 1.6 0.0\n");
    CHECK(message_of([&] { read_detections(path); }).find("Tree") != std::string::npos);

    write_raw(path, "0 Car 0.9 1 2 x 4 1.8 1.6 0.0\n");
    CHECK_THROWS_AS(read_detections(path), FormatError);

    write_raw(path, "0 Car 0.9 1 2 3 -4 1.8 1.6 0.0\n");  // negative length
    CHECK_THROWS_AS(read_detections(path), FormatError);

    write_raw(path, "0 Car 0.9 1 2 3 4 1.8 1.6 0.0 extra\n");  // trailing garbage
    CHECK_THROWS_AS(read_detections(path), FormatError);

    write_raw(path, "");
    CHECK(read_detections(path).empty());
}

TEST_CASE("detection write-read round trip preserves every field") {
    std::mt19937_64 rng(4242);
    std::vector<DetectionSet> sets(3);
    const Label labels[] = {Label::Car, Label::Pedestrian, Label::Cyclist};
    for (int f = 0; f < 3; ++f) {
        sets[f].frame_id = 10 + f;
        for (int i = 0; i < 5; ++i) {
            Detection d;
            d.center = Point3(uniform(rng, -30, 30), uniform(rng, -30, 30),
                              uniform(rng, -2, 0));
            d.length = uniform(rng, 0.5, 5.0);
            d.width = uniform(rng, 0.4, 2.0);
            d.height = uniform(rng, 1.0, 2.0);
            d.yaw = uniform(rng, -3.1, 3.1);
            d.label = labels[(f + i) % 3];
            d.score = uniform(rng, 0.0, 1.0);
            sets[f].add(d);
        }
    }
    const fs::path path = scratch("dets_round.txt");
    write_detections(path, sets);
    const auto back = read_detections(path);
    REQUIRE(back.size() == 3);
    for (const DetectionSet& set : sets) {
        const DetectionSet& got = back.at(set.frame_id);
        REQUIRE(got.size() == set.size());
        for (std::size_t i = 0; i < set.size(); ++i) {
            const Detection& a = set.detections[i];
            const Detection& b = got.detections[i];
            CHECK((a.center - b.center).norm() == 0.0);  // shortest decimals: exact
            CHECK(a.length == b.length);
            CHECK(a.width == b.width);
            CHECK(a.height == b.height);
            CHECK(a.yaw == b.yaw);
            CHECK(a.label == b.label);
            CHECK(a.score == b.score);
        }
    }
}

TEST_CASE("pose writer emits the canonical identity line") {
    const fs::path path = scratch("identity.txt");
    write_poses(path, {Pose::identity()});
    CHECK(slurp(path) == "1 0 0 0 0 1 0 0 0 0 1 0\n");
    const std::vector<Pose> back = read_poses(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].translation.norm() == 0.0);
    CHECK((back[0].rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
}

TEST_CASE("pose write-read round trip is bit-identical") {
    std::mt19937_64 rng(777);
    std::vector<Pose> poses;
    for (int i = 0; i < 100; ++i) {
        poses.push_back(Pose::from_yaw(uniform(rng, -3.1, 3.1),
                                       {uniform(rng, -50, 50), uniform(rng, -50, 50),
                                        uniform(rng, -2, 2)}));
    }
    const fs::path first = scratch("poses_a.txt");
    const fs::path second = scratch("poses_b.txt");
    write_poses(first, poses);
    const std::vector<Pose> back = read_poses(first);
    REQUIRE(back.size() == poses.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        worst = std::max(worst, (poses[i].rotation - back[i].rotation).lpNorm<Eigen::Infinity>());
        worst = std::max(worst,
                         (poses[i].translation - back[i].translation).lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-12);
    write_poses(second, back);
    CHECK(slurp(first) == slurp(second));
}

TEST_CASE("pose reader rejects malformed and non-rigid lines") {
    const fs::path path = scratch("poses_bad.txt");
    write_raw(path, "1 0 0 0 0 1 0 0 0 0 1\n");  // truncated: 11 fields
    CHECK(message_of([&] { read_poses(path); }).find("line 1") != std::string::npos);

    write_raw(path, "1 0 0 0 0 1 0 0 0 0 1 0 0\n");  // trailing garbage: 13 fields
    CHECK_THROWS_AS(read_poses(path), FormatError);

    write_raw(path, "-1 0 0 0 0 1 0 0 0 0 1 0\n");  // reflection
    CHECK(message_of([&] { read_poses(path); }).find("rigid") != std::string::npos);

    // drift of ~4e-6 exceeds the 1e-6 acceptance band
    write_raw(path, "1.000002 0 0 0 0 1 0 0 0 0 1 0\n");
    CHECK_THROWS_AS(read_poses(path), FormatError);

    // drift of ~2e-7 is accepted and repaired to orthonormal
    write_raw(path, "1.0000001 0 0 0 0 1 0 0 0 0 1 0\n");
    const std::vector<Pose> repaired = read_poses(path);
    REQUIRE(repaired.size() == 1);
    CHECK((repaired[0].rotation.transpose() * repaired[0].rotation -
           Eigen::Matrix3d::Identity())
              .norm() < 1e-12);
}

TEST_CASE("ply export colors points by their origin tag") {
    PointCloud one;
    one.points = {{1, 2, 3}};
    const fs::path path = scratch("one.ply");
    write_ply(path, one, {PointTag::Environment});
    const std::string text = slurp(path);
    CHECK(text.find("element vertex 1\n") != std::string::npos);
    CHECK(text.find("1 2 3 255 255 255\n") != std::string::npos);

    PointCloud empty;
    write_ply(path, empty, {});
    CHECK(slurp(path).find("element vertex 0\n") != std::string::npos);

    PointCloud mixed;
    std::vector<PointTag> tags;
    for (int i = 0; i < 9; ++i) {
        mixed.points.emplace_back(i, 0, 0);
        tags.push_back(i < 4   ? PointTag::Environment
                       : i < 7 ? PointTag::StaticObject
                               : PointTag::DynamicObject);
    }
    write_ply(path, mixed, tags);
    const std::string body = slurp(path);
    auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (std::size_t at = body.find(needle); at != std::string::npos;
             at = body.find(needle, at + 1)) {
            ++n;
        }
        return n;
    };
    CHECK(count(" 255 255 255\n") == 4);
    CHECK(count(" 0 255 0\n") == 3);
    CHECK(count(" 255 0 0\n") == 2);

    CHECK_THROWS_AS(write_ply(path, mixed, {PointTag::Environment}), InvalidInputError);
}

TEST_CASE("load_sequence resolves numbered frames in id order") {
    const fs::path dir = scratch("seq");
    fs::create_directories(dir);
    write_raw(dir / "000000.bin", "");
    write_raw(dir / "000001.bin", "");
    write_raw(dir / "10.bin", "");
    write_raw(dir / "notes.txt", "ignored");

    const SequenceManifest m = load_sequence(dir);
    REQUIRE(m.size() == 3);
    CHECK(m.frame_ids == std::vector<std::int64_t>{0, 1, 10});
    CHECK(m.cloud_paths[2].filename() == "10.bin");
    CHECK(m.detections_path.empty());

    const fs::path dets = scratch("seq_dets.txt");
    write_raw(dets, "");
    const SequenceManifest with_dets = load_sequence(dir, dets);
    CHECK(with_dets.detections_path == dets);

    CHECK_THROWS_AS(load_sequence(dir, scratch("absent.txt")), FormatError);
    CHECK_THROWS_AS(load_sequence(scratch("no_such_dir")), FormatError);

    write_raw(dir / "frame_a.bin", "");
    CHECK_THROWS_AS(load_sequence(dir), FormatError);
    fs::remove(dir / "frame_a.bin");

    write_raw(dir / "0000010.bin", "");  // same id as 10.bin
    CHECK(message_of([&] { load_sequence(dir); }).find("duplicate") != std::string::npos);
}
