#include "dynreg/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "dynreg/errors.hpp"
#include "dynreg/io.hpp"

namespace dynreg {

namespace {

// mt19937_64 output is identical on every platform; the transforms below are
// hand-rolled because std::normal_distribution is not.
class SceneRng {
public:
    explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    int poisson(double mean) {
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

private:
    std::mt19937_64 engine_;
};

void validate_spec(const SceneSpec& spec) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw InvalidParameterError("scene spec field '" + field + "': " + why);
    };
    if (spec.frames < 2) fail("frames", "must be at least 2");
    if (!spec.ego.empty() && spec.ego.size() != 1 &&
        spec.ego.size() != static_cast<std::size_t>(spec.frames - 1)) {
        fail("ego", "need one step, one per pair, or none");
    }
    for (const EgoStep& step : spec.ego) {
        if (!std::isfinite(step.yaw) || !step.translation.allFinite()) {
            fail("ego", "non-finite values");
        }
    }
    if (spec.env_points < 0) fail("env_points", "must be non-negative");
    if (spec.walls < 0) fail("walls", "must be non-negative");
    if (!std::isfinite(spec.ground_z)) fail("ground_z", "must be finite");
    if (!(spec.x_min < spec.x_max) || !(spec.y_min < spec.y_max)) {
        fail("extent", "min must be below max on both axes");
    }
    for (const BoxSpec& box : spec.boxes) {
        if (box.length <= 0.0 || box.width <= 0.0 || box.height <= 0.0) {
            fail("box", "extents must be positive");
        }
        if (box.points < 0) fail("box", "points must be non-negative");
        if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.yaw) ||
            !std::isfinite(box.vx) || !std::isfinite(box.vy)) {
            fail("box", "non-finite pose or velocity");
        }
    }
    if (!(spec.noise.sigma >= 0.0)) fail("noise.sigma", "must be non-negative");
    if (!(spec.noise.dropout >= 0.0 && spec.noise.dropout <= 1.0)) {
        fail("noise.dropout", "must be a probability");
    }
    if (!(spec.noise.false_positives >= 0.0)) {
        fail("noise.false_positives", "must be non-negative");
    }
}

Eigen::Vector3d box_center_world(const SceneSpec& spec, const BoxSpec& box, int frame) {
    return {box.x + box.vx * frame, box.y + box.vy * frame,
            spec.ground_z + 0.5 * box.height};
}

// Axis-frame box test with a uniform inflation, used to keep environment
// samples clear of every box position.
bool near_box(const Eigen::Vector3d& p, const BoxSpec& box, const Eigen::Vector3d& center,
              double inflation) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const Eigen::Vector3d d = p - center;
    const double lx = c * d.x() + s * d.y();
    const double ly = -s * d.x() + c * d.y();
    return std::abs(lx) <= 0.5 * box.length + inflation &&
           std::abs(ly) <= 0.5 * box.width + inflation &&
           std::abs(d.z()) <= 0.5 * box.height + inflation;
}

struct WallPanel {
    double cx, cy, heading, half_length;
};

// Uniform sample on the box surface, faces weighted by area, pushed a hair
// inside so containment at margin zero is unambiguous.
Eigen::Vector3d sample_box_surface(SceneRng& rng, const BoxSpec& box) {
    constexpr double kNudge = 1e-7;
    const double hl = 0.5 * box.length, hw = 0.5 * box.width, hh = 0.5 * box.height;
    const double area_top = box.length * box.width;
    const double area_front = box.width * box.height;
    const double area_side = box.length * box.height;
    const double total = 2.0 * (area_top + area_front + area_side);
    const double pick = rng.uniform(0.0, total);
    const double a = rng.uniform(), b = rng.uniform();
    if (pick < 2.0 * area_top) {
        const double z = pick < area_top ? hh - kNudge : -hh + kNudge;
        return {(2.0 * a - 1.0) * hl, (2.0 * b - 1.0) * hw, z};
    }
    if (pick < 2.0 * (area_top + area_front)) {
        const double x = pick < 2.0 * area_top + area_front ? hl - kNudge : -hl + kNudge;
        return {x, (2.0 * a - 1.0) * hw, (2.0 * b - 1.0) * hh};
    }
    const double y = pick < total - area_side ? hw - kNudge : -hw + kNudge;
    return {(2.0 * a - 1.0) * hl, y, (2.0 * b - 1.0) * hh};
}

}  // namespace

SceneTruth generate(const SceneSpec& spec) {
    validate_spec(spec);
    SceneRng rng(spec.seed);

    const int pairs = spec.frames - 1;
    std::vector<EgoStep> steps(pairs);
    if (spec.ego.size() == 1) {
        std::fill(steps.begin(), steps.end(), spec.ego.front());
    } else if (!spec.ego.empty()) {
        steps.assign(spec.ego.begin(), spec.ego.end());
    }

    SceneTruth truth;
    truth.ego_poses.push_back(Pose::identity());
    for (int t = 0; t < pairs; ++t) {
        const Pose pair = Pose::from_yaw(steps[t].yaw, steps[t].translation);
        truth.pair_poses.push_back(pair);
        truth.ego_poses.push_back((truth.ego_poses.back() * pair).renormalized());
    }

    // Box world centers per frame, precomputed for the rejection test.
    std::vector<std::vector<Eigen::Vector3d>> centers(spec.boxes.size());
    for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
        for (int t = 0; t < spec.frames; ++t) {
            centers[i].push_back(box_center_world(spec, spec.boxes[i], t));
        }
    }
    auto clear_of_boxes = [&](const Eigen::Vector3d& p) {
        constexpr double kClearance = 0.5;
        for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
            for (int t = 0; t < spec.frames; ++t) {
                if (near_box(p, spec.boxes[i], centers[i][t], kClearance)) return false;
            }
        }
        return true;
    };

    std::vector<WallPanel> panels;
    for (int i = 0; i < spec.walls; ++i) {
        panels.push_back({rng.uniform(spec.x_min, spec.x_max),
                          rng.uniform(spec.y_min, spec.y_max), rng.uniform(0.0, M_PI),
                          rng.uniform(1.0, 4.0)});
    }

    const double ground_share = panels.empty() ? 1.0 : 0.5;
    std::vector<Eigen::Vector3d> env_world;
    env_world.reserve(spec.env_points);
    for (int i = 0; i < spec.env_points; ++i) {
        Eigen::Vector3d p;
        int attempts = 0;
        do {
            if (++attempts > 1000) {
                throw InvalidParameterError(
                    "scene spec field 'extent': no room outside the boxes");
            }
            if (rng.uniform() < ground_share) {
                p = {rng.uniform(spec.x_min, spec.x_max), rng.uniform(spec.y_min, spec.y_max),
                     spec.ground_z};
            } else {
                const auto& panel =
                    panels[std::min<std::size_t>(panels.size() - 1,
                                                 static_cast<std::size_t>(rng.uniform() *
                                                                          panels.size()))];
                const double along = rng.uniform(-panel.half_length, panel.half_length);
                const double off = rng.uniform(-0.3, 0.3);  // walls have volume
                const double up = rng.uniform(0.0, 2.5);
                const double c = std::cos(panel.heading), s = std::sin(panel.heading);
                p = {panel.cx + along * c - off * s, panel.cy + along * s + off * c,
                     spec.ground_z + up};
            }
        } while (!clear_of_boxes(p));
        env_world.push_back(p);
    }

    // Each box is a rigid body: one set of local surface samples reused every
    // frame, so its points correspond exactly across frames.
    std::vector<std::vector<Eigen::Vector3d>> box_local(spec.boxes.size());
    for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
        box_local[i].reserve(spec.boxes[i].points);
        for (int k = 0; k < spec.boxes[i].points; ++k) {
            box_local[i].push_back(sample_box_surface(rng, spec.boxes[i]));
        }
    }

    for (int t = 0; t < spec.frames; ++t) {
        const Pose into_ego = truth.ego_poses[t].inverse();
        PointCloud cloud;
        std::vector<int> prov;
        for (const Eigen::Vector3d& w : env_world) {
            cloud.points.push_back(into_ego.apply(w));
            prov.push_back(-1);
        }
        for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
            const double c = std::cos(spec.boxes[i].yaw), s = std::sin(spec.boxes[i].yaw);
            for (const Eigen::Vector3d& local : box_local[i]) {
                const Eigen::Vector3d w =
                    centers[i][t] + Eigen::Vector3d(c * local.x() - s * local.y(),
                                                    s * local.x() + c * local.y(), local.z());
                cloud.points.push_back(into_ego.apply(w));
                prov.push_back(static_cast<int>(i));
            }
        }

        DetectionSet dets;
        dets.frame_id = t;
        std::vector<int> origin;
        for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
            // Noise draws happen unconditionally so the stream stays aligned
            // whether or not this detection is dropped.
            const double jx = rng.normal(), jy = rng.normal();
            const double drop = rng.uniform();
            if (drop < spec.noise.dropout) continue;
            Detection det;
            det.label = spec.boxes[i].label;
            det.length = spec.boxes[i].length;
            det.width = spec.boxes[i].width;
            det.height = spec.boxes[i].height;
            det.center = into_ego.apply(centers[i][t]) +
                         Eigen::Vector3d(spec.noise.sigma * jx, spec.noise.sigma * jy, 0.0);
            det.yaw = normalize_angle(spec.boxes[i].yaw + into_ego.yaw());
            det.score = 0.9;
            dets.add(det, spec.boxes[i].moving() ? MotionState::Dynamic : MotionState::Static);
            origin.push_back(static_cast<int>(i));
        }
        const int fp_count =
            spec.noise.false_positives > 0.0 ? rng.poisson(spec.noise.false_positives) : 0;
        for (int k = 0; k < fp_count; ++k) {
            Detection det;
            det.label = Label::Car;
            det.length = 4.2;
            det.width = 1.8;
            det.height = 1.6;
            det.center = {rng.uniform(spec.x_min, spec.x_max),
                          rng.uniform(spec.y_min, spec.y_max), spec.ground_z + 0.8};
            det.yaw = normalize_angle(rng.uniform(-M_PI, M_PI));
            det.score = 0.7;
            dets.add(det, MotionState::Unknown);
            origin.push_back(-1);
        }

        truth.clouds.push_back(std::move(cloud));
        truth.provenance.push_back(std::move(prov));
        truth.detections.push_back(std::move(dets));
        truth.detection_origin.push_back(std::move(origin));
    }
    return truth;
}

namespace {

double spec_number(const std::string& token, std::size_t line_no, const std::string& field) {
    double value = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        std::ostringstream msg;
        msg << "scene spec line " << line_no << " field '" << field << "': bad number '"
            << token << "'";
        throw FormatError(msg.str());
    }
    return value;
}

std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

SceneSpec parse_scene_spec_text(const std::string& text) {
    SceneSpec spec;
    spec.ego.clear();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_ego = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::vector<std::string> tok = tokens_of(line);
        if (tok.empty()) continue;
        const std::string& key = tok[0];
        auto expect = [&](std::size_t n) {
            if (tok.size() != n + 1) {
                std::ostringstream msg;
                msg << "scene spec line " << line_no << " field '" << key << "': expected " << n
                    << " values, got " << tok.size() - 1;
                throw FormatError(msg.str());
            }
        };
        if (key == "seed") {
            expect(1);
            spec.seed = static_cast<std::uint64_t>(spec_number(tok[1], line_no, key));
        } else if (key == "frames") {
            expect(1);
            spec.frames = static_cast<int>(spec_number(tok[1], line_no, key));
        } else if (key == "env_points") {
            expect(1);
            spec.env_points = static_cast<int>(spec_number(tok[1], line_no, key));
        } else if (key == "walls") {
            expect(1);
            spec.walls = static_cast<int>(spec_number(tok[1], line_no, key));
        } else if (key == "ground_z") {
            expect(1);
            spec.ground_z = spec_number(tok[1], line_no, key);
        } else if (key == "extent") {
            expect(4);
            spec.x_min = spec_number(tok[1], line_no, key);
            spec.x_max = spec_number(tok[2], line_no, key);
            spec.y_min = spec_number(tok[3], line_no, key);
            spec.y_max = spec_number(tok[4], line_no, key);
        } else if (key == "ego") {
            expect(4);
            EgoStep step;
            step.yaw = spec_number(tok[1], line_no, key);
            step.translation = Eigen::Vector3d(spec_number(tok[2], line_no, key),
                                               spec_number(tok[3], line_no, key),
                                               spec_number(tok[4], line_no, key));
            spec.ego.push_back(step);
            have_ego = true;
        } else if (key == "box") {
            expect(10);
            BoxSpec box;
            if (!label_from_string(tok[1], box.label)) {
                std::ostringstream msg;
                msg << "scene spec line " << line_no << " field 'box': unknown label '"
                    << tok[1] << "'";
                throw FormatError(msg.str());
            }
            box.length = spec_number(tok[2], line_no, key);
            box.width = spec_number(tok[3], line_no, key);
            box.height = spec_number(tok[4], line_no, key);
            box.x = spec_number(tok[5], line_no, key);
            box.y = spec_number(tok[6], line_no, key);
            box.yaw = spec_number(tok[7], line_no, key);
            box.vx = spec_number(tok[8], line_no, key);
            box.vy = spec_number(tok[9], line_no, key);
            box.points = static_cast<int>(spec_number(tok[10], line_no, key));
            spec.boxes.push_back(box);
        } else if (key == "noise") {
            expect(3);
            spec.noise.sigma = spec_number(tok[1], line_no, key);
            spec.noise.dropout = spec_number(tok[2], line_no, key);
            spec.noise.false_positives = spec_number(tok[3], line_no, key);
        } else {
            std::ostringstream msg;
            msg << "scene spec line " << line_no << ": unknown field '" << key << "'";
            throw FormatError(msg.str());
        }
    }
    if (!have_ego) spec.ego.push_back({0.0, Eigen::Vector3d(0.8, 0.0, 0.0)});
    return spec;
}

SceneSpec parse_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open scene spec '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scene_spec_text(buffer.str());
}

void emit_scene(const SceneTruth& truth, const std::filesystem::path& out_dir) {
    const std::filesystem::path cloud_dir = out_dir / "clouds";
    std::filesystem::create_directories(cloud_dir);
    for (std::size_t t = 0; t < truth.clouds.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.bin", t);
        write_cloud_bin(cloud_dir / name, truth.clouds[t]);
    }
    write_detections(out_dir / "detections.txt", truth.detections);
    write_poses(out_dir / "poses.txt", truth.pair_poses);

    std::string states;
    for (std::size_t t = 0; t < truth.detections.size(); ++t) {
        const DetectionSet& set = truth.detections[t];
        for (std::size_t i = 0; i < set.size(); ++i) {
            states += std::to_string(t);
            states += ' ';
            states += std::to_string(i);
            states += ' ';
            states += to_string(set.states[i]);
            states += '\n';
        }
    }
    std::ofstream out(out_dir / "true_states.txt", std::ios::binary);
    if (!out) throw FormatError("cannot open '" + (out_dir / "true_states.txt").string() + "'");
    out << states;
}

}  // namespace dynreg
