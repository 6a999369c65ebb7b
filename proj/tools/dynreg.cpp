// Command-line front end: `run` executes a registration mode over an on-disk
// sequence, `eval` scores pose files with translational RPE, `synth` emits a
// synthetic sequence from a scene description.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dynreg/cuboid.hpp"
#include "dynreg/errors.hpp"
#include "dynreg/evaluation.hpp"
#include "dynreg/io.hpp"
#include "dynreg/pipeline.hpp"
#include "dynreg/registration.hpp"
#include "dynreg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dynreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFormat = 2;
constexpr int kExitPipeline = 3;

enum class Mode { Baseline, Rma, Rmd };
enum class Backend { Icp, Ndt };

struct RunConfig {
    std::string cloud_dir;
    std::string detections;
    std::string out_dir;
    Backend backend = Backend::Ndt;
    Mode mode = Mode::Rmd;
    double voxel = 0.3;
    std::vector<double> range{0.0, 40.0, -30.0, 30.0, -3.0, 1.0};
    double score_min = 0.5;
    double thresh = 0.5;
    double gate = 2.0;
    int max_loop = 10;
    bool strict_loop = false;
    double margin = 0.1;
    double max_corr = 1.0;
    double ndt_voxel = 1.0;
    int reg_iters = 50;
    bool ply = false;
    int jobs = 1;
    std::string inject_poses;
    bool warm_start = false;
};

// Removes everything it registered unless release() is called, so a failure
// mid-write never leaves a partial output tree behind.
class OutputGuard {
public:
    void track(const fs::path& path) { paths_.push_back(path); }
    void release() { paths_.clear(); }
    ~OutputGuard() {
        for (const fs::path& p : paths_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<fs::path> paths_;
};

struct PreppedFrame {
    std::int64_t frame_id = 0;
    PointCloud cloud;      // what registration sees (downsampled env + object buckets)
    DetectionSet dets;     // score-gated, empty in baseline mode
};

PreppedFrame prep_frame(const RunConfig& cfg, const fs::path& cloud_path,
                        std::int64_t frame_id, const DetectionSet* raw_dets) {
    RangeBox box{cfg.range[0], cfg.range[1], cfg.range[2],
                 cfg.range[3], cfg.range[4], cfg.range[5]};
    PreppedFrame out;
    out.frame_id = frame_id;
    const PointCloud cropped = crop_range(read_cloud_bin(cloud_path), box);
    if (cfg.mode == Mode::Baseline) {
        out.cloud = voxel_downsample(cropped, cfg.voxel);
        out.dets.frame_id = frame_id;
        return out;
    }
    DetectionSet dets;
    dets.frame_id = frame_id;
    if (raw_dets) dets = filter_by_score(*raw_dets, cfg.score_min);
    dets.frame_id = frame_id;
    // Object buckets are split off at full density, then only the environment
    // is downsampled, so points merged back later keep their resolution.
    const CloudPartition part = partition_cloud(cropped, dets, cfg.margin);
    out.cloud = voxel_downsample(part.outside, cfg.voxel);
    for (const PointCloud& bucket : part.inside) out.cloud.append(bucket);
    out.dets = dets;
    return out;
}

struct PairOutcome {
    Pose pose;
    bool has_result = false;   // full pipeline result only in rmd mode
    FramePairResult result;
    RemoveAllOutcome removed;  // rma mode keeps its partitions for PLY export
};

PairOutcome process_pair(const RunConfig& cfg, const PreppedFrame& prev,
                         const PreppedFrame& curr, const Registrar& registrar) {
    PairOutcome out;
    switch (cfg.mode) {
        case Mode::Baseline:
            out.pose = registrar(prev.cloud, curr.cloud).pose;
            break;
        case Mode::Rma:
            out.removed = remove_all_register(prev.cloud, curr.cloud, prev.dets, curr.dets,
                                              registrar, cfg.margin);
            out.pose = out.removed.initial.pose;
            break;
        case Mode::Rmd: {
            PipelineOptions opts;
            opts.motion_threshold.meters = cfg.thresh;
            opts.gate = cfg.gate;
            opts.margin = cfg.margin;
            opts.max_loop = cfg.max_loop;
            opts.strict_loop = cfg.strict_loop;
            out.result = iterative_dynamic_register(prev.cloud, curr.cloud, prev.dets,
                                                    curr.dets, registrar, opts);
            out.pose = out.result.pose;
            out.has_result = true;
            break;
        }
    }
    return out;
}

void write_frame_ply(const fs::path& path, const CloudPartition& part,
                     const std::vector<MotionState>& states) {
    PointCloud cloud = part.outside;
    std::vector<PointTag> tags(part.outside.size(), PointTag::Environment);
    for (std::size_t i = 0; i < part.inside.size(); ++i) {
        cloud.append(part.inside[i]);
        const PointTag tag = i < states.size() && states[i] == MotionState::Static
                                 ? PointTag::StaticObject
                                 : PointTag::DynamicObject;
        tags.insert(tags.end(), part.inside[i].size(), tag);
    }
    write_ply(path, cloud, tags);
}

int cmd_run(const RunConfig& cfg) {
    if (cfg.voxel <= 0.0 || cfg.score_min < 0.0 || cfg.thresh <= 0.0 || cfg.gate <= 0.0 ||
        cfg.max_loop < 1 || cfg.margin < 0.0 || cfg.max_corr <= 0.0 || cfg.ndt_voxel <= 0.0 ||
        cfg.reg_iters < 1 || cfg.jobs < 1) {
        throw InvalidParameterError("run: numeric flags must be positive");
    }
    if (cfg.range.size() != 6) throw InvalidParameterError("run: --range needs 6 values");
    if (cfg.warm_start && cfg.jobs > 1) {
        throw InvalidParameterError("run: --warm-start requires --jobs 1");
    }

    const bool needs_dets = cfg.mode != Mode::Baseline;
    if (needs_dets && cfg.detections.empty()) {
        throw InvalidParameterError("run: this mode needs --detections");
    }
    const SequenceManifest manifest =
        load_sequence(cfg.cloud_dir, needs_dets ? fs::path(cfg.detections) : fs::path{});
    if (manifest.size() < 2) {
        throw FormatError("sequence '" + cfg.cloud_dir + "' has fewer than 2 frames");
    }
    std::map<std::int64_t, DetectionSet> all_dets;
    if (needs_dets) all_dets = read_detections(manifest.detections_path);

    std::vector<Pose> injected;
    if (!cfg.inject_poses.empty()) {
        injected = read_poses(cfg.inject_poses);
        if (injected.size() != manifest.size() - 1) {
            throw FormatError("'" + cfg.inject_poses + "' holds " +
                              std::to_string(injected.size()) + " poses, need " +
                              std::to_string(manifest.size() - 1));
        }
    }

    RegistrationConfig reg;
    reg.max_iterations = cfg.reg_iters;
    reg.max_correspondence_distance = cfg.max_corr;
    reg.ndt_voxel = cfg.ndt_voxel;

    std::vector<PreppedFrame> frames(manifest.size());
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto it = all_dets.find(manifest.frame_ids[i]);
        frames[i] = prep_frame(cfg, manifest.cloud_paths[i], manifest.frame_ids[i],
                               it == all_dets.end() ? nullptr : &it->second);
    }

    const std::size_t pair_count = manifest.size() - 1;
    std::vector<PairOutcome> outcomes(pair_count);

    auto registrar_for = [&](std::size_t pair_index, const Pose& guess) -> Registrar {
        if (!injected.empty()) return make_fixed_registrar(injected[pair_index]);
        RegistrationConfig local = reg;
        local.initial_guess = guess;
        return cfg.backend == Backend::Icp ? make_icp_registrar(local)
                                           : make_ndt_registrar(local);
    };

    if (cfg.jobs == 1) {
        Pose last = Pose::identity();
        for (std::size_t k = 0; k < pair_count; ++k) {
            const Pose guess = cfg.warm_start ? last : Pose::identity();
            outcomes[k] = process_pair(cfg, frames[k], frames[k + 1], registrar_for(k, guess));
            last = outcomes[k].pose;
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::exception_ptr first_error;
        auto worker = [&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= pair_count) return;
                try {
                    outcomes[k] = process_pair(cfg, frames[k], frames[k + 1],
                                               registrar_for(k, Pose::identity()));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(cfg.jobs, static_cast<int>(pair_count));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    OutputGuard guard;

    std::vector<Pose> poses;
    for (const PairOutcome& o : outcomes) poses.push_back(o.pose);
    guard.track(out_dir / "poses.txt");
    write_poses(out_dir / "poses.txt", poses);

    if (cfg.mode == Mode::Rmd) {
        std::string seg;
        auto emit = [&seg](std::int64_t frame, const DetectionSet& dets) {
            for (std::size_t i = 0; i < dets.size(); ++i) {
                seg += std::to_string(frame);
                seg += ' ';
                seg += std::to_string(i);
                seg += ' ';
                seg += to_string(dets.states[i]);
                seg += '\n';
            }
        };
        emit(frames[0].frame_id, outcomes[0].result.dets_prev);
        for (std::size_t k = 0; k < pair_count; ++k) {
            emit(frames[k + 1].frame_id, outcomes[k].result.dets_curr);
        }
        guard.track(out_dir / "segmentation.txt");
        std::ofstream seg_out(out_dir / "segmentation.txt", std::ios::binary);
        if (!seg_out) throw FormatError("cannot write segmentation file");
        seg_out << seg;
        seg_out.flush();
        if (!seg_out) throw FormatError("write failure on segmentation file");
    }

    if (cfg.ply) {
        const fs::path ply_dir = out_dir / "ply";
        fs::create_directories(ply_dir);
        auto ply_name = [&](std::int64_t id) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%06lld.ply", static_cast<long long>(id));
            return ply_dir / buf;
        };
        auto frame_partition = [&](std::size_t frame_index) -> const CloudPartition& {
            // Frame 0 is attributed through pair 1's previous side, every
            // other frame through its own pair's current side.
            const PairOutcome& o = outcomes[frame_index == 0 ? 0 : frame_index - 1];
            if (cfg.mode == Mode::Rmd) {
                return frame_index == 0 ? o.result.part_prev : o.result.part_curr;
            }
            return frame_index == 0 ? o.removed.prev : o.removed.curr;
        };
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            const fs::path path = ply_name(frames[i].frame_id);
            guard.track(path);
            if (cfg.mode == Mode::Baseline) {
                write_ply(path, frames[i].cloud,
                          std::vector<PointTag>(frames[i].cloud.size(),
                                                PointTag::Environment));
                continue;
            }
            std::vector<MotionState> states;
            if (cfg.mode == Mode::Rmd) {
                const PairOutcome& o = outcomes[i == 0 ? 0 : i - 1];
                states = i == 0 ? o.result.dets_prev.states : o.result.dets_curr.states;
            } else {
                states.assign(frames[i].dets.size(), MotionState::Dynamic);
            }
            write_frame_ply(path, frame_partition(i), states);
        }
    }

    guard.release();
    std::cerr << "run: " << pair_count << " pairs done\n";
    return kExitOk;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& csv_path, bool est_absolute, bool gt_absolute,
             const std::string& seq, const std::string& backend, const std::string& mode) {
    auto to_pairs = [](std::vector<Pose> poses, bool absolute,
                       const std::string& path) -> std::vector<Pose> {
        if (!absolute) return poses;
        if (poses.size() < 2) {
            throw InvalidInputError("'" + path + "': absolute trajectory needs >= 2 poses");
        }
        std::vector<Pose> pairs;
        for (std::size_t i = 1; i < poses.size(); ++i) {
            pairs.push_back((poses[i - 1].inverse() * poses[i]).renormalized());
        }
        return pairs;
    };
    const std::vector<Pose> est = to_pairs(read_poses(est_path), est_absolute, est_path);
    const std::vector<Pose> gt = to_pairs(read_poses(gt_path), gt_absolute, gt_path);
    const RpeReport report = rpe_trans(gt, est);
    std::printf("%.4f\n", report.rmse);
    if (!csv_path.empty()) {
        ReportCell cell{seq, backend, mode, report};
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw FormatError("cannot write '" + csv_path + "'");
        out << report_csv({cell});
        out.flush();
        if (!out) throw FormatError("write failure on '" + csv_path + "'");
    }
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    const SceneSpec spec = parse_scene_spec(spec_path);
    try {
        emit_scene(generate(spec), out_dir);
    } catch (const InvalidParameterError& e) {
        throw FormatError(e.what());  // invalid spec values are a data problem
    }
    std::cerr << "synth: " << spec.frames << " frames written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lidar ego-motion with detection-based moving-object handling"};
    app.require_subcommand(1);

    RunConfig cfg;
    CLI::App* run = app.add_subcommand("run", "register a sequence of cloud frames");
    run->add_option("--clouds", cfg.cloud_dir, "directory of <frame>.bin files")->required();
    run->add_option("--detections", cfg.detections, "detection text file");
    run->add_option("--out", cfg.out_dir, "output directory")->required();
    run->add_option("--backend", cfg.backend, "registration backend")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Backend>{{"icp", Backend::Icp}, {"ndt", Backend::Ndt}}));
    run->add_option("--mode", cfg.mode, "baseline | rma | rmd")
        ->transform(CLI::CheckedTransformer(std::map<std::string, Mode>{
            {"baseline", Mode::Baseline}, {"rma", Mode::Rma}, {"rmd", Mode::Rmd}}));
    run->add_option("--voxel", cfg.voxel, "environment voxel size, meters");
    run->add_option("--range", cfg.range, "crop box: xmin xmax ymin ymax zmin zmax")
        ->expected(6);
    run->add_option("--score-min", cfg.score_min, "detection confidence cutoff");
    run->add_option("--thresh", cfg.thresh, "motion threshold, meters per pair");
    run->add_option("--gate", cfg.gate, "association gate, meters");
    run->add_option("--max-loop", cfg.max_loop, "iteration cap");
    run->add_flag("--strict-loop", cfg.strict_loop,
                  "loop only while both frames' static sets change");
    run->add_option("--margin", cfg.margin, "cuboid inflation, meters");
    run->add_option("--max-corr", cfg.max_corr, "icp correspondence gate, meters");
    run->add_option("--ndt-voxel", cfg.ndt_voxel, "ndt cell size, meters");
    run->add_option("--reg-iters", cfg.reg_iters, "registration iteration cap");
    run->add_flag("--ply", cfg.ply, "write colored ply per frame");
    run->add_option("--jobs", cfg.jobs, "worker threads over frame pairs");
    run->add_option("--inject-poses", cfg.inject_poses,
                    "skip registration, use these pair poses");
    run->add_flag("--warm-start", cfg.warm_start, "seed each pair with the previous pose");

    std::string est_path, gt_path, csv_path;
    bool est_absolute = false, gt_absolute = false;
    std::string seq = "0000", eval_backend = "na", eval_mode = "na";
    CLI::App* eval = app.add_subcommand("eval", "translational RPE of two pose files");
    eval->add_option("est", est_path, "estimated pair poses")->required();
    eval->add_option("gt", gt_path, "ground-truth pair poses")->required();
    eval->add_option("csv", csv_path, "optional report CSV path");
    eval->add_flag("--est-absolute", est_absolute, "estimate file holds absolute poses");
    eval->add_flag("--gt-absolute", gt_absolute, "ground truth holds absolute poses");
    eval->add_option("--seq", seq, "sequence label for the CSV");
    eval->add_option("--backend", eval_backend, "backend label for the CSV");
    eval->add_option("--mode", eval_mode, "mode label for the CSV");

    std::string spec_path, synth_out;
    CLI::App* synth = app.add_subcommand("synth", "emit a synthetic sequence");
    synth->add_option("spec", spec_path, "scene description file")->required();
    synth->add_option("out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(cfg);
        if (eval->parsed()) {
            return cmd_eval(est_path, gt_path, csv_path, est_absolute, gt_absolute, seq,
                            eval_backend, eval_mode);
        }
        return cmd_synth(spec_path, synth_out);
    } catch (const InvalidParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    }
}
