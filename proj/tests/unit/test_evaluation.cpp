#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/evaluation.hpp"

using namespace dynreg;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Pose random_pose(std::mt19937_64& rng, double yaw_span, double t_span) {
    return Pose::from_yaw(uniform(rng, -yaw_span, yaw_span),
                          {uniform(rng, -t_span, t_span), uniform(rng, -t_span, t_span),
                           uniform(rng, -t_span * 0.2, t_span * 0.2)});
}

Eigen::Matrix4d homogeneous(const Pose& pose) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = pose.rotation;
    m.topRightCorner<3, 1>() = pose.translation;
    return m;
}

}  // namespace

TEST_CASE("identical trajectories give zero error") {
    std::mt19937_64 rng(11);
    std::vector<Pose> pairs;
    for (int i = 0; i < 10; ++i) pairs.push_back(random_pose(rng, 0.3, 2.0));
    const RpeReport report = rpe_trans(pairs, pairs);
    CHECK(report.rmse == 0.0);
    CHECK(report.pairs == 10);
    for (double e : report.errors) CHECK(e == 0.0);
}

TEST_CASE("single 3-4-5 pair evaluates to one half") {
    const std::vector<Pose> gt = {Pose::identity()};
    const std::vector<Pose> est = {Pose::from_yaw(0.0, {0.3, 0.4, 0.0})};
    const RpeReport report = rpe_trans(gt, est);
    REQUIRE(report.pairs == 1);
    CHECK(std::abs(report.rmse - 0.5) < 1e-12);
    CHECK(std::abs(report.errors[0] - 0.5) < 1e-12);
}

TEST_CASE("two pairs with errors 0.3 and 0.4 quadratic-mean to sqrt(0.125)") {
    const std::vector<Pose> gt = {Pose::identity(), Pose::identity()};
    const std::vector<Pose> est = {Pose::from_yaw(0.0, {0.3, 0.0, 0.0}),
                                   Pose::from_yaw(0.0, {0.0, 0.4, 0.0})};
    const RpeReport report = rpe_trans(gt, est);
    CHECK(std::abs(report.rmse - std::sqrt(0.125)) < 1e-12);
    CHECK(std::abs(report.errors[0] - 0.3) < 1e-15);
    CHECK(std::abs(report.errors[1] - 0.4) < 1e-15);
}

TEST_CASE("rmse recomputes from the error list and is monotone") {
    std::mt19937_64 rng(22);
    std::vector<Pose> gt, est;
    for (int i = 0; i < 25; ++i) {
        gt.push_back(random_pose(rng, 0.2, 1.5));
        est.push_back(random_pose(rng, 0.2, 1.5));
    }
    const RpeReport report = rpe_trans(gt, est);
    double sum_sq = 0.0;
    for (double e : report.errors) sum_sq += e * e;
    CHECK(std::abs(report.rmse - std::sqrt(sum_sq / 25.0)) < 1e-15);

    // scaling one pair's translation offset tenfold grows the aggregate
    est[7].translation = gt[7].translation + 10.0 * (est[7].translation - gt[7].translation);
    const RpeReport bigger = rpe_trans(gt, est);
    CHECK(bigger.rmse > report.rmse);
}

TEST_CASE("rpe rejects mismatched, empty, or invalid input") {
    const std::vector<Pose> one = {Pose::identity()};
    const std::vector<Pose> two = {Pose::identity(), Pose::identity()};
    CHECK_THROWS_AS(rpe_trans(one, two), InvalidInputError);
    CHECK_THROWS_AS(rpe_trans({}, {}), InvalidInputError);

    std::vector<Pose> corrupt = {Pose::identity()};
    corrupt[0].rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(rpe_trans(corrupt, one), InvalidInputError);
}

TEST_CASE("conjugating both sequences by a pure rotation leaves rpe unchanged") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Pose> gt, est, gt_rot, est_rot;
        const Pose conjugator = Pose::from_yaw(uniform(rng, -3.0, 3.0), {0, 0, 0});
        const Pose inv = conjugator.inverse();
        for (int i = 0; i < 8; ++i) {
            gt.push_back(random_pose(rng, 0.3, 2.0));
            est.push_back(random_pose(rng, 0.3, 2.0));
            gt_rot.push_back((conjugator * gt.back() * inv).renormalized());
            est_rot.push_back((conjugator * est.back() * inv).renormalized());
        }
        const double base = rpe_trans(gt, est).rmse;
        const double rotated = rpe_trans(gt_rot, est_rot).rmse;
        CHECK(std::abs(base - rotated) < 1e-9);
    }
}

TEST_CASE("accumulate chains pair poses from the identity") {
    const Trajectory empty = accumulate({});
    REQUIRE(empty.size() == 1);
    CHECK(empty.poses[0].translation.norm() == 0.0);
    CHECK(empty.frame_ids == std::vector<std::int64_t>{0});

    const Pose step = Pose::from_yaw(0.0, {1.0, 0.0, 0.0});
    const Trajectory two = accumulate({step, step});
    REQUIRE(two.size() == 3);
    CHECK((two.poses[2].translation - Eigen::Vector3d(2, 0, 0)).norm() < 1e-15);
    CHECK(two.frame_ids == std::vector<std::int64_t>{0, 1, 2});
}

TEST_CASE("accumulate matches an independent matrix chain") {
    std::mt19937_64 rng(44);
    std::vector<Pose> pairs;
    Eigen::Matrix4d chain = Eigen::Matrix4d::Identity();
    for (int i = 0; i < 50; ++i) {
        pairs.push_back(random_pose(rng, 0.2, 1.0));
        chain *= homogeneous(pairs.back());
    }
    const Trajectory traj = accumulate(pairs);
    REQUIRE(traj.size() == 51);
    CHECK((traj.poses.back().rotation - chain.topLeftCorner<3, 3>()).norm() < 1e-9);
    CHECK((traj.poses.back().translation - chain.topRightCorner<3, 1>()).norm() < 1e-9);

    // consecutive relative poses of the trajectory reproduce the input pairs
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const Pose rederived = traj.poses[k - 1].inverse() * traj.poses[k];
        CHECK((rederived.rotation - pairs[k - 1].rotation).norm() < 1e-9);
        CHECK((rederived.translation - pairs[k - 1].translation).norm() < 1e-9);
    }
}

TEST_CASE("csv report pins the header, row format, and mean rows") {
    CHECK(report_csv({}) == "seq,backend,mode,rmse,pairs\n");

    ReportCell cell;
    cell.seq = "0000";
    cell.backend = "NDT";
    cell.mode = "RMD";
    cell.report.rmse = 0.2101;
    cell.report.pairs = 153;
    CHECK(report_csv({cell}) ==
          "seq,backend,mode,rmse,pairs\n"
          "0000,NDT,RMD,0.2101,153\n"
          "mean,NDT,RMD,0.2101,153\n");
}

TEST_CASE("csv rows sort by (seq, backend, mode) and means recompute") {
    std::vector<ReportCell> cells;
    const char* seqs[] = {"0011", "0003"};
    const char* backends[] = {"NDT", "ICP"};
    const char* modes[] = {"rmd", "baseline"};
    double value = 0.1;
    for (const char* s : seqs) {
        for (const char* b : backends) {
            for (const char* m : modes) {
                ReportCell cell;
                cell.seq = s;
                cell.backend = b;
                cell.mode = m;
                cell.report.rmse = value;
                cell.report.pairs = 100;
                value += 0.05;
                cells.push_back(cell);
            }
        }
    }
    const std::string text = report_csv(cells);

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    REQUIRE(lines.size() == 1 + 8 + 4);  // header, cells, one mean per column
    CHECK(lines[0] == "seq,backend,mode,rmse,pairs");
    // sorted data rows: seq 0003 before 0011, ICP before NDT, baseline before rmd
    CHECK(lines[1].rfind("0003,ICP,baseline,", 0) == 0);
    CHECK(lines[2].rfind("0003,ICP,rmd,", 0) == 0);
    CHECK(lines[3].rfind("0003,NDT,baseline,", 0) == 0);
    CHECK(lines[5].rfind("0011,ICP,baseline,", 0) == 0);

    // ICP/baseline cells got 0.25 (seq 0011) and 0.45 (seq 0003): mean 0.35
    char expected[64];
    std::snprintf(expected, sizeof expected, "mean,ICP,baseline,%.4f,200", (0.25 + 0.45) / 2.0);
    CHECK(text.find(expected) != std::string::npos);
}
