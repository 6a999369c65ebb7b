#include "dynreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>
#include <utility>

#include "dynreg/errors.hpp"

namespace dynreg {

RpeReport rpe_trans(const std::vector<Pose>& gt_pairs, const std::vector<Pose>& est_pairs) {
    if (gt_pairs.empty()) throw InvalidInputError("rpe_trans: no pose pairs");
    if (gt_pairs.size() != est_pairs.size()) {
        throw InvalidInputError("rpe_trans: ground truth and estimate lengths differ");
    }
    RpeReport report;
    report.pairs = gt_pairs.size();
    report.errors.reserve(report.pairs);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < report.pairs; ++i) {
        if (!gt_pairs[i].is_valid(1e-6) || !est_pairs[i].is_valid(1e-6)) {
            throw InvalidInputError("rpe_trans: invalid pose in input");
        }
        const double err = (gt_pairs[i].inverse() * est_pairs[i]).translation.norm();
        report.errors.push_back(err);
        sum_sq += err * err;
    }
    report.rmse = std::sqrt(sum_sq / static_cast<double>(report.pairs));
    return report;
}

Trajectory accumulate(const std::vector<Pose>& pair_poses) {
    Trajectory traj;
    traj.poses.push_back(Pose::identity());
    traj.frame_ids.push_back(0);
    for (std::size_t i = 0; i < pair_poses.size(); ++i) {
        traj.poses.push_back((traj.poses.back() * pair_poses[i]).renormalized());
        traj.frame_ids.push_back(static_cast<std::int64_t>(i) + 1);
    }
    return traj;
}

std::string report_csv(const std::vector<ReportCell>& cells) {
    std::vector<const ReportCell*> order;
    order.reserve(cells.size());
    for (const ReportCell& cell : cells) order.push_back(&cell);
    std::sort(order.begin(), order.end(), [](const ReportCell* a, const ReportCell* b) {
        return std::tie(a->seq, a->backend, a->mode) < std::tie(b->seq, b->backend, b->mode);
    });

    auto format_row = [](const std::string& seq, const std::string& backend,
                         const std::string& mode, double rmse, std::size_t pairs) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", rmse);
        return seq + "," + backend + "," + mode + "," + buf + "," + std::to_string(pairs) + "\n";
    };

    std::string text = "seq,backend,mode,rmse,pairs\n";
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::size_t>>
        columns;  // (backend, mode) -> (rmse list, total pairs)
    for (const ReportCell* cell : order) {
        text += format_row(cell->seq, cell->backend, cell->mode, cell->report.rmse,
                           cell->report.pairs);
        auto& column = columns[{cell->backend, cell->mode}];
        column.first.push_back(cell->report.rmse);
        column.second += cell->report.pairs;
    }
    for (const auto& [key, column] : columns) {
        double sum = 0.0;
        for (double v : column.first) sum += v;
        const double mean = sum / static_cast<double>(column.first.size());
        text += format_row("mean", key.first, key.second, mean, column.second);
    }
    return text;
}

}  // namespace dynreg
