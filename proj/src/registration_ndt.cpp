#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>

#include "dynreg/errors.hpp"
#include "dynreg/kdtree.hpp"
#include "dynreg/registration.hpp"

namespace dynreg {

namespace {

constexpr int kMinPointsPerCell = 5;
constexpr double kEigenvalueFloor = 0.01;  // relative to the largest eigenvalue
constexpr int kMaxStepHalvings = 8;
constexpr double kMahalanobisCap = 40.0;   // exp(-q/2) below ~2e-9 is noise

// The optimizer runs in two stages that differ in how a transformed source
// point is associated to target Gaussians and in the per-term objective.
//
// Broad: every populated cell in the surrounding 3x3x3 block contributes the
// classic Gaussian score exp(-q/2). The 27-cell reach gives a capture basin
// wider than one cell, but the weighted optimum is biased a few millimetres
// away from the true pose because within a cell the weights vary point to
// point, so the per-cell mean cancellation does not hold.
//
// Exact: each point is scored against one cell — the cell of its nearest
// target point — with the capped squared Mahalanobis distance (the Gaussian
// log-score) as the objective. On an exactly corresponding pair the gradient
// vanishes at the true pose: nearest neighbors are the points' own twins, so
// every cell is scored by its own sample set, which sums to its mean. Taking
// the containing cell instead would misassign points near cell faces and
// leave a residual of about 1% of the cell size; nearest-neighbor
// association has no such cliff. This stage is the objective reported in
// final_cost and cost_trace.
enum class Stage { Broad, Exact };

struct NdtCell {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();  // floored inverse covariance
};

/// Dense voxel grid over the bounding box of populated cells; lookups during
/// score evaluation are index arithmetic instead of hashing.
class NdtGrid {
public:
    NdtGrid(const PointCloud& target, double voxel) : voxel_(voxel) {
        struct Accum {
            Eigen::Vector3d sum = Eigen::Vector3d::Zero();
            Eigen::Matrix3d sq = Eigen::Matrix3d::Zero();
            int count = 0;
        };
        std::int64_t lo[3] = {0, 0, 0};
        std::int64_t hi[3] = {-1, -1, -1};
        std::vector<std::array<std::int64_t, 3>> keys(target.size());
        for (std::size_t i = 0; i < target.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                keys[i][a] = static_cast<std::int64_t>(std::floor(target.points[i][a] / voxel));
                if (i == 0 || keys[i][a] < lo[a]) lo[a] = keys[i][a];
                if (i == 0 || keys[i][a] > hi[a]) hi[a] = keys[i][a];
            }
        }
        if (target.empty()) return;
        for (int a = 0; a < 3; ++a) {
            origin_[a] = lo[a];
            dims_[a] = hi[a] - lo[a] + 1;
        }
        std::vector<Accum> accums(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]));
        for (std::size_t i = 0; i < target.size(); ++i) {
            Accum& acc = accums[flat_index(keys[i])];
            acc.sum += target.points[i];
            acc.sq += target.points[i] * target.points[i].transpose();
            ++acc.count;
        }
        slot_.assign(accums.size(), -1);
        for (std::size_t s = 0; s < accums.size(); ++s) {
            const Accum& acc = accums[s];
            if (acc.count < kMinPointsPerCell) continue;
            const double n = static_cast<double>(acc.count);
            const Eigen::Vector3d mean = acc.sum / n;
            Eigen::Matrix3d cov = acc.sq / n - mean * mean.transpose();
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
            Eigen::Vector3d lambda = eig.eigenvalues();
            const double lmax = lambda.maxCoeff();
            if (!(lmax > 1e-12)) continue;  // all cell points coincide
            for (int a = 0; a < 3; ++a) lambda[a] = std::max(lambda[a], kEigenvalueFloor * lmax);
            NdtCell cell;
            cell.mean = mean;
            cell.info = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
            slot_[s] = static_cast<std::int32_t>(cells_.size());
            cells_.push_back(cell);
        }
        point_slot_.resize(target.size());
        for (std::size_t i = 0; i < target.size(); ++i) {
            point_slot_[i] = slot_[flat_index(keys[i])];
        }
    }

    bool empty() const { return cells_.empty(); }

    /// Gaussian of the cell a target point was binned into, or nullptr when
    /// that cell was skipped (too few points or degenerate).
    const NdtCell* cell_of_point(std::size_t target_index) const {
        const std::int32_t s = point_slot_[target_index];
        return s >= 0 ? &cells_[static_cast<std::size_t>(s)] : nullptr;
    }

    template <typename Fn>
    void for_each_nearby_cell(const Point3& p, Fn&& fn) const {
        std::int64_t key[3];
        for (int a = 0; a < 3; ++a) key[a] = static_cast<std::int64_t>(std::floor(p[a] / voxel_));
        constexpr std::int64_t r = 1;
        for (std::int64_t dx = -r; dx <= r; ++dx) {
            const std::int64_t ix = key[0] + dx - origin_[0];
            if (ix < 0 || ix >= dims_[0]) continue;
            for (std::int64_t dy = -r; dy <= r; ++dy) {
                const std::int64_t iy = key[1] + dy - origin_[1];
                if (iy < 0 || iy >= dims_[1]) continue;
                for (std::int64_t dz = -r; dz <= r; ++dz) {
                    const std::int64_t iz = key[2] + dz - origin_[2];
                    if (iz < 0 || iz >= dims_[2]) continue;
                    const std::int32_t s =
                        slot_[static_cast<std::size_t>((ix * dims_[1] + iy) * dims_[2] + iz)];
                    if (s >= 0) fn(cells_[static_cast<std::size_t>(s)]);
                }
            }
        }
    }

private:
    std::size_t flat_index(const std::array<std::int64_t, 3>& key) const {
        return static_cast<std::size_t>(
            ((key[0] - origin_[0]) * dims_[1] + (key[1] - origin_[1])) * dims_[2] +
            (key[2] - origin_[2]));
    }

    double voxel_;
    std::int64_t origin_[3] = {0, 0, 0};
    std::int64_t dims_[3] = {0, 0, 0};
    std::vector<std::int32_t> slot_;
    std::vector<std::int32_t> point_slot_;
    std::vector<NdtCell> cells_;
};

// Objective value at a pose; lower is better for both stages. Broad returns
// the negated Gaussian score sum; exact returns the sum of per-point capped
// half squared Mahalanobis distances, where a point whose associated cell is
// missing contributes the cap so alignment cannot "improve" by shedding
// points.
double evaluate_objective(const NdtGrid& grid, const KdIndex& index, const PointCloud& source,
                          const Pose& pose, Stage stage) {
    double obj = 0.0;
    for (const Point3& p : source.points) {
        const Point3 x = pose.apply(p);
        if (stage == Stage::Broad) {
            grid.for_each_nearby_cell(x, [&](const NdtCell& cell) {
                const Eigen::Vector3d e = x - cell.mean;
                const double q = e.dot(cell.info * e);
                if (q < kMahalanobisCap) obj -= std::exp(-0.5 * q);
            });
        } else {
            double term = kMahalanobisCap;
            if (const NdtCell* cell = grid.cell_of_point(index.nearest(x).index)) {
                const Eigen::Vector3d e = x - cell->mean;
                term = std::min(term, e.dot(cell->info * e));
            }
            obj += 0.5 * term;
        }
    }
    return obj;
}

// Apply delta = [u; omega] on top of `current`, rotating about `center` so a
// pure rotation leaves the point of rotation fixed: x' = R(x - c) + c + u.
Pose step_pose(const Eigen::Matrix<double, 6, 1>& delta, const Pose& current,
               const Eigen::Vector3d& center) {
    Pose d;
    const Eigen::Vector3d omega = delta.tail<3>();
    const double angle = omega.norm();
    if (angle > 1e-14) {
        d.rotation = Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
    }
    d.translation = center + delta.head<3>() - d.rotation * center;
    return (d * current).renormalized();
}

// Damped (Gauss-)Newton descent on one reach's objective. The pose, objective
// value, and iteration budget are carried across stages; costs are recorded
// only when a trace is supplied (the exact stage). Rotation is parameterized
// about the centroid of the transformed source: with rotation about the
// origin, yaw and sideways translation are nearly interchangeable for a
// far-away cloud, and the resulting ill-conditioned Hessians produced huge
// steps that drifted along an objective-flat valley. Convergence is checked
// on the proposed step before moving, so a pose already at a stationary point
// exits without picking up drift.
bool run_stage(const NdtGrid& grid, const KdIndex& index, const PointCloud& source, Stage stage,
               Pose& pose, double& objective, int& iterations_left, int& iterations_used,
               double translation_epsilon, double rotation_epsilon,
               std::vector<double>* cost_trace, double inverse_n) {
    const auto to_cost = [inverse_n](double o) { return o * inverse_n; };
    bool converged = false;
    while (iterations_left > 0) {
        --iterations_left;
        ++iterations_used;

        Eigen::Vector3d center = Eigen::Vector3d::Zero();
        for (const Point3& p : source.points) center += pose.apply(p);
        center *= inverse_n;

        Eigen::Matrix<double, 6, 1> grad = Eigen::Matrix<double, 6, 1>::Zero();
        Eigen::Matrix<double, 6, 6> hess = Eigen::Matrix<double, 6, 6>::Zero();
        for (const Point3& p : source.points) {
            const Point3 x = pose.apply(p);
            const Eigen::Vector3d r = x - center;
            Eigen::Matrix<double, 3, 6> jac;
            jac.leftCols<3>() = Eigen::Matrix3d::Identity();
            jac.rightCols<3>() << 0.0, r.z(), -r.y(), -r.z(), 0.0, r.x(), r.y(), -r.x(), 0.0;
            const auto accumulate = [&](const NdtCell& cell) {
                const Eigen::Vector3d e = x - cell.mean;
                const double q = e.dot(cell.info * e);
                if (q >= kMahalanobisCap) return;
                const double w = stage == Stage::Broad ? std::exp(-0.5 * q) : 1.0;
                const Eigen::Matrix<double, 3, 6> info_jac = cell.info * jac;
                grad += w * (info_jac.transpose() * e);
                hess += w * (jac.transpose() * info_jac);
            };
            if (stage == Stage::Broad) {
                grid.for_each_nearby_cell(x, accumulate);
            } else if (const NdtCell* cell = grid.cell_of_point(index.nearest(x).index)) {
                accumulate(*cell);
            }
        }
        if (!grad.allFinite() || !hess.allFinite()) {
            throw NumericalFailureError("ndt_register: non-finite gradient or Hessian");
        }

        // Newton step on the objective; the ridge keeps the solve well posed
        // when a direction is unobserved.
        const double ridge = 1e-9 * (hess.trace() / 6.0 + 1.0);
        Eigen::Matrix<double, 6, 6> damped = hess;
        damped.diagonal().array() += ridge;
        const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-grad);
        if (!step.allFinite()) {
            throw NumericalFailureError("ndt_register: step solve failed");
        }

        if (step.head<3>().norm() < translation_epsilon &&
            step.tail<3>().norm() < rotation_epsilon) {
            converged = true;  // already at a stationary point; do not move
            break;
        }

        bool accepted = false;
        double scale = 1.0;
        for (int h = 0; h <= kMaxStepHalvings; ++h, scale *= 0.5) {
            const Pose candidate = step_pose(scale * step, pose, center);
            const double candidate_objective =
                evaluate_objective(grid, index, source, candidate, stage);
            if (candidate_objective <= objective) {
                pose = candidate;
                objective = candidate_objective;
                if (cost_trace) cost_trace->push_back(to_cost(objective));
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no non-worsening step exists; stalled

        const Eigen::Matrix<double, 6, 1> applied = scale * step;
        if (applied.head<3>().norm() < translation_epsilon &&
            applied.tail<3>().norm() < rotation_epsilon) {
            converged = true;
            break;
        }
    }
    return converged;
}

}  // namespace

RegistrationResult ndt_register(const PointCloud& target, const PointCloud& source,
                                const RegistrationConfig& cfg) {
    if (!cfg.is_valid()) throw InvalidParameterError("ndt_register: invalid config");
    if (source.empty()) throw NoOverlapError("ndt_register: empty source cloud");

    const NdtGrid grid(target, cfg.ndt_voxel);
    if (grid.empty()) {
        throw NoOverlapError("ndt_register: target has no voxel with enough points");
    }

    const KdIndex index(target);
    const double inverse_n = 1.0 / static_cast<double>(source.size());

    RegistrationResult result;
    result.pose = cfg.initial_guess;

    double broad_objective = evaluate_objective(grid, index, source, result.pose, Stage::Broad);
    if (!(broad_objective < 0.0)) {
        throw NoOverlapError("ndt_register: source outside every populated target voxel");
    }

    int iterations_left = cfg.max_iterations;

    // Stage 1, broad association: pull the pose to within roughly a tenth of
    // a cell, well inside the exact stage's basin. Loose tolerances keep this
    // cheap and let a good initial guess pass through in one iteration.
    run_stage(grid, index, source, Stage::Broad, result.pose, broad_objective, iterations_left,
              result.iterations_used, std::max(cfg.translation_epsilon, 0.1 * cfg.ndt_voxel),
              std::max(cfg.rotation_epsilon, 0.02), nullptr, inverse_n);

    // Stage 2, nearest-neighbor-cell association: the reported objective.
    double objective = evaluate_objective(grid, index, source, result.pose, Stage::Exact);
    result.cost_trace.push_back(objective * inverse_n);
    result.converged = run_stage(grid, index, source, Stage::Exact, result.pose, objective,
                                 iterations_left, result.iterations_used,
                                 cfg.translation_epsilon, cfg.rotation_epsilon,
                                 &result.cost_trace, inverse_n);

    result.final_cost = objective * inverse_n;
    return result;
}

Registrar make_ndt_registrar(const RegistrationConfig& cfg) {
    return [cfg](const PointCloud& target, const PointCloud& source) {
        return ndt_register(target, source, cfg);
    };
}

}  // namespace dynreg
