#pragma once

#include "trec/grid.hpp"
#include "trec/metrics.hpp"
#include "trec/model.hpp"
#include "trec/trajectory.hpp"
#include "trec/voxelizer.hpp"

namespace trec {

// Re-projects the previous estimate into the current robot frame: devoxelize
// in the previous grid, transform by the odometry increment, re-voxelize
// with k = 1. Cells leaving the grid are dropped by the re-voxelization.
SparseTensor reproject_previous(const SparseTensor& prev_estimate, const Pose& prev_odom,
                                const Pose& cur_odom, const GridConfig& cfg);

// Network input for one step: temporal concatenation of the voxelized
// measurement (k = 0) and the re-projected previous estimate (k = 1).
SparseTensor build_step_input(const PointCloud& measurement_robot,
                              const SparseTensor& prev_estimate, const Pose& prev_odom,
                              const Pose& cur_odom, const GridConfig& cfg);

struct RolloutResult {
    std::vector<SparseTensor> estimates;  // per step, robot-frame grid, k = 0 slice
};

// Auto-regressive inference over a trajectory. The fed-back estimate is a
// constant: no gradients flow across time steps.
RolloutResult rollout(Model& model, const Trajectory& traj, float alpha,
                      bool use_feedback = true);

// Per-frame metrics of a rollout. Estimates are mapped to the world frame
// through the true pose when use_true_pose is set (measurement-aligned
// evaluation), through odometry otherwise.
std::vector<MetricsRecord> evaluate_rollout(Model& model, const Trajectory& traj, float alpha,
                                            bool use_true_pose = true);

MetricsRecord evaluate_estimate_cloud(const PointCloud& estimate_world,
                                      const PointCloud& gt_world, const Pose& eval_pose,
                                      int grid_dim, float cell_size);

struct AblationRow {
    double rate = 0.0;
    MetricsSummary metrics;
};

// Rollouts with a per-frame measurement removal rate; one summary row per
// rate, in the given order.
std::vector<AblationRow> sparsity_ablation(Model& model, const std::vector<Trajectory>& dataset,
                                           const std::vector<double>& rates, uint64_t seed);

// Fraction of ground-truth voxels covered by measurement voxels, both in the
// robot-frame grid. Reported by data generation as a dataset statistic.
double visibility_fraction(const PointCloud& measurement_robot, const PointCloud& gt_world,
                           const Pose& true_pose, const GridConfig& cfg);

}  // namespace trec
