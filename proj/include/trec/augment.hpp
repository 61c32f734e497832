#pragma once

#include <utility>

#include "trec/rng.hpp"
#include "trec/trajectory.hpp"

namespace trec {

// Training-time measurement corruptions. Defaults are the production ranges;
// every augmentation is pure and deterministic from (config, seed).
struct AugmentConfig {
    bool enable_position = true;
    double position_range = 0.05;  // per-axis uniform disturbance, m

    bool enable_tilt = true;
    double tilt_max_deg = 1.0;  // rotation about a random horizontal axis

    bool enable_patch_height = true;
    double patch_height_range = 0.05;  // per-patch vertical shift, m

    bool enable_patch_prune = true;

    bool enable_outliers = true;

    bool enable_pose_jitter = true;
    double pose_jitter_range = 0.05;  // robot position disturbance, m

    // patch geometry: vertical cylinders at uniform xy locations
    int patch_count_min = 1, patch_count_max = 5;
    double patch_radius_min = 0.1, patch_radius_max = 0.4;

    // outlier clusters: gaussian blobs at uniform positions in the volume
    int outlier_cluster_min = 1, outlier_cluster_max = 5;
    int outlier_points_min = 10, outlier_points_max = 50;
    double outlier_sigma = 0.05;

    double volume_half_extent = 1.6;  // region for patches and outliers, m

    static AugmentConfig all_off() {
        AugmentConfig c;
        c.enable_position = c.enable_tilt = c.enable_patch_height = false;
        c.enable_patch_prune = c.enable_outliers = c.enable_pose_jitter = false;
        return c;
    }
};

// Applies, in this fixed order: position jitter, tilt, patch height shifts,
// patch pruning, outlier clusters, pose jitter. The measurement is expected
// in the robot frame.
std::pair<PointCloud, Pose> augment_frame(const PointCloud& measurement, const Pose& pose,
                                          const AugmentConfig& cfg, uint64_t seed);

// Reflects points and poses about the world x = 0 and/or y = 0 planes,
// applied uniformly to every frame of the trajectory.
Trajectory mirror_trajectory(const Trajectory& frames, bool mirror_x, bool mirror_y);

Vec3f mirror_point(const Vec3f& p, bool mirror_x, bool mirror_y);
Pose mirror_pose(const Pose& p, bool mirror_x, bool mirror_y);

// Uniformly random subset with exactly floor((1 - fraction) * N) points
// retained, in original order.
PointCloud remove_fraction(const PointCloud& cloud, double fraction, uint64_t seed);

}  // namespace trec
