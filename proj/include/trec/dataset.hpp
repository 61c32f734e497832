#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trec/sim.hpp"
#include "trec/trajectory.hpp"

namespace trec {

// Thrown on malformed files; carries the file name and byte offset.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, uint64_t offset, const std::string& what)
        : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what) {}
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Writes bytes to a temporary file in the same directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

// Trajectory dataset file, magic "TREC" version 1, little-endian.
// Header: f32 cell_size, u32 grid_dim, u32 num_frames, u32 num_cameras,
// per camera a robot-from-camera mount pose (7 x f32: tx ty tz qx qy qz qw).
// Per frame: true pose (7 x f32), odometry pose (7 x f32),
// u32 n_meas + n_meas x 3 x f32 (robot frame),
// u32 n_gt + n_gt x 3 x f32 (world frame).
struct DatasetInfo {
    float cell_size = 0.05f;
    uint32_t grid_dim = 64;
    std::vector<Pose> camera_mounts;
};

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& traj,
                           const DatasetInfo& info);
Trajectory read_trajectory_file(const std::filesystem::path& path, DatasetInfo* info = nullptr);

// All *.trec files of a directory, sorted by name.
std::vector<std::filesystem::path> list_trajectory_files(const std::filesystem::path& dir);

// Estimate file, magic "TRCE" version 1: f32 cell_size, u32 grid_dim,
// u32 num_frames; per frame true pose, odometry pose (7 x f32 each),
// u32 n + n x 3 x f32 robot-frame estimate points.
struct EstimateFrames {
    float cell_size = 0.05f;
    uint32_t grid_dim = 64;
    std::vector<Pose> true_poses;
    std::vector<Pose> odom_poses;
    std::vector<PointCloud> clouds;  // robot frame
};

void write_estimate_file(const std::filesystem::path& path, const EstimateFrames& est);
EstimateFrames read_estimate_file(const std::filesystem::path& path);

// ---- synthetic data generation ----

struct DataGenConfig {
    sim::SceneParams scene;
    sim::TrajectoryParams walk;
    int grid_dim = 64;
    float cell_size = 0.05f;
    int steps = 100;
    double gt_density = 1600.0;  // points per m^2
    double gt_margin_scale = 1.5;  // gt cube extent relative to the grid extent
    sim::DriftSpec drift;
};

struct GeneratedTrajectory {
    Trajectory frames;
    bool truncated = false;
    double mean_visibility = 0.0;
};

GeneratedTrajectory generate_trajectory(const DataGenConfig& cfg, uint64_t seed);

}  // namespace trec
