#pragma once

#include <vector>

#include "trec/geometry.hpp"

namespace trec {

// One time step of a recorded walk. Measurements are stored in the robot
// frame (the honest sensor output); ground truth is stored in the world
// frame. The true/odometry pose pair supports drift experiments: odometry is
// what the pipeline is allowed to use, the true pose what evaluation uses.
struct FrameData {
    Pose true_pose;
    Pose odom_pose;
    PointCloud measurement;   // robot frame
    PointCloud ground_truth;  // world frame
};

using Trajectory = std::vector<FrameData>;

}  // namespace trec
