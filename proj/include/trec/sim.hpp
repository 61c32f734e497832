#pragma once

#include <optional>
#include <vector>

#include "trec/geometry.hpp"
#include "trec/rng.hpp"

namespace trec::sim {

// Axis-aligned box, the only scene primitive. Stairs are box stacks, walls
// and poles are tall boxes, the ground is a thin slab.
struct Aabb {
    Vec3f lo = Vec3f::Zero();
    Vec3f hi = Vec3f::Zero();

    bool contains_xy(float x, float y) const {
        return x >= lo.x() && x <= hi.x() && y >= lo.y() && y <= hi.y();
    }
    bool inside(const Vec3f& p) const {
        return p.x() > lo.x() && p.x() < hi.x() && p.y() > lo.y() && p.y() < hi.y() &&
               p.z() > lo.z() && p.z() < hi.z();
    }
};

struct RayHit {
    float t = 0.f;
    Vec3f point = Vec3f::Zero();
    int box = -1;
};

// Parametric urban scene supporting exact ray casting and dense surface
// sampling.
struct Scene {
    std::vector<Aabb> boxes;
    float workspace = 5.0f;  // half extent of the usable area, meters

    // Nearest intersection along a unit-length direction within [tmin, tmax].
    std::optional<RayHit> raycast(const Vec3f& origin, const Vec3f& dir, float tmin,
                                  float tmax) const;

    // Top surface height at (x, y): max top of the boxes covering that
    // column. The ground slab makes this 0 inside the workspace.
    float height_at(float x, float y) const;

    bool inside_any(const Vec3f& p) const;
};

// Uniform sampling ranges for the randomized scene elements.
struct SceneParams {
    float stair_width_min = 0.2f, stair_width_max = 0.5f;    // tread depth, m
    float stair_height_min = 0.08f, stair_height_max = 0.25f;
    float box_wl_min = 0.2f, box_wl_max = 2.0f;
    float box_height_min = 0.08f, box_height_max = 0.25f;
    float corridor_width_min = 2.0f, corridor_width_max = 6.0f;

    int num_stair_flights = 1;
    int min_steps = 4, max_steps = 8;
    float stair_lateral_min = 1.5f, stair_lateral_max = 3.0f;
    int num_boxes = 3;
    int num_poles = 2;
    int num_corridors = 1;
    float wall_height = 2.0f;   // walls share one height
    float wall_thickness = 0.2f;
    float pole_side = 0.1f;
    float pole_height = 2.0f;
    float workspace = 5.0f;
};

Scene generate_scene(const SceneParams& params, uint64_t seed);

// Pinhole-style depth camera; frame is x right, y down, z forward.
struct CameraModel {
    float fov_h_deg = 87.f;
    float fov_v_deg = 58.f;
    int width = 80;
    int height = 60;
    float min_range = 0.3f;
    float max_range = 3.0f;
    Pose mount;  // robot-from-camera
};

// Four cameras at the front, back, left and right, each pitched 30 degrees
// downward.
std::vector<CameraModel> default_camera_rig();

// Mount pose for one camera: yaw about z, then the downward pitch, placed
// radius meters out from the base center.
Pose camera_mount(double yaw_rad, double pitch_down_rad, double radius);

// One ray per pixel; world-frame hit points of the nearest intersections.
PointCloud raycast_depth(const Scene& scene, const Pose& camera_world, const CameraModel& cam);

// Union of all camera casts, expressed in the robot frame.
PointCloud render_measurement(const Scene& scene, const Pose& robot_world,
                              const std::vector<CameraModel>& cams);

// Uniform surface sampling of every primitive face clipped to the cube of
// the given extent around center; world frame. density is points per m^2.
PointCloud sample_ground_truth(const Scene& scene, const Vec3& center, float extent,
                               double density, uint64_t seed);

struct TrajectorySample {
    std::vector<Pose> poses;  // world-from-robot
    bool truncated = false;   // stopped early at an untraversable edge
};

struct TrajectoryParams {
    double dt = 0.1;
    double speed_min = 0.2, speed_max = 1.0;
    double base_height = 0.5;       // nominal base height above the ground
    double max_step_up = 0.3;       // climbable height difference per step
    double yaw_offset_max = 0.6;    // base orientation offset from the walk direction
    double target_dist_min = 2.0, target_dist_max = 5.0;
};

// Kinematic height-following walk towards randomized reachable targets.
TrajectorySample sample_trajectory(const Scene& scene, uint64_t seed, int num_steps,
                                   const TrajectoryParams& params = {});

// Odometry corruption: cumulative per-step bias, optional random walk, and
// step-change events. Ground-truth poses are kept by the caller.
struct DriftSpec {
    Vec3 per_step_bias = Vec3::Zero();
    double per_step_sigma = 0.0;
    std::vector<std::pair<int, Vec3>> step_events;
};

std::vector<Pose> inject_drift(const std::vector<Pose>& poses, const DriftSpec& spec,
                               uint64_t seed);

}  // namespace trec::sim
