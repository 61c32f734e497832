#include "trec/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trec/check.hpp"

namespace trec::sim {

std::optional<RayHit> Scene::raycast(const Vec3f& origin, const Vec3f& dir, float tmin,
                                     float tmax) const {
    float best_t = tmax;
    int best_box = -1;
    for (size_t b = 0; b < boxes.size(); ++b) {
        const Aabb& box = boxes[b];
        // slab test; the entry point must lie at t >= tmin, so surfaces
        // behind the minimum range (or enclosing the origin) never hit
        float t0 = -std::numeric_limits<float>::infinity();
        float t1 = best_t;
        bool ok = true;
        for (int a = 0; a < 3 && ok; ++a) {
            const float d = dir[a];
            if (std::abs(d) < 1e-12f) {
                if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) ok = false;
                continue;
            }
            const float inv = 1.f / d;
            float near = (box.lo[a] - origin[a]) * inv;
            float far = (box.hi[a] - origin[a]) * inv;
            if (near > far) std::swap(near, far);
            t0 = std::max(t0, near);
            t1 = std::min(t1, far);
            if (t0 > t1) ok = false;
        }
        if (!ok) continue;
        if (t0 >= tmin && t0 < best_t) {
            best_t = t0;
            best_box = static_cast<int>(b);
        }
    }
    if (best_box < 0) return std::nullopt;
    return RayHit{best_t, origin + best_t * dir, best_box};
}

float Scene::height_at(float x, float y) const {
    float h = -std::numeric_limits<float>::infinity();
    for (const Aabb& box : boxes) {
        if (box.contains_xy(x, y)) h = std::max(h, box.hi.z());
    }
    return h;
}

bool Scene::inside_any(const Vec3f& p) const {
    for (const Aabb& box : boxes) {
        if (box.inside(p)) return true;
    }
    return false;
}

namespace {

Aabb make_box(const Vec3f& center_xy_bottom, float wx, float wy, float hz) {
    Aabb b;
    b.lo = Vec3f(center_xy_bottom.x() - 0.5f * wx, center_xy_bottom.y() - 0.5f * wy,
                 center_xy_bottom.z());
    b.hi = Vec3f(center_xy_bottom.x() + 0.5f * wx, center_xy_bottom.y() + 0.5f * wy,
                 center_xy_bottom.z() + hz);
    return b;
}

}  // namespace

Scene generate_scene(const SceneParams& params, uint64_t seed) {
    Rng rng(seed);
    Scene scene;
    scene.workspace = params.workspace;

    // ground slab, larger than the workspace so border rays still land and
    // deep enough that its bottom face never enters a ground-truth cube
    const float g = params.workspace + 4.f;
    scene.boxes.push_back(Aabb{Vec3f(-g, -g, -5.f), Vec3f(g, g, 0.f)});

    const float ws = params.workspace;

    for (int f = 0; f < params.num_stair_flights; ++f) {
        const int n_steps = static_cast<int>(rng.uniform_int(params.min_steps, params.max_steps));
        const float tread = static_cast<float>(rng.uniform(params.stair_width_min, params.stair_width_max));
        const float riser =
            static_cast<float>(rng.uniform(params.stair_height_min, params.stair_height_max));
        const float lateral =
            static_cast<float>(rng.uniform(params.stair_lateral_min, params.stair_lateral_max));
        const int axis = static_cast<int>(rng.uniform_index(2));  // 0: +x, 1: +y
        const float sx = static_cast<float>(rng.uniform(-0.5 * ws, 0.5 * ws));
        const float sy = static_cast<float>(rng.uniform(-0.5 * ws, 0.5 * ws));
        for (int i = 0; i < n_steps; ++i) {
            // monotone stack: step i spans the full height from the ground
            const float h = riser * static_cast<float>(i + 1);
            Aabb step;
            if (axis == 0) {
                step.lo = Vec3f(sx + tread * static_cast<float>(i), sy - 0.5f * lateral, 0.f);
                step.hi = Vec3f(sx + tread * static_cast<float>(i + 1), sy + 0.5f * lateral, h);
            } else {
                step.lo = Vec3f(sx - 0.5f * lateral, sy + tread * static_cast<float>(i), 0.f);
                step.hi = Vec3f(sx + 0.5f * lateral, sy + tread * static_cast<float>(i + 1), h);
            }
            scene.boxes.push_back(step);
        }
    }

    for (int b = 0; b < params.num_boxes; ++b) {
        const float wx = static_cast<float>(rng.uniform(params.box_wl_min, params.box_wl_max));
        const float wy = static_cast<float>(rng.uniform(params.box_wl_min, params.box_wl_max));
        const float h = static_cast<float>(rng.uniform(params.box_height_min, params.box_height_max));
        const float cx = static_cast<float>(rng.uniform(-0.8 * ws, 0.8 * ws));
        const float cy = static_cast<float>(rng.uniform(-0.8 * ws, 0.8 * ws));
        scene.boxes.push_back(make_box(Vec3f(cx, cy, 0.f), wx, wy, h));
    }

    for (int p = 0; p < params.num_poles; ++p) {
        const float cx = static_cast<float>(rng.uniform(-0.8 * ws, 0.8 * ws));
        const float cy = static_cast<float>(rng.uniform(-0.8 * ws, 0.8 * ws));
        scene.boxes.push_back(
            make_box(Vec3f(cx, cy, 0.f), params.pole_side, params.pole_side, params.pole_height));
    }

    for (int c = 0; c < params.num_corridors; ++c) {
        const float width =
            static_cast<float>(rng.uniform(params.corridor_width_min, params.corridor_width_max));
        const int axis = static_cast<int>(rng.uniform_index(2));
        const float center = static_cast<float>(rng.uniform(-0.3 * ws, 0.3 * ws));
        const float half = 0.5f * width + 0.5f * params.wall_thickness;
        for (float side : {-half, half}) {
            Aabb wall;
            if (axis == 0) {  // corridor along x: walls at constant y
                wall.lo = Vec3f(-ws, center + side - 0.5f * params.wall_thickness, 0.f);
                wall.hi = Vec3f(ws, center + side + 0.5f * params.wall_thickness,
                                params.wall_height);
            } else {
                wall.lo = Vec3f(center + side - 0.5f * params.wall_thickness, -ws, 0.f);
                wall.hi = Vec3f(center + side + 0.5f * params.wall_thickness, ws,
                                params.wall_height);
            }
            scene.boxes.push_back(wall);
        }
    }
    return scene;
}

Pose camera_mount(double yaw_rad, double pitch_down_rad, double radius) {
    const double c = std::cos(pitch_down_rad), s = std::sin(pitch_down_rad);
    const Eigen::AngleAxisd yaw(yaw_rad, Vec3::UnitZ());
    const Vec3 forward = yaw * Vec3(c, 0.0, -s);
    const Vec3 right = yaw * Vec3(0.0, -1.0, 0.0);
    const Vec3 down = forward.cross(right);
    Eigen::Matrix3d rot;
    rot.col(0) = right;
    rot.col(1) = down;
    rot.col(2) = forward;
    const Vec3 t = yaw * Vec3(radius, 0.0, 0.0);
    return Pose(t, Quat(rot));
}

std::vector<CameraModel> default_camera_rig() {
    std::vector<CameraModel> rig(4);
    const double pitch = 30.0 * M_PI / 180.0;
    const double yaws[4] = {0.0, M_PI, M_PI / 2.0, -M_PI / 2.0};  // front, back, left, right
    for (int i = 0; i < 4; ++i) rig[static_cast<size_t>(i)].mount = camera_mount(yaws[i], pitch, 0.3);
    return rig;
}

PointCloud raycast_depth(const Scene& scene, const Pose& camera_world, const CameraModel& cam) {
    TREC_CHECK(cam.width > 0 && cam.height > 0 && cam.max_range > cam.min_range,
               "invalid camera model");
    PointCloud cloud;
    cloud.frame = Frame::world;
    // a camera pressed into geometry is blind
    if (scene.inside_any(camera_world.t.cast<float>())) return cloud;
    cloud.points.reserve(static_cast<size_t>(cam.width * cam.height) / 2);

    const float tan_h = std::tan(0.5f * cam.fov_h_deg * static_cast<float>(M_PI) / 180.f);
    const float tan_v = std::tan(0.5f * cam.fov_v_deg * static_cast<float>(M_PI) / 180.f);
    const Eigen::Matrix3f rot = camera_world.q.toRotationMatrix().cast<float>();
    const Vec3f origin = camera_world.t.cast<float>();

    for (int v = 0; v < cam.height; ++v) {
        const float ny = (2.f * (static_cast<float>(v) + 0.5f) / static_cast<float>(cam.height) - 1.f) * tan_v;
        for (int u = 0; u < cam.width; ++u) {
            const float nx = (2.f * (static_cast<float>(u) + 0.5f) / static_cast<float>(cam.width) - 1.f) * tan_h;
            const Vec3f dir_cam = Vec3f(nx, ny, 1.f).normalized();
            const Vec3f dir = rot * dir_cam;
            if (auto hit = scene.raycast(origin, dir, cam.min_range, cam.max_range)) {
                cloud.points.push_back(hit->point);
            }
        }
    }
    return cloud;
}

PointCloud render_measurement(const Scene& scene, const Pose& robot_world,
                              const std::vector<CameraModel>& cams) {
    PointCloud merged;
    merged.frame = Frame::robot;
    const Pose world_from_robot = robot_world;
    const Pose robot_from_world = inverse(world_from_robot);
    for (const CameraModel& cam : cams) {
        const Pose cam_world = compose(world_from_robot, cam.mount);
        PointCloud hits = raycast_depth(scene, cam_world, cam);
        for (const Vec3f& p : hits.points) {
            merged.points.push_back(robot_from_world.apply(p));
        }
    }
    return merged;
}

PointCloud sample_ground_truth(const Scene& scene, const Vec3& center, float extent,
                               double density, uint64_t seed) {
    TREC_CHECK(density > 0.0, "ground-truth sampling density must be positive");
    Rng rng(seed);
    PointCloud cloud;
    cloud.frame = Frame::world;

    const Vec3f lo = center.cast<float>() - Vec3f::Constant(0.5f * extent);
    const Vec3f hi = center.cast<float>() + Vec3f::Constant(0.5f * extent);

    // every face of every box, clipped to the cube; points buried inside
    // neighboring solids are rejected by a small outward probe
    constexpr float kEps = 1e-4f;
    for (size_t b = 0; b < scene.boxes.size(); ++b) {
        const Aabb& box = scene.boxes[b];
        for (int axis = 0; axis < 3; ++axis) {
            for (int side = 0; side < 2; ++side) {
                const float plane = side ? box.hi[axis] : box.lo[axis];
                if (plane < lo[axis] || plane > hi[axis]) continue;
                const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
                const float lo1 = std::max(box.lo[a1], lo[a1]);
                const float hi1 = std::min(box.hi[a1], hi[a1]);
                const float lo2 = std::max(box.lo[a2], lo[a2]);
                const float hi2 = std::min(box.hi[a2], hi[a2]);
                if (lo1 >= hi1 || lo2 >= hi2) continue;
                const double area = static_cast<double>(hi1 - lo1) * static_cast<double>(hi2 - lo2);
                const double expect = area * density;
                int64_t n = static_cast<int64_t>(expect);
                if (rng.uniform() < expect - static_cast<double>(n)) ++n;
                const float normal_dir = side ? 1.f : -1.f;
                for (int64_t i = 0; i < n; ++i) {
                    Vec3f p;
                    p[axis] = plane;
                    p[a1] = static_cast<float>(rng.uniform(lo1, hi1));
                    p[a2] = static_cast<float>(rng.uniform(lo2, hi2));
                    Vec3f probe = p;
                    probe[axis] += normal_dir * kEps;
                    if (scene.inside_any(probe)) continue;  // buried face region
                    cloud.points.push_back(p);
                }
            }
        }
    }
    return cloud;
}

TrajectorySample sample_trajectory(const Scene& scene, uint64_t seed, int num_steps,
                                   const TrajectoryParams& params) {
    Rng rng(seed);
    TrajectorySample sample;

    // start on standable ground
    double x = 0.0, y = 0.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
        x = rng.uniform(-0.4 * scene.workspace, 0.4 * scene.workspace);
        y = rng.uniform(-0.4 * scene.workspace, 0.4 * scene.workspace);
        const float h = scene.height_at(static_cast<float>(x), static_cast<float>(y));
        if (h <= 0.5f) break;
    }

    const double speed = rng.uniform(params.speed_min, params.speed_max);
    double heading = rng.uniform(0.0, 2.0 * M_PI);
    double tx = x + params.target_dist_min * std::cos(heading);
    double ty = y + params.target_dist_min * std::sin(heading);
    auto pick_target = [&]() {
        for (int attempt = 0; attempt < 50; ++attempt) {
            const double d = rng.uniform(params.target_dist_min, params.target_dist_max);
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            const double cx = x + d * std::cos(a);
            const double cy = y + d * std::sin(a);
            if (std::abs(cx) < scene.workspace && std::abs(cy) < scene.workspace) {
                tx = cx;
                ty = cy;
                return;
            }
        }
        tx = 0.0;
        ty = 0.0;
    };
    pick_target();
    const double yaw_offset = rng.uniform(-params.yaw_offset_max, params.yaw_offset_max);

    for (int step = 0; step < num_steps; ++step) {
        const float h = scene.height_at(static_cast<float>(x), static_cast<float>(y));
        heading = std::atan2(ty - y, tx - x);
        sample.poses.push_back(
            Pose::planar(x, y, static_cast<double>(h) + params.base_height, heading + yaw_offset));

        if (step + 1 == num_steps) break;
        const double nx = x + std::cos(heading) * speed * params.dt;
        const double ny = y + std::sin(heading) * speed * params.dt;
        const float nh = scene.height_at(static_cast<float>(nx), static_cast<float>(ny));
        if (static_cast<double>(nh - h) > params.max_step_up) {
            sample.truncated = true;  // unreachable edge (wall or tall box)
            break;
        }
        x = nx;
        y = ny;
        if (std::hypot(tx - x, ty - y) < 0.3) pick_target();
    }
    return sample;
}

std::vector<Pose> inject_drift(const std::vector<Pose>& poses, const DriftSpec& spec,
                               uint64_t seed) {
    Rng rng(seed);
    std::vector<Pose> out;
    out.reserve(poses.size());
    Vec3 offset = Vec3::Zero();
    for (size_t t = 0; t < poses.size(); ++t) {
        offset += spec.per_step_bias;
        if (spec.per_step_sigma > 0.0) {
            offset += Vec3(rng.normal(0.0, spec.per_step_sigma), rng.normal(0.0, spec.per_step_sigma),
                           rng.normal(0.0, spec.per_step_sigma));
        }
        for (const auto& [step, delta] : spec.step_events) {
            if (static_cast<size_t>(step) == t) offset += delta;
        }
        out.emplace_back(poses[t].t + offset, poses[t].q);
    }
    return out;
}

}  // namespace trec::sim
