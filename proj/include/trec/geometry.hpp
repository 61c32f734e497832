#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace trec {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Quat = Eigen::Quaterniond;

// Frame a point cloud is expressed in. "robot" is the full body frame of the
// robot (translation and rotation), "world" the fixed inertial frame.
enum class Frame : uint8_t { world = 0, robot = 1, camera = 2 };

// Rigid transform: rotation applied first, then translation.
// Convention project-wide: quaternion components ordered (x, y, z, w),
// right-handed frames, z up. Robot poses are stored world-from-robot.
struct Pose {
    Vec3 t = Vec3::Zero();
    Quat q = Quat::Identity();

    Pose() = default;
    Pose(const Vec3& translation, const Quat& rotation)
        : t(translation), q(rotation.normalized()) {}

    static Pose identity() { return Pose(); }

    Vec3 apply(const Vec3& p) const { return q * p + t; }
    Vec3f apply(const Vec3f& p) const { return (q * p.cast<double>() + t).cast<float>(); }

    // Rotation about z by yaw radians, then translation.
    static Pose planar(double x, double y, double z, double yaw) {
        return Pose(Vec3(x, y, z), Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
    }
};

// b applied first, then a.
Pose compose(const Pose& a, const Pose& b);

Pose inverse(const Pose& p);

// Map from the previous robot frame into the current robot frame:
// inverse(cur_pose) ∘ prev_pose. Both inputs are world-from-robot.
Pose relative_transform(const Pose& prev_pose, const Pose& cur_pose);

struct PointCloud {
    std::vector<Vec3f> points;
    Frame frame = Frame::world;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

PointCloud transform_points(const Pose& p, const PointCloud& cloud);

}  // namespace trec
