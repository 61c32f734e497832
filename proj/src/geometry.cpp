#include "trec/geometry.hpp"

#include "trec/check.hpp"

namespace trec {

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.q = (a.q * b.q).normalized();
    out.t = a.q * b.t + a.t;
    return out;
}

Pose inverse(const Pose& p) {
    Pose out;
    out.q = p.q.conjugate();
    out.t = -(out.q * p.t);
    return out;
}

Pose relative_transform(const Pose& prev_pose, const Pose& cur_pose) {
    return compose(inverse(cur_pose), prev_pose);
}

PointCloud transform_points(const Pose& p, const PointCloud& cloud) {
    PointCloud out;
    out.frame = cloud.frame;
    out.points.reserve(cloud.points.size());
    const Eigen::Matrix3f rot = p.q.toRotationMatrix().cast<float>();
    const Vec3f trans = p.t.cast<float>();
    for (const Vec3f& pt : cloud.points) {
        out.points.emplace_back(rot * pt + trans);
    }
    return out;
}

}  // namespace trec
