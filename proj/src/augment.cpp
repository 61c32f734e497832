#include "trec/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trec/check.hpp"

namespace trec {

namespace {

struct Patch {
    float cx, cy, r2;
    bool covers(const Vec3f& p) const {
        const float dx = p.x() - cx, dy = p.y() - cy;
        return dx * dx + dy * dy <= r2;
    }
};

Patch sample_patch(Rng& rng, const AugmentConfig& cfg) {
    const float r = static_cast<float>(rng.uniform(cfg.patch_radius_min, cfg.patch_radius_max));
    return Patch{
        static_cast<float>(rng.uniform(-cfg.volume_half_extent, cfg.volume_half_extent)),
        static_cast<float>(rng.uniform(-cfg.volume_half_extent, cfg.volume_half_extent)), r * r};
}

}  // namespace

std::pair<PointCloud, Pose> augment_frame(const PointCloud& measurement, const Pose& pose,
                                          const AugmentConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    PointCloud cloud = measurement;
    Pose out_pose = pose;

    if (cfg.enable_position) {
        for (Vec3f& p : cloud.points) {
            for (int a = 0; a < 3; ++a) {
                p[a] += static_cast<float>(rng.uniform(-cfg.position_range, cfg.position_range));
            }
        }
    }

    if (cfg.enable_tilt) {
        const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
        const double angle =
            rng.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg) * M_PI / 180.0;
        const Vec3 axis(std::cos(azimuth), std::sin(azimuth), 0.0);
        const Eigen::Matrix3f rot =
            Eigen::AngleAxisd(angle, axis).toRotationMatrix().cast<float>();
        for (Vec3f& p : cloud.points) p = rot * p;
    }

    if (cfg.enable_patch_height) {
        const int n = static_cast<int>(rng.uniform_int(cfg.patch_count_min, cfg.patch_count_max));
        for (int i = 0; i < n; ++i) {
            const Patch patch = sample_patch(rng, cfg);
            const float dz = static_cast<float>(
                rng.uniform(-cfg.patch_height_range, cfg.patch_height_range));
            for (Vec3f& p : cloud.points) {
                if (patch.covers(p)) p.z() += dz;
            }
        }
    }

    if (cfg.enable_patch_prune) {
        const int n = static_cast<int>(rng.uniform_int(cfg.patch_count_min, cfg.patch_count_max));
        std::vector<Patch> patches;
        patches.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) patches.push_back(sample_patch(rng, cfg));
        std::vector<Vec3f> kept;
        kept.reserve(cloud.points.size());
        for (const Vec3f& p : cloud.points) {
            const bool inside = std::any_of(patches.begin(), patches.end(),
                                            [&p](const Patch& q) { return q.covers(p); });
            if (!inside) kept.push_back(p);
        }
        cloud.points = std::move(kept);
    }

    if (cfg.enable_outliers) {
        const int clusters =
            static_cast<int>(rng.uniform_int(cfg.outlier_cluster_min, cfg.outlier_cluster_max));
        for (int c = 0; c < clusters; ++c) {
            Vec3f center;
            for (int a = 0; a < 3; ++a) {
                center[a] = static_cast<float>(
                    rng.uniform(-cfg.volume_half_extent, cfg.volume_half_extent));
            }
            const int n =
                static_cast<int>(rng.uniform_int(cfg.outlier_points_min, cfg.outlier_points_max));
            for (int i = 0; i < n; ++i) {
                Vec3f p = center;
                for (int a = 0; a < 3; ++a) {
                    p[a] += static_cast<float>(rng.normal(0.0, cfg.outlier_sigma));
                }
                cloud.points.push_back(p);
            }
        }
    }

    if (cfg.enable_pose_jitter) {
        for (int a = 0; a < 3; ++a) {
            out_pose.t[a] += rng.uniform(-cfg.pose_jitter_range, cfg.pose_jitter_range);
        }
    }

    return {std::move(cloud), out_pose};
}

Vec3f mirror_point(const Vec3f& p, bool mirror_x, bool mirror_y) {
    return Vec3f(mirror_x ? -p.x() : p.x(), mirror_y ? -p.y() : p.y(), p.z());
}

Pose mirror_pose(const Pose& p, bool mirror_x, bool mirror_y) {
    Pose out = p;
    if (mirror_x) {
        out.t.x() = -out.t.x();
        out.q = Quat(out.q.w(), out.q.x(), -out.q.y(), -out.q.z());
    }
    if (mirror_y) {
        out.t.y() = -out.t.y();
        out.q = Quat(out.q.w(), -out.q.x(), out.q.y(), -out.q.z());
    }
    return out;
}

Trajectory mirror_trajectory(const Trajectory& frames, bool mirror_x, bool mirror_y) {
    Trajectory out;
    out.reserve(frames.size());
    for (const FrameData& f : frames) {
        FrameData m;
        m.true_pose = mirror_pose(f.true_pose, mirror_x, mirror_y);
        m.odom_pose = mirror_pose(f.odom_pose, mirror_x, mirror_y);
        m.measurement.frame = f.measurement.frame;
        m.measurement.points.reserve(f.measurement.points.size());
        for (const Vec3f& p : f.measurement.points) {
            m.measurement.points.push_back(mirror_point(p, mirror_x, mirror_y));
        }
        m.ground_truth.frame = f.ground_truth.frame;
        m.ground_truth.points.reserve(f.ground_truth.points.size());
        for (const Vec3f& p : f.ground_truth.points) {
            m.ground_truth.points.push_back(mirror_point(p, mirror_x, mirror_y));
        }
        out.push_back(std::move(m));
    }
    return out;
}

PointCloud remove_fraction(const PointCloud& cloud, double fraction, uint64_t seed) {
    TREC_CHECK(fraction >= 0.0 && fraction <= 1.0, "removal fraction must lie in [0, 1]");
    const size_t n = cloud.points.size();
    const size_t keep =
        static_cast<size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
    if (keep == n) return cloud;

    Rng rng(seed);
    std::vector<uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    // partial Fisher-Yates: first `keep` entries are a uniform subset
    for (size_t i = 0; i < keep; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_index(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());

    PointCloud out;
    out.frame = cloud.frame;
    out.points.reserve(keep);
    for (uint32_t i : idx) out.points.push_back(cloud.points[i]);
    return out;
}

}  // namespace trec
