#include "trec/voxelizer.hpp"

#include <algorithm>
#include <cmath>

namespace trec {

VoxelizeResult voxelize(const std::vector<Vec3f>& grid_points, const GridConfig& cfg, int k) {
    TREC_CHECK(k == 0 || k == 1, "temporal index must be 0 or 1");

    struct Bucket {
        double sum[3] = {0.0, 0.0, 0.0};
        int64_t count = 0;
    };

    // bucket index keyed by packed coordinate; accumulate in f64 so the
    // result does not depend on point order beyond the final f32 rounding
    CoordHashMap index(grid_points.size() / 4 + 16);
    std::vector<uint64_t> keys;
    std::vector<Bucket> buckets;
    int64_t dropped = 0;

    for (const Vec3f& p : grid_points) {
        const float x = p.x(), y = p.y(), z = p.z();
        if (!(x >= 0.f && y >= 0.f && z >= 0.f && x < static_cast<float>(cfg.dim) &&
              y < static_cast<float>(cfg.dim) && z < static_cast<float>(cfg.dim))) {
            ++dropped;
            continue;
        }
        const Coord4 c{static_cast<int32_t>(std::floor(x)), static_cast<int32_t>(std::floor(y)),
                       static_cast<int32_t>(std::floor(z)), k};
        const uint64_t key = pack_coord(c);
        int32_t row = index.insert(key, static_cast<int32_t>(buckets.size()));
        if (row == static_cast<int32_t>(buckets.size())) {
            keys.push_back(key);
            buckets.emplace_back();
        }
        Bucket& b = buckets[row];
        b.sum[0] += x;
        b.sum[1] += y;
        b.sum[2] += z;
        b.count += 1;
    }

    // canonical order: packed key ascending == lexicographic (x, y, z, k)
    std::vector<int32_t> order(keys.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int32_t>(i);
    std::sort(order.begin(), order.end(),
              [&](int32_t a, int32_t b) { return keys[a] < keys[b]; });

    auto coords = make_coord_set({1, 1, 1, 1}, keys.size());
    MatXf feats(static_cast<Eigen::Index>(keys.size()), 3);
    constexpr float kBelowOne = 0.99999994f;  // largest float < 1
    for (size_t out = 0; out < order.size(); ++out) {
        const int32_t b = order[out];
        const Coord4 c = unpack_coord(keys[b]);
        coords->insert(c);
        const double inv = 1.0 / static_cast<double>(buckets[b].count);
        for (int a = 0; a < 3; ++a) {
            const double centroid = buckets[b].sum[a] * inv;
            const float f = static_cast<float>(centroid - static_cast<double>(c[a]));
            feats(static_cast<Eigen::Index>(out), a) = std::min(std::max(f, 0.f), kBelowOne);
        }
    }

    VoxelizeResult res;
    res.tensor = SparseTensor(std::move(coords), std::move(feats));
    res.dropped = dropped;
    return res;
}

VoxelizeResult voxelize_cloud(const PointCloud& cloud, const GridConfig& cfg, int k) {
    std::vector<Vec3f> grid_points;
    grid_points.reserve(cloud.points.size());
    const float inv_cell = 1.0f / cfg.cell_size;
    for (const Vec3f& p : cloud.points) {
        grid_points.emplace_back((p - cfg.origin) * inv_cell);
    }
    return voxelize(grid_points, cfg, k);
}

PointCloud devoxelize(const SparseTensor& t, const GridConfig& cfg) {
    TREC_CHECK(t.channels() == 3, "devoxelize expects C = 3 sub-voxel offset features");
    PointCloud cloud;
    cloud.points.reserve(t.size());
    const auto& coords = t.coords->coords();
    for (size_t i = 0; i < coords.size(); ++i) {
        const Coord4& c = coords[i];
        Vec3f p;
        for (int a = 0; a < 3; ++a) {
            p[a] = (static_cast<float>(c[a]) + t.feats(static_cast<Eigen::Index>(i), a)) *
                       cfg.cell_size +
                   cfg.origin[a];
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

SparseTensor temporal_concat(const SparseTensor& measurement, const SparseTensor& previous) {
    const Stride4 unit{1, 1, 1, 1};
    TREC_CHECK(measurement.stride() == unit && previous.stride() == unit,
               "temporal_concat expects stride (1,1,1,1) inputs");
    TREC_CHECK(measurement.channels() == 3 && (previous.size() == 0 || previous.channels() == 3),
               "temporal_concat expects C = 3 inputs");
    for (const Coord4& c : measurement.coords->coords()) {
        TREC_CHECK(c[3] == 0, "measurement coordinates must carry k = 0");
    }
    for (const Coord4& c : previous.coords->coords()) {
        TREC_CHECK(c[3] == 1, "previous-estimate coordinates must carry k = 1");
    }

    auto coords = make_coord_set(unit, measurement.size() + previous.size());
    MatXf feats(static_cast<Eigen::Index>(measurement.size() + previous.size()), 3);
    for (const Coord4& c : measurement.coords->coords()) coords->insert(c);
    for (const Coord4& c : previous.coords->coords()) coords->insert(c);
    feats.topRows(measurement.feats.rows()) = measurement.feats;
    feats.bottomRows(previous.feats.rows()) = previous.feats;
    TREC_CHECK(coords->size() == measurement.size() + previous.size(),
               "temporal channels must not collide");
    return SparseTensor(std::move(coords), std::move(feats));
}

}  // namespace trec
