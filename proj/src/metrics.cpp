#include "trec/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "trec/check.hpp"
#include "trec/sparse_tensor.hpp"

namespace trec {

namespace {

// occupancy set of grid cells covered by the cloud, clipped to the grid
std::vector<uint64_t> occupancy_cells(const PointCloud& cloud, const GridConfig& cfg,
                                      CoordHashMap* index) {
    std::vector<uint64_t> keys;
    const float inv = 1.f / cfg.cell_size;
    for (const Vec3f& p : cloud.points) {
        const float x = (p.x() - cfg.origin.x()) * inv;
        const float y = (p.y() - cfg.origin.y()) * inv;
        const float z = (p.z() - cfg.origin.z()) * inv;
        if (!(x >= 0.f && y >= 0.f && z >= 0.f && x < static_cast<float>(cfg.dim) &&
              y < static_cast<float>(cfg.dim) && z < static_cast<float>(cfg.dim))) {
            continue;
        }
        const Coord4 c{static_cast<int32_t>(x), static_cast<int32_t>(y),
                       static_cast<int32_t>(z), 0};
        const uint64_t k = pack_coord(c);
        const int32_t next = static_cast<int32_t>(keys.size());
        if (index->insert(k, next) == next) keys.push_back(k);
    }
    return keys;
}

}  // namespace

MetricsRecord occupancy_metrics(const PointCloud& pred_world, const PointCloud& gt_world,
                                const GridConfig& cfg) {
    CoordHashMap pred_index, gt_index;
    const std::vector<uint64_t> pred_cells = occupancy_cells(pred_world, cfg, &pred_index);
    const std::vector<uint64_t> gt_cells = occupancy_cells(gt_world, cfg, &gt_index);
    TREC_CHECK(!gt_cells.empty(), "occupancy_metrics requires non-empty ground truth in the grid");

    MetricsRecord rec;
    for (uint64_t k : pred_cells) {
        if (gt_index.contains(k)) {
            ++rec.tp;
        } else {
            ++rec.fp;
        }
    }
    rec.fn = static_cast<int64_t>(gt_cells.size()) - rec.tp;

    if (pred_cells.empty()) {
        rec.empty_pred = true;
        rec.precision = 0.0;
    } else {
        rec.precision = static_cast<double>(rec.tp) / static_cast<double>(pred_cells.size());
    }
    rec.recall = static_cast<double>(rec.tp) / static_cast<double>(gt_cells.size());
    rec.f1 = (rec.precision + rec.recall > 0.0)
                 ? 2.0 * rec.precision * rec.recall / (rec.precision + rec.recall)
                 : 0.0;
    return rec;
}

double height_mae_cm(const PointCloud& pred_world, const PointCloud& gt_world,
                     const GridConfig& cfg) {
    TREC_CHECK(!pred_world.empty() && !gt_world.empty(), "height_mae_cm needs non-empty clouds");

    auto column_tops = [&cfg](const PointCloud& cloud) {
        std::unordered_map<uint64_t, float> tops;
        const float inv = 1.f / cfg.cell_size;
        for (const Vec3f& p : cloud.points) {
            const float x = (p.x() - cfg.origin.x()) * inv;
            const float y = (p.y() - cfg.origin.y()) * inv;
            const float z = (p.z() - cfg.origin.z()) * inv;
            if (!(x >= 0.f && y >= 0.f && z >= 0.f && x < static_cast<float>(cfg.dim) &&
                  y < static_cast<float>(cfg.dim) && z < static_cast<float>(cfg.dim))) {
                continue;
            }
            const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(x)) << 32) |
                                 static_cast<uint64_t>(static_cast<uint32_t>(y));
            auto [it, inserted] = tops.emplace(key, p.z());
            if (!inserted) it->second = std::max(it->second, p.z());
        }
        return tops;
    };

    const auto pred_tops = column_tops(pred_world);
    const auto gt_tops = column_tops(gt_world);
    double sum = 0.0;
    int64_t n = 0;
    for (const auto& [key, top] : pred_tops) {
        auto it = gt_tops.find(key);
        if (it == gt_tops.end()) continue;
        sum += std::abs(static_cast<double>(top) - static_cast<double>(it->second));
        ++n;
    }
    TREC_CHECK(n > 0, "height_mae_cm found no column occupied in both clouds");
    return 100.0 * sum / static_cast<double>(n);
}

MetricsRecord evaluate_frame(const PointCloud& pred_world, const PointCloud& gt_world,
                             const GridConfig& cfg) {
    MetricsRecord rec = occupancy_metrics(pred_world, gt_world, cfg);
    if (!pred_world.empty()) {
        try {
            rec.mae_cm = height_mae_cm(pred_world, gt_world, cfg);
            rec.mae_valid = true;
        } catch (const ContractViolation&) {
            rec.mae_valid = false;
        }
    }
    return rec;
}

MetricsSummary summarize(const std::vector<MetricsRecord>& records) {
    MetricsSummary s;
    s.frames = static_cast<int64_t>(records.size());
    if (records.empty()) return s;
    double sum_f1 = 0.0;
    for (const MetricsRecord& r : records) {
        s.mean_precision += r.precision;
        s.mean_recall += r.recall;
        sum_f1 += r.f1;
        if (r.mae_valid) {
            s.mean_mae_cm += r.mae_cm;
            ++s.frames_with_mae;
        }
    }
    const double n = static_cast<double>(records.size());
    s.mean_precision /= n;
    s.mean_recall /= n;
    s.mean_f1 = sum_f1 / n;
    s.macro_f1 = (s.mean_precision + s.mean_recall > 0.0)
                     ? 2.0 * s.mean_precision * s.mean_recall / (s.mean_precision + s.mean_recall)
                     : 0.0;
    if (s.frames_with_mae > 0) s.mean_mae_cm /= static_cast<double>(s.frames_with_mae);
    return s;
}

void ElevationMap::update(const PointCloud& measurement_world, double sensor_variance) {
    TREC_CHECK(sensor_variance > 0.0, "sensor variance must be positive");

    // per-frame cell measurement: mean height of the points in the cell
    struct Acc {
        double sum = 0.0;
        int64_t count = 0;
    };
    std::unordered_map<uint64_t, Acc> frame;
    const float inv = 1.f / cell_;
    for (const Vec3f& p : measurement_world.points) {
        const int32_t ix = static_cast<int32_t>(std::floor(p.x() * inv));
        const int32_t iy = static_cast<int32_t>(std::floor(p.y() * inv));
        Acc& a = frame[key(ix, iy)];
        a.sum += static_cast<double>(p.z());
        a.count += 1;
    }

    for (const auto& [k, acc] : frame) {
        const double z = acc.sum / static_cast<double>(acc.count);
        auto it = cells_.find(k);
        if (it == cells_.end()) {
            cells_.emplace(k, Cell{z, sensor_variance, 1});
            continue;
        }
        Cell& c = it->second;
        const double gain = c.variance / (c.variance + sensor_variance);
        c.height += gain * (z - c.height);
        c.variance = c.variance * sensor_variance / (c.variance + sensor_variance);
        c.updates += 1;
    }
}

const ElevationMap::Cell* ElevationMap::cell_at(float x, float y) const {
    const int32_t ix = static_cast<int32_t>(std::floor(x / cell_));
    const int32_t iy = static_cast<int32_t>(std::floor(y / cell_));
    auto it = cells_.find(key(ix, iy));
    return it == cells_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::array<int32_t, 2>, ElevationMap::Cell>> ElevationMap::cells() const {
    std::vector<std::pair<std::array<int32_t, 2>, Cell>> out;
    out.reserve(cells_.size());
    for (const auto& [k, c] : cells_) {
        out.push_back({{static_cast<int32_t>(static_cast<uint32_t>(k >> 32)),
                        static_cast<int32_t>(static_cast<uint32_t>(k))},
                       c});
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace trec
