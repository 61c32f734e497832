#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "trec/geometry.hpp"
#include "trec/grid.hpp"

namespace trec {

// Occupancy comparison of two clouds on a robot-centric voxel grid.
struct MetricsRecord {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;  // harmonic mean of precision and recall
    double mae_cm = 0.0;
    int64_t tp = 0, fp = 0, fn = 0;
    bool empty_pred = false;  // precision defined as 0, flagged
    bool mae_valid = false;
};

MetricsRecord occupancy_metrics(const PointCloud& pred_world, const PointCloud& gt_world,
                                const GridConfig& cfg);

// Mean absolute difference of the per-column top-surface heights, in
// centimeters, over the grid columns occupied in both clouds. Throws when no
// column is shared.
double height_mae_cm(const PointCloud& pred_world, const PointCloud& gt_world,
                     const GridConfig& cfg);

// occupancy_metrics + height MAE with the MAE failure mapped to a flag.
MetricsRecord evaluate_frame(const PointCloud& pred_world, const PointCloud& gt_world,
                             const GridConfig& cfg);

// Macro aggregate over frames. macro_f1 is the harmonic mean of the mean
// precision/recall; mean_f1 averages the per-frame F1 values (the two differ
// whenever per-frame scores are skewed, so both are reported).
struct MetricsSummary {
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double macro_f1 = 0.0;
    double mean_f1 = 0.0;
    double mean_mae_cm = 0.0;
    int64_t frames = 0;
    int64_t frames_with_mae = 0;
};

MetricsSummary summarize(const std::vector<MetricsRecord>& records);

// Per-xy-cell height estimate fused with a scalar Kalman filter. Uses the
// (possibly drifted) odometry-frame measurements directly, which is exactly
// what makes it drift sensitive.
class ElevationMap {
public:
    explicit ElevationMap(float cell_size) : cell_(cell_size) {}

    struct Cell {
        double height = 0.0;
        double variance = 0.0;
        int64_t updates = 0;
    };

    // Scalar Kalman update per cell; the per-frame cell measurement is the
    // mean height of the points falling into the cell.
    void update(const PointCloud& measurement_world, double sensor_variance);

    const Cell* cell_at(float x, float y) const;
    size_t size() const { return cells_.size(); }
    float cell_size() const { return cell_; }

    // cells in deterministic (sorted key) order
    std::vector<std::pair<std::array<int32_t, 2>, Cell>> cells() const;

private:
    static uint64_t key(int32_t ix, int32_t iy) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(ix)) << 32) |
               static_cast<uint64_t>(static_cast<uint32_t>(iy));
    }
    float cell_;
    std::unordered_map<uint64_t, Cell> cells_;
};

}  // namespace trec
