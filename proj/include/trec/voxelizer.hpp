#pragma once

#include "trec/geometry.hpp"
#include "trec/grid.hpp"
#include "trec/sparse_tensor.hpp"

namespace trec {

struct VoxelizeResult {
    SparseTensor tensor;  // stride (1,1,1,1), C = 3, features in [0, 1)
    int64_t dropped = 0;  // points outside [0, dim)^3
};

// Buckets grid-frame points by their floor coordinate and stores the
// in-voxel centroid offset as the feature (centroid mod 1). Points are
// expected in grid units: (world - origin) / cell_size. Output coordinates
// are sorted lexicographically so the result is independent of input order.
VoxelizeResult voxelize(const std::vector<Vec3f>& grid_points, const GridConfig& cfg, int k);

// World-frame convenience wrapper: converts through cfg.origin / cell_size.
VoxelizeResult voxelize_cloud(const PointCloud& cloud, const GridConfig& cfg, int k);

// One point per coordinate at (coord + feature) * cell_size + origin, in the
// frame of cfg. The temporal index is dropped.
PointCloud devoxelize(const SparseTensor& t, const GridConfig& cfg);

// Union of the two coordinate sets; the temporal index keeps spatially
// colliding cells distinct. measurement must carry k = 0 on every
// coordinate, previous k = 1.
SparseTensor temporal_concat(const SparseTensor& measurement, const SparseTensor& previous);

}  // namespace trec
