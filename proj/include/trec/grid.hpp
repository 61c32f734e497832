#pragma once

#include <cmath>

#include "trec/check.hpp"
#include "trec/geometry.hpp"

namespace trec {

// Voxel discretization of the cube around the robot. The grid is axis
// aligned in the frame of the clouds fed to it; origin is the minimal corner
// and is kept on the cell lattice so that re-voxelizing a previous estimate
// does not smear features.
struct GridConfig {
    int dim = 64;            // cells per axis
    float cell_size = 0.05f; // meters
    Vec3f origin = Vec3f::Zero();

    float extent() const { return static_cast<float>(dim) * cell_size; }

    // Grid centered on the given position, origin snapped to the lattice.
    static GridConfig centered(int dim, float cell_size, const Vec3& center) {
        TREC_CHECK(dim > 0 && cell_size > 0.f, "grid dim and cell size must be positive");
        GridConfig cfg;
        cfg.dim = dim;
        cfg.cell_size = cell_size;
        const double half = 0.5 * static_cast<double>(dim) * cell_size;
        for (int a = 0; a < 3; ++a) {
            cfg.origin[a] = static_cast<float>(
                std::floor((center[a] - half) / cell_size) * cell_size);
        }
        return cfg;
    }

    // Robot-frame grid: constant origin at -extent/2, exact on the lattice
    // because dim is even.
    static GridConfig robot_centric(int dim, float cell_size) {
        TREC_CHECK(dim > 0 && cell_size > 0.f, "grid dim and cell size must be positive");
        GridConfig cfg;
        cfg.dim = dim;
        cfg.cell_size = cell_size;
        cfg.origin = Vec3f::Constant(-0.5f * cfg.extent());
        return cfg;
    }
};

}  // namespace trec
