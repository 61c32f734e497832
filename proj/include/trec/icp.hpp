#pragma once

#include "trec/geometry.hpp"

namespace trec {

struct IcpResult {
    Pose pose;            // target-from-source alignment
    double rmse = 0.0;    // meters, over nearest-neighbor correspondences
    int iterations = 0;
    bool converged = false;
};

// Point-to-point ICP: nearest-neighbor correspondences through a k-d tree,
// closed-form rigid alignment per iteration (cross-covariance SVD). Stops
// when the RMSE improvement drops below tol or max_iter is reached; an
// iteration that would increase the RMSE is rejected, so accepted iterations
// are monotone.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                    int max_iter = 50, double tol = 1e-6);

}  // namespace trec
