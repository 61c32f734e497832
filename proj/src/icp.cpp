#include "trec/icp.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "trec/check.hpp"

namespace trec {

namespace {

// Minimal 3D k-d tree over an immutable point array.
class KdTree {
public:
    explicit KdTree(const std::vector<Vec3f>& points) : points_(points) {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0u);
        nodes_.reserve(points.size());
        root_ = build(0, points.size(), 0);
    }

    // index of the nearest point to q
    uint32_t nearest(const Vec3f& q) const {
        uint32_t best = UINT32_MAX;
        float best_d2 = std::numeric_limits<float>::max();
        search(root_, q, 0, best, best_d2);
        return best;
    }

private:
    struct Node {
        uint32_t point;
        int32_t left = -1;
        int32_t right = -1;
    };

    int32_t build(size_t lo, size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + static_cast<long>(lo),
                         order_.begin() + static_cast<long>(mid),
                         order_.begin() + static_cast<long>(hi),
                         [this, axis](uint32_t a, uint32_t b) {
                             return points_[a][axis] < points_[b][axis];
                         });
        const int32_t id = static_cast<int32_t>(nodes_.size());
        nodes_.push_back(Node{order_[mid]});
        nodes_[static_cast<size_t>(id)].left = build(lo, mid, depth + 1);
        nodes_[static_cast<size_t>(id)].right = build(mid + 1, hi, depth + 1);
        return id;
    }

    void search(int32_t id, const Vec3f& q, int depth, uint32_t& best, float& best_d2) const {
        if (id < 0) return;
        const Node& node = nodes_[static_cast<size_t>(id)];
        const Vec3f& p = points_[node.point];
        const float d2 = (p - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = node.point;
        }
        const int axis = depth % 3;
        const float delta = q[axis] - p[axis];
        const int32_t near = delta < 0.f ? node.left : node.right;
        const int32_t far = delta < 0.f ? node.right : node.left;
        search(near, q, depth + 1, best, best_d2);
        if (delta * delta < best_d2) search(far, q, depth + 1, best, best_d2);
    }

    const std::vector<Vec3f>& points_;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
    int32_t root_ = -1;
};

bool non_degenerate(const std::vector<Vec3f>& pts) {
    if (pts.size() < 3) return false;
    Vec3 mean = Vec3::Zero();
    for (const Vec3f& p : pts) mean += p.cast<double>();
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3f& p : pts) {
        const Vec3 d = p.cast<double>() - mean;
        cov += d * d.transpose();
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
    // collinear clouds have a rank-1 covariance
    return svd.singularValues()(1) > 1e-12 * std::max(svd.singularValues()(0), 1e-30);
}

double rmse_to_target(const std::vector<Vec3f>& src, const Pose& pose, const KdTree& tree,
                      const std::vector<Vec3f>& target) {
    const Eigen::Matrix3f rot = pose.q.toRotationMatrix().cast<float>();
    const Vec3f t = pose.t.cast<float>();
    double sum = 0.0;
    for (const Vec3f& p : src) {
        const Vec3f moved = rot * p + t;
        const uint32_t nn = tree.nearest(moved);
        sum += static_cast<double>((moved - target[nn]).squaredNorm());
    }
    return std::sqrt(sum / static_cast<double>(src.size()));
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                    int max_iter, double tol) {
    TREC_CHECK(non_degenerate(source.points) && non_degenerate(target.points),
               "icp_align needs at least 3 non-collinear points on both sides");

    const KdTree tree(target.points);
    IcpResult res;
    res.pose = init;
    res.rmse = rmse_to_target(source.points, res.pose, tree, target.points);
    if (max_iter <= 0) return res;  // flagged: converged stays false

    for (int iter = 0; iter < max_iter; ++iter) {
        // correspondences under the current pose
        const Eigen::Matrix3f rot = res.pose.q.toRotationMatrix().cast<float>();
        const Vec3f tr = res.pose.t.cast<float>();

        Vec3 src_mean = Vec3::Zero(), tgt_mean = Vec3::Zero();
        std::vector<Vec3> moved(source.points.size());
        std::vector<Vec3> matched(source.points.size());
        for (size_t i = 0; i < source.points.size(); ++i) {
            const Vec3f m = rot * source.points[i] + tr;
            moved[i] = m.cast<double>();
            matched[i] = target.points[tree.nearest(m)].cast<double>();
            src_mean += moved[i];
            tgt_mean += matched[i];
        }
        const double n = static_cast<double>(source.points.size());
        src_mean /= n;
        tgt_mean /= n;

        Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
        for (size_t i = 0; i < moved.size(); ++i) {
            cross += (moved[i] - src_mean) * (matched[i] - tgt_mean).transpose();
        }
        const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
            cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
        const Eigen::Matrix3d rot_delta = svd.matrixV() * flip * svd.matrixU().transpose();
        const Vec3 t_delta = tgt_mean - rot_delta * src_mean;
        const Pose delta(t_delta, Quat(rot_delta));

        const Pose candidate = compose(delta, res.pose);
        const double candidate_rmse =
            rmse_to_target(source.points, candidate, tree, target.points);
        res.iterations = iter + 1;
        if (candidate_rmse > res.rmse) {
            res.converged = true;  // no improving step exists under NN matching
            break;
        }
        const double improvement = res.rmse - candidate_rmse;
        res.pose = candidate;
        res.rmse = candidate_rmse;
        if (improvement < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace trec
