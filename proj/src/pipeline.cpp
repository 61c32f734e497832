#include "trec/pipeline.hpp"

#include "trec/augment.hpp"

namespace trec {

SparseTensor reproject_previous(const SparseTensor& prev_estimate, const Pose& prev_odom,
                                const Pose& cur_odom, const GridConfig& cfg) {
    if (prev_estimate.size() == 0) return SparseTensor::empty(3);
    PointCloud prev_cloud = devoxelize(prev_estimate, cfg);
    prev_cloud.frame = Frame::robot;
    const Pose increment = relative_transform(prev_odom, cur_odom);
    const PointCloud in_current = transform_points(increment, prev_cloud);
    return voxelize_cloud(in_current, cfg, 1).tensor;
}

SparseTensor build_step_input(const PointCloud& measurement_robot,
                              const SparseTensor& prev_estimate, const Pose& prev_odom,
                              const Pose& cur_odom, const GridConfig& cfg) {
    const SparseTensor meas = voxelize_cloud(measurement_robot, cfg, 0).tensor;
    const SparseTensor prev = reproject_previous(prev_estimate, prev_odom, cur_odom, cfg);
    return temporal_concat(meas, prev);
}

RolloutResult rollout(Model& model, const Trajectory& traj, float alpha, bool use_feedback) {
    ad::NoGradGuard no_grad;
    const GridConfig cfg = GridConfig::robot_centric(model.spec().grid_dim, model.spec().cell_size);
    RolloutResult res;
    SparseTensor prev = SparseTensor::empty(3);
    for (size_t t = 0; t < traj.size(); ++t) {
        const Pose prev_odom = (t == 0) ? traj[t].odom_pose : traj[t - 1].odom_pose;
        const SparseTensor input = build_step_input(traj[t].measurement, prev, prev_odom,
                                                    traj[t].odom_pose, cfg);
        Model::Forward fwd = model.forward(input, alpha, /*training=*/false);
        SparseTensor est = to_tensor(fwd.estimate);
        if (use_feedback) prev = est;
        res.estimates.push_back(std::move(est));
    }
    return res;
}

MetricsRecord evaluate_estimate_cloud(const PointCloud& estimate_world,
                                      const PointCloud& gt_world, const Pose& eval_pose,
                                      int grid_dim, float cell_size) {
    const GridConfig cfg = GridConfig::centered(grid_dim, cell_size, eval_pose.t);
    return evaluate_frame(estimate_world, gt_world, cfg);
}

std::vector<MetricsRecord> evaluate_rollout(Model& model, const Trajectory& traj, float alpha,
                                            bool use_true_pose) {
    const GridConfig robot_cfg =
        GridConfig::robot_centric(model.spec().grid_dim, model.spec().cell_size);
    RolloutResult roll = rollout(model, traj, alpha);
    std::vector<MetricsRecord> records;
    records.reserve(traj.size());
    for (size_t t = 0; t < traj.size(); ++t) {
        const Pose& pose = use_true_pose ? traj[t].true_pose : traj[t].odom_pose;
        PointCloud est_robot = devoxelize(roll.estimates[t], robot_cfg);
        est_robot.frame = Frame::robot;
        PointCloud est_world = transform_points(pose, est_robot);
        est_world.frame = Frame::world;
        records.push_back(evaluate_estimate_cloud(est_world, traj[t].ground_truth, pose,
                                                  model.spec().grid_dim,
                                                  model.spec().cell_size));
    }
    return records;
}

std::vector<AblationRow> sparsity_ablation(Model& model, const std::vector<Trajectory>& dataset,
                                           const std::vector<double>& rates, uint64_t seed) {
    std::vector<AblationRow> rows;
    rows.reserve(rates.size());
    for (size_t ri = 0; ri < rates.size(); ++ri) {
        const double rate = rates[ri];
        TREC_CHECK(rate >= 0.0 && rate <= 1.0, "removal rates must lie in [0, 1]");
        std::vector<MetricsRecord> records;
        for (size_t traj_i = 0; traj_i < dataset.size(); ++traj_i) {
            Trajectory ablated = dataset[traj_i];
            for (size_t t = 0; t < ablated.size(); ++t) {
                const uint64_t frame_seed =
                    mix_seed(mix_seed(seed, traj_i * 10007 + t), ri);
                ablated[t].measurement =
                    remove_fraction(ablated[t].measurement, rate, frame_seed);
            }
            std::vector<MetricsRecord> r = evaluate_rollout(model, ablated, model.spec().alpha);
            records.insert(records.end(), r.begin(), r.end());
        }
        AblationRow row;
        row.rate = rate;
        row.metrics = summarize(records);
        rows.push_back(row);
    }
    return rows;
}

double visibility_fraction(const PointCloud& measurement_robot, const PointCloud& gt_world,
                           const Pose& true_pose, const GridConfig& cfg) {
    PointCloud gt_robot = transform_points(inverse(true_pose), gt_world);
    const SparseTensor meas = voxelize_cloud(measurement_robot, cfg, 0).tensor;
    const SparseTensor gt = voxelize_cloud(gt_robot, cfg, 0).tensor;
    if (gt.size() == 0) return 0.0;
    int64_t covered = 0;
    for (const Coord4& c : gt.coords->coords()) {
        if (meas.coords->contains(c)) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(gt.size());
}

}  // namespace trec
