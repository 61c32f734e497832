#include "trec/train.hpp"

#include <algorithm>
#include <cmath>

namespace trec {

StepLoss step_loss(const Model::Forward& fwd, const SparseTensor& gt_vox) {
    StepLoss out;
    std::vector<ad::NodePtr<float>> terms;

    // occupancy targets per decoder level (OR-pooled ground truth)
    int max_level = 0;
    for (const SparseVarF& lik : fwd.likelihoods) {
        const int32_t s = lik.stride()[0];
        int level = 0;
        while ((1 << level) < s) ++level;
        max_level = std::max(max_level, level);
    }
    const std::vector<CoordSetPtr> pyramid = target_pyramid(*gt_vox.coords, max_level + 1);

    double bce_sum = 0.0;
    for (const SparseVarF& lik : fwd.likelihoods) {
        const int32_t s = lik.stride()[0];
        int level = 0;
        while ((1 << level) < s) ++level;
        const CoordSet& target = *pyramid[static_cast<size_t>(level)];
        std::vector<uint8_t> labels(lik.size());
        const auto& coords = lik.coords->coords();
        for (size_t i = 0; i < coords.size(); ++i) {
            labels[i] = target.contains(coords[i]) ? 1 : 0;
        }
        nn::ScalarLoss<float> l = nn::occupancy_bce<float>(lik.feats, labels);
        out.empty_level |= l.empty;
        bce_sum += static_cast<double>(l.value->value(0, 0));
        terms.push_back(l.value);
    }
    out.bce = bce_sum;

    // sub-voxel offset term over the estimate/target coordinate intersection
    std::vector<int32_t> est_rows;
    std::vector<int32_t> gt_rows;
    const auto& est_coords = fwd.estimate.coords->coords();
    for (size_t i = 0; i < est_coords.size(); ++i) {
        const int32_t g = gt_vox.coords->find(est_coords[i]);
        if (g >= 0) {
            est_rows.push_back(static_cast<int32_t>(i));
            gt_rows.push_back(g);
        }
    }
    ad::Mat<float> target(static_cast<Eigen::Index>(gt_rows.size()), 3);
    for (size_t i = 0; i < gt_rows.size(); ++i) {
        target.row(static_cast<Eigen::Index>(i)) = gt_vox.feats.row(gt_rows[i]);
    }
    ad::NodePtr<float> matched = ad::take_rows<float>(fwd.estimate.feats, std::move(est_rows));
    nn::ScalarLoss<float> off = nn::offset_loss<float>(matched, target);
    out.empty_level |= off.empty;
    out.offset = static_cast<double>(off.value->value(0, 0));
    terms.push_back(off.value);

    out.node = ad::add_scalars<float>(terms);
    return out;
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), opt_(model.parameters()) {}

void Trainer::run_epoch(const std::vector<Trajectory>& dataset, int epoch,
                        std::vector<TrainLogRow>* log) {
    const GridConfig grid =
        GridConfig::robot_centric(model_.spec().grid_dim, model_.spec().cell_size);
    const double lr = nn::lr_schedule(epoch, cfg_.epochs, cfg_.lr_initial, cfg_.lr_final);
    Rng rng(mix_seed(cfg_.seed, static_cast<uint64_t>(epoch) + 1));

    // windows of rollout_steps frames
    struct Window {
        size_t traj;
        size_t begin;
        size_t len;
    };
    std::vector<Window> windows;
    for (size_t ti = 0; ti < dataset.size(); ++ti) {
        const size_t n = dataset[ti].size();
        const size_t step = static_cast<size_t>(std::max(cfg_.rollout_steps, 1));
        for (size_t b = 0; b < n; b += step) {
            windows.push_back({ti, b, std::min(step, n - b)});
        }
    }
    for (size_t i = windows.size(); i > 1; --i) {
        std::swap(windows[i - 1], windows[static_cast<size_t>(rng.uniform_index(i))]);
    }

    double epoch_loss = 0.0;
    int64_t epoch_steps = 0;
    size_t w = 0;
    while (w < windows.size()) {
        const size_t batch_end = std::min(windows.size(), w + static_cast<size_t>(cfg_.batch_size));
        double batch_bce = 0.0, batch_offset = 0.0;
        int64_t batch_terms = 0;

        for (; w < batch_end; ++w) {
            const Window& win = windows[w];
            Trajectory seq(dataset[win.traj].begin() + static_cast<long>(win.begin),
                           dataset[win.traj].begin() + static_cast<long>(win.begin + win.len));
            if (cfg_.mirror) {
                const bool mx = rng.bernoulli(0.5);
                const bool my = rng.bernoulli(0.5);
                if (mx || my) seq = mirror_trajectory(seq, mx, my);
            }

            SparseTensor prev = SparseTensor::empty(3);
            Pose prev_odom;
            for (size_t t = 0; t < seq.size(); ++t) {
                PointCloud meas = seq[t].measurement;
                Pose odom = seq[t].odom_pose;
                if (cfg_.augment) {
                    auto [m, p] = augment_frame(meas, odom, cfg_.augment_cfg, rng.raw());
                    meas = std::move(m);
                    odom = p;
                }
                if (t == 0) prev_odom = odom;

                const SparseTensor input = build_step_input(meas, prev, prev_odom, odom, grid);
                Model::Forward fwd = model_.forward(input, cfg_.alpha, /*training=*/true);

                PointCloud gt_robot =
                    transform_points(inverse(seq[t].true_pose), seq[t].ground_truth);
                const SparseTensor gt_vox = voxelize_cloud(gt_robot, grid, 0).tensor;

                if (gt_vox.size() > 0) {
                    StepLoss loss = step_loss(fwd, gt_vox);
                    if (loss.node->requires_grad) ad::backward(loss.node);
                    batch_bce += loss.bce;
                    batch_offset += loss.offset;
                    ++batch_terms;
                    epoch_loss += loss.bce + loss.offset;
                    ++epoch_steps;
                }

                prev = to_tensor(fwd.estimate);  // constant for the next step
                prev_odom = odom;
            }
        }

        const bool ok = opt_.step(static_cast<float>(lr));
        opt_.zero_grad();
        if (!ok) {
            throw ContractViolation("non-finite gradient encountered; optimizer step skipped");
        }
        if (log && batch_terms > 0) {
            log->push_back(TrainLogRow{epoch, opt_.step_count(),
                                       batch_bce / static_cast<double>(batch_terms),
                                       batch_offset / static_cast<double>(batch_terms),
                                       (batch_bce + batch_offset) / static_cast<double>(batch_terms),
                                       lr});
        }
    }
    last_epoch_loss_ = epoch_steps > 0 ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
}

}  // namespace trec
