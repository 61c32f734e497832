#pragma once

#include <functional>
#include <vector>

#include "trec/augment.hpp"
#include "trec/checkpoint_io.hpp"
#include "trec/pipeline.hpp"

namespace trec {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;    // rollout sequences per optimizer step
    int rollout_steps = 12;
    float alpha = 0.5f;
    double lr_initial = 0.01;
    double lr_final = 0.0001;
    uint64_t seed = 0;
    bool augment = true;
    bool mirror = true;
    AugmentConfig augment_cfg;
};

// One row per optimizer step of the loss log CSV.
struct TrainLogRow {
    int epoch = 0;
    int64_t step = 0;
    double bce = 0.0;
    double offset = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

// Scalar training loss of one forward pass: BCE over every decoder level
// plus the offset term at the output level.
struct StepLoss {
    ad::NodePtr<float> node;
    double bce = 0.0;
    double offset = 0.0;
    bool empty_level = false;  // a level or the intersection contributed nothing
};

StepLoss step_loss(const Model::Forward& fwd, const SparseTensor& gt_vox);

class Trainer {
public:
    Trainer(Model& model, const TrainConfig& cfg);

    // One pass over the dataset: sequences are shuffled, augmented,
    // rolled out for cfg.rollout_steps with the feedback detached, and the
    // optimizer steps once per batch.
    void run_epoch(const std::vector<Trajectory>& dataset, int epoch,
                   std::vector<TrainLogRow>* log = nullptr);

    nn::Adam<float>& optimizer() { return opt_; }
    double last_epoch_loss() const { return last_epoch_loss_; }

private:
    Model& model_;
    TrainConfig cfg_;
    nn::Adam<float> opt_;
    double last_epoch_loss_ = 0.0;
};

}  // namespace trec
