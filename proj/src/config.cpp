#include "trec/config.hpp"

namespace trec {

ModelSpec RunConfig::model_spec() const {
    TREC_CHECK(spec_name == "paper" || spec_name == "desk", "spec must be 'paper' or 'desk'");
    ModelSpec spec = spec_name == "desk" ? ModelSpec::desk() : ModelSpec::paper();
    spec.alpha = alpha;
    return spec;
}

DataGenConfig RunConfig::datagen_config() const {
    const ModelSpec spec = model_spec();
    DataGenConfig cfg;
    cfg.grid_dim = spec.grid_dim;
    cfg.cell_size = spec.cell_size;
    cfg.steps = steps;
    // enough samples for a few points per surface cell
    cfg.gt_density = gt_density > 0.0
                         ? gt_density
                         : 4.0 / (static_cast<double>(spec.cell_size) * spec.cell_size);
    return cfg;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.rollout_steps = rollout;
    cfg.alpha = alpha;
    cfg.lr_initial = lr_initial;
    cfg.lr_final = lr_final;
    cfg.seed = seed;
    cfg.augment = augment;
    cfg.mirror = mirror;
    return cfg;
}

}  // namespace trec
