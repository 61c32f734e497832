#pragma once

#include <string>

#include "trec/dataset.hpp"
#include "trec/train.hpp"

namespace trec {

// Shared run settings for the command-line tools. Defaults are the
// production values; the desk spec variant shrinks the grid and widths so CI
// runs finish in minutes.
struct RunConfig {
    std::string spec_name = "paper";  // paper | desk
    float alpha = 0.5f;

    int epochs = 40;
    int batch = 32;
    int rollout = 12;
    double lr_initial = 0.01;
    double lr_final = 0.0001;
    uint64_t seed = 0;
    bool augment = true;
    bool mirror = true;

    int trajectories = 8;
    int steps = 100;
    double gt_density = 0.0;  // 0 selects the per-spec default

    ModelSpec model_spec() const;
    DataGenConfig datagen_config() const;
    TrainConfig train_config() const;
};

}  // namespace trec
