#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trec/nn.hpp"
#include "trec/sparse_ops.hpp"

namespace trec {

// Architecture constants of the encoder-decoder. The encoder down-samples
// spatially by a factor of 16 over four strided stages while preserving the
// temporal dimension; the decoder mirrors it with skip connections and a
// learned pruning head per level.
struct ModelSpec {
    int grid_dim = 64;
    float cell_size = 0.05f;
    std::array<int, 5> widths = {8, 16, 32, 64, 128};
    Kernel4 enc_normal_kernel = {3, 3, 3, 2};
    Kernel4 enc_strided_kernel = {2, 2, 2, 2};
    Kernel4 dec_normal_kernel = {3, 3, 3, 1};
    Kernel4 dec_strided_kernel = {2, 2, 2, 1};
    Kernel4 down_stride = {2, 2, 2, 1};  // spatial halving, temporal preserved
    float alpha = 0.5f;

    static ModelSpec paper() { return ModelSpec{}; }

    // Reduced variant so tests and CI runs finish in minutes.
    static ModelSpec desk() {
        ModelSpec s;
        s.grid_dim = 32;
        s.cell_size = 0.1f;
        s.widths = {4, 8, 16, 32, 64};
        return s;
    }

    uint64_t hash() const;
    static constexpr int num_stages = 4;
};

class Model {
public:
    Model(const ModelSpec& spec, uint64_t seed);

    struct Forward {
        SparseVarF estimate;                 // k = 0 slice, stride 1, C = 3
        std::vector<SparseVarF> likelihoods; // per decoder level, coarse to fine, pre-prune
        CoordSetPtr latent;                  // encoder output coordinates (stride 16)
        bool truncated = false;              // decoder emptied before the last level
    };

    // Single-step inference / training pass. The input is the temporally
    // concatenated stride-1 tensor with C = 3 and k in {0, 1}.
    Forward forward(const SparseTensor& input, float alpha, bool training);

    const ModelSpec& spec() const { return spec_; }

    // Learnable parameters in a fixed order.
    std::vector<ad::NodePtr<float>> parameters() const;
    int64_t parameter_count() const;

    // Every persistent tensor (weights, biases, batch-norm state) by name;
    // the order is fixed and drives checkpoint layout.
    std::vector<std::pair<std::string, ad::Mat<float>*>> named_state();

    // Batch-norm running statistics are part of named_state; explicit train
    // flag is passed per forward call instead of global mode switching.

private:
    struct ConvLayer {
        ad::NodePtr<float> W;
        ad::NodePtr<float> b;
        Kernel4 kernel{1, 1, 1, 1};
        Kernel4 stride{1, 1, 1, 1};

        void init(Rng& rng, const Kernel4& k, const Kernel4& s, int c_in, int c_out);
        SparseVarF apply(const SparseVarF& x) const {
            return sparse_conv<float>(x, W, b, kernel, stride);
        }
        SparseVarF apply_generative(const SparseVarF& x) const {
            return transposed_generative_conv<float>(x, W, b, kernel, stride);
        }
    };

    struct EncBlock {
        ConvLayer strided;
        nn::BatchNorm<float> bn_strided;
        ConvLayer normal;
        nn::BatchNorm<float> bn_normal;
    };

    struct DecBlock {
        ConvLayer up;
        nn::BatchNorm<float> bn_up;
        ConvLayer refine;
        nn::BatchNorm<float> bn_refine;
        ConvLayer likelihood;  // 1-channel head, sigmoid activation
    };

    ModelSpec spec_;
    ConvLayer stem_;
    nn::BatchNorm<float> bn_stem_;
    std::array<EncBlock, ModelSpec::num_stages> enc_;
    std::array<DecBlock, ModelSpec::num_stages> dec_;
    ConvLayer out_head_;  // 3-channel head, sigmoid activation
};

// Per-level binary occupancy targets: level l holds the floor-to-2^l
// multiples of the ground-truth coordinates (logical OR pooling). Level 0 is
// the ground truth itself.
std::vector<CoordSetPtr> target_pyramid(const CoordSet& gt, int levels);

}  // namespace trec
