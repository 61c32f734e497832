#pragma once

#include <array>
#include <memory>
#include <vector>

#include "trec/autograd.hpp"
#include "trec/sparse_tensor.hpp"

namespace trec {

using Kernel4 = std::array<int32_t, 4>;

// Sparse tensor whose features participate in the autograd graph.
template <class S>
struct SparseVar {
    CoordSetPtr coords;
    ad::NodePtr<S> feats;

    size_t size() const { return coords ? coords->size() : 0; }
    int channels() const { return feats ? static_cast<int>(feats->value.cols()) : 0; }
    const Stride4& stride() const { return coords->stride(); }
};

using SparseVarF = SparseVar<float>;

template <class S>
SparseVar<S> to_var(const SparseTensor& t, bool requires_grad = false) {
    return SparseVar<S>{t.coords, ad::make_leaf<S>(t.feats.template cast<S>(), requires_grad)};
}

inline SparseTensor to_tensor(const SparseVar<float>& v) {
    return SparseTensor(v.coords, v.feats->value);
}

// Offsets enumerated centered for odd kernel sizes, forward-aligned [0, size)
// for even sizes; nested x, y, z, k loops, x outermost. Fixed project-wide.
std::vector<Coord4> enumerate_kernel_offsets(const Kernel4& kernel_size);

inline int kernel_volume(const Kernel4& k) { return k[0] * k[1] * k[2] * k[3]; }

// Per kernel-offset list of (input-row, output-row) pairs. Pair order is
// fixed by the output insertion order, which pins the reduction order of
// every gather-scatter pass.
struct KernelMap {
    Kernel4 kernel_size{1, 1, 1, 1};
    Kernel4 stride{1, 1, 1, 1};
    std::vector<std::vector<std::pair<int32_t, int32_t>>> pairs;  // [offset] -> (in, out)

    size_t total_pairs() const {
        size_t n = 0;
        for (const auto& p : pairs) n += p.size();
        return n;
    }
};

// Pair (i, o) is included iff coord(o) + offset * in_stride = coord(i) for
// some enumerated offset.
KernelMap build_kernel_map(const CoordSet& in_coords, const CoordSet& out_coords,
                           const Kernel4& kernel_size, const Kernel4& stride);

// Output coordinates of a strided convolution: distinct floor-to-stride
// multiples of the input coordinates. Stride 1 shares the input set.
CoordSetPtr conv_output_coords(const CoordSetPtr& in, const Kernel4& stride);

// Output coordinates of a generative transposed convolution plus the kernel
// map: every input coordinate emits all children in the kernel footprint at
// the finer stride.
struct GenerativeCoords {
    CoordSetPtr coords;
    KernelMap map;
};
GenerativeCoords generative_output_coords(const CoordSet& in, const Kernel4& kernel_size,
                                          const Kernel4& stride);

// ---- autograd convolution ops ----
//
// Weights are stored as one (kernel_volume * C_in) x C_out matrix; the rows
// of offset i are the block starting at i * C_in. Bias is 1 x C_out and may
// be null.

template <class S>
ad::NodePtr<S> conv_features(const ad::NodePtr<S>& input, const ad::NodePtr<S>& weights,
                             const ad::NodePtr<S>& bias, std::shared_ptr<const KernelMap> km,
                             Eigen::Index out_rows) {
    const Eigen::Index c_in = input->value.cols();
    const Eigen::Index c_out = weights->value.cols();
    const int volume = kernel_volume(km->kernel_size);
    TREC_CHECK(weights->value.rows() == volume * c_in,
               "weight rows must equal kernel_volume * C_in");

    ad::Mat<S> out = ad::Mat<S>::Zero(out_rows, c_out);
    ad::Mat<S> gathered;
    for (int oi = 0; oi < volume; ++oi) {
        const auto& pairs = km->pairs[oi];
        if (pairs.empty()) continue;
        gathered.resize(static_cast<Eigen::Index>(pairs.size()), c_in);
        for (size_t p = 0; p < pairs.size(); ++p) {
            gathered.row(static_cast<Eigen::Index>(p)) = input->value.row(pairs[p].first);
        }
        const ad::Mat<S> h = gathered * weights->value.middleRows(oi * c_in, c_in);
        for (size_t p = 0; p < pairs.size(); ++p) {
            out.row(pairs[p].second) += h.row(static_cast<Eigen::Index>(p));
        }
    }
    if (bias) out.rowwise() += bias->value.row(0);

    std::vector<ad::NodePtr<S>> parents{input, weights};
    if (bias) parents.push_back(bias);
    return ad::make_op<S>(
        std::move(out), std::move(parents),
        [input, weights, bias, km, c_in, volume](ad::Node<S>& n) {
            ad::Mat<S> gathered, gout;
            for (int oi = 0; oi < volume; ++oi) {
                const auto& pairs = km->pairs[oi];
                if (pairs.empty()) continue;
                gout.resize(static_cast<Eigen::Index>(pairs.size()), n.grad.cols());
                for (size_t p = 0; p < pairs.size(); ++p) {
                    gout.row(static_cast<Eigen::Index>(p)) = n.grad.row(pairs[p].second);
                }
                const auto w_block = weights->value.middleRows(oi * c_in, c_in);
                if (input->requires_grad) {
                    const ad::Mat<S> gin = gout * w_block.transpose();
                    ad::Mat<S>& gx = input->grad_ref();
                    for (size_t p = 0; p < pairs.size(); ++p) {
                        gx.row(pairs[p].first) += gin.row(static_cast<Eigen::Index>(p));
                    }
                }
                if (weights->requires_grad) {
                    gathered.resize(static_cast<Eigen::Index>(pairs.size()), c_in);
                    for (size_t p = 0; p < pairs.size(); ++p) {
                        gathered.row(static_cast<Eigen::Index>(p)) =
                            input->value.row(pairs[p].first);
                    }
                    weights->grad_ref().middleRows(oi * c_in, c_in) +=
                        gathered.transpose() * gout;
                }
            }
            if (bias && bias->requires_grad) {
                bias->grad_ref().row(0) += n.grad.colwise().sum();
            }
        });
}

// Generalized sparse convolution. Stride 1 keeps the input coordinate set;
// stride 2 spatial halves the active lattice and doubles the tensor stride.
template <class S>
SparseVar<S> sparse_conv(const SparseVar<S>& input, const ad::NodePtr<S>& weights,
                         const ad::NodePtr<S>& bias, const Kernel4& kernel_size,
                         const Kernel4& stride) {
    const int volume = kernel_volume(kernel_size);
    TREC_CHECK(weights->value.rows() == volume * input.feats->value.cols(),
               "channel mismatch between input and weights");

    CoordSetPtr out_coords = conv_output_coords(input.coords, stride);
    auto km = std::make_shared<KernelMap>(
        build_kernel_map(*input.coords, *out_coords, kernel_size, stride));
    ad::NodePtr<S> feats = conv_features<S>(input.feats, weights, bias, km,
                                            static_cast<Eigen::Index>(out_coords->size()));
    return SparseVar<S>{std::move(out_coords), std::move(feats)};
}

// Generative transposed convolution: up-samples the lattice by the stride
// and creates every child coordinate in the kernel footprint.
template <class S>
SparseVar<S> transposed_generative_conv(const SparseVar<S>& input, const ad::NodePtr<S>& weights,
                                        const ad::NodePtr<S>& bias, const Kernel4& kernel_size,
                                        const Kernel4& stride) {
    GenerativeCoords gen = generative_output_coords(*input.coords, kernel_size, stride);
    auto km = std::make_shared<KernelMap>(std::move(gen.map));
    ad::NodePtr<S> feats = conv_features<S>(input.feats, weights, bias, km,
                                            static_cast<Eigen::Index>(gen.coords->size()));
    return SparseVar<S>{std::move(gen.coords), std::move(feats)};
}

struct PruneResult {
    std::vector<int32_t> kept_rows;
    CoordSetPtr coords;
};

// Rows kept by thresholding the likelihood at alpha (keep when >= alpha).
PruneResult prune_coords(const CoordSet& coords, const MatXf& likelihood, float alpha);

// Keeps exactly the coordinates whose likelihood is >= alpha; features pass
// through untouched, the likelihood tensor is not forwarded.
template <class S>
SparseVar<S> prune(const SparseVar<S>& features, const SparseVar<S>& likelihood, double alpha) {
    TREC_CHECK(likelihood.channels() == 1, "likelihood must have a single channel");
    TREC_CHECK(features.coords == likelihood.coords ||
                   features.coords->coords() == likelihood.coords->coords(),
               "features and likelihood must share a coordinate set");
    TREC_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");

    std::vector<int32_t> kept;
    kept.reserve(features.size());
    const auto& lik = likelihood.feats->value;
    for (Eigen::Index r = 0; r < lik.rows(); ++r) {
        if (static_cast<double>(lik(r, 0)) >= alpha) kept.push_back(static_cast<int32_t>(r));
    }
    auto coords = make_coord_set(features.stride(), kept.size());
    const auto& in_coords = features.coords->coords();
    for (int32_t r : kept) coords->insert(in_coords[static_cast<size_t>(r)]);
    ad::NodePtr<S> feats = ad::take_rows<S>(features.feats, std::move(kept));
    return SparseVar<S>{std::move(coords), std::move(feats)};
}

}  // namespace trec
