#include "trec/sparse_ops.hpp"

namespace trec {

std::vector<Coord4> enumerate_kernel_offsets(const Kernel4& kernel_size) {
    std::array<std::pair<int32_t, int32_t>, 4> range;  // [lo, hi] per axis
    for (int a = 0; a < 4; ++a) {
        TREC_CHECK(kernel_size[a] >= 1, "kernel size components must be positive");
        if (kernel_size[a] % 2 == 1) {
            range[a] = {-(kernel_size[a] / 2), kernel_size[a] / 2};
        } else {
            range[a] = {0, kernel_size[a] - 1};
        }
    }
    std::vector<Coord4> offsets;
    offsets.reserve(static_cast<size_t>(kernel_volume(kernel_size)));
    for (int32_t x = range[0].first; x <= range[0].second; ++x)
        for (int32_t y = range[1].first; y <= range[1].second; ++y)
            for (int32_t z = range[2].first; z <= range[2].second; ++z)
                for (int32_t k = range[3].first; k <= range[3].second; ++k)
                    offsets.push_back(Coord4{x, y, z, k});
    return offsets;
}

KernelMap build_kernel_map(const CoordSet& in_coords, const CoordSet& out_coords,
                           const Kernel4& kernel_size, const Kernel4& stride) {
    const std::vector<Coord4> offsets = enumerate_kernel_offsets(kernel_size);
    const Stride4& in_stride = in_coords.stride();

    KernelMap km;
    km.kernel_size = kernel_size;
    km.stride = stride;
    km.pairs.resize(offsets.size());

    const auto& outs = out_coords.coords();
    for (size_t oi = 0; oi < offsets.size(); ++oi) {
        const Coord4& off = offsets[oi];
        auto& bucket = km.pairs[oi];
        for (size_t o = 0; o < outs.size(); ++o) {
            const Coord4 cand{outs[o][0] + off[0] * in_stride[0],
                              outs[o][1] + off[1] * in_stride[1],
                              outs[o][2] + off[2] * in_stride[2],
                              outs[o][3] + off[3] * in_stride[3]};
            const int32_t in_row = in_coords.find(cand);
            if (in_row >= 0) bucket.emplace_back(in_row, static_cast<int32_t>(o));
        }
    }
    return km;
}

namespace {
inline int32_t floor_to_multiple(int32_t v, int32_t m) {
    if (m == 1) return v;
    const int32_t q = (v >= 0) ? v / m : -((-v + m - 1) / m);
    return q * m;
}
}  // namespace

CoordSetPtr conv_output_coords(const CoordSetPtr& in, const Kernel4& stride) {
    if (stride == Kernel4{1, 1, 1, 1}) return in;  // active set preserved
    const Stride4& in_stride = in->stride();
    Stride4 out_stride;
    for (int a = 0; a < 4; ++a) out_stride[a] = in_stride[a] * stride[a];

    auto out = make_coord_set(out_stride, in->size());
    for (const Coord4& c : in->coords()) {
        out->insert(Coord4{floor_to_multiple(c[0], out_stride[0]),
                           floor_to_multiple(c[1], out_stride[1]),
                           floor_to_multiple(c[2], out_stride[2]),
                           floor_to_multiple(c[3], out_stride[3])});
    }
    return out;
}

GenerativeCoords generative_output_coords(const CoordSet& in, const Kernel4& kernel_size,
                                          const Kernel4& stride) {
    const Stride4& in_stride = in.stride();
    Stride4 out_stride;
    for (int a = 0; a < 4; ++a) {
        TREC_CHECK(in_stride[a] % stride[a] == 0,
                   "tensor stride must be divisible by the up-sampling stride");
        out_stride[a] = in_stride[a] / stride[a];
    }
    const std::vector<Coord4> offsets = enumerate_kernel_offsets(kernel_size);

    GenerativeCoords gen;
    gen.coords = make_coord_set(out_stride, in.size() * offsets.size());
    gen.map.kernel_size = kernel_size;
    gen.map.stride = stride;
    gen.map.pairs.resize(offsets.size());

    const auto& ins = in.coords();
    for (size_t i = 0; i < ins.size(); ++i) {
        for (size_t oi = 0; oi < offsets.size(); ++oi) {
            const Coord4& off = offsets[oi];
            const Coord4 child{ins[i][0] + off[0] * out_stride[0],
                               ins[i][1] + off[1] * out_stride[1],
                               ins[i][2] + off[2] * out_stride[2],
                               ins[i][3] + off[3] * out_stride[3]};
            const int32_t out_row = gen.coords->insert(child);
            gen.map.pairs[oi].emplace_back(static_cast<int32_t>(i), out_row);
        }
    }
    return gen;
}

PruneResult prune_coords(const CoordSet& coords, const MatXf& likelihood, float alpha) {
    TREC_CHECK(likelihood.cols() == 1, "likelihood must have a single channel");
    TREC_CHECK(static_cast<size_t>(likelihood.rows()) == coords.size(),
               "likelihood rows must match coordinate count");
    PruneResult res;
    for (Eigen::Index r = 0; r < likelihood.rows(); ++r) {
        if (likelihood(r, 0) >= alpha) res.kept_rows.push_back(static_cast<int32_t>(r));
    }
    res.coords = make_coord_set(coords.stride(), res.kept_rows.size());
    for (int32_t r : res.kept_rows) res.coords->insert(coords.coords()[static_cast<size_t>(r)]);
    return res;
}

}  // namespace trec
