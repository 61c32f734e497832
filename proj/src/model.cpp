#include "trec/model.hpp"

#include <cmath>

namespace trec {

uint64_t ModelSpec::hash() const {
    uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    auto feed = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001B3ull;
        }
    };
    feed(static_cast<uint64_t>(grid_dim));
    feed(static_cast<uint64_t>(cell_size * 1e6f));
    for (int w : widths) feed(static_cast<uint64_t>(w));
    for (const Kernel4* k : {&enc_normal_kernel, &enc_strided_kernel, &dec_normal_kernel,
                             &dec_strided_kernel, &down_stride}) {
        for (int v : *k) feed(static_cast<uint64_t>(v));
    }
    return h;
}

void Model::ConvLayer::init(Rng& rng, const Kernel4& k, const Kernel4& s, int c_in, int c_out) {
    kernel = k;
    stride = s;
    const int volume = kernel_volume(k);
    const double limit = std::sqrt(6.0 / static_cast<double>(volume * c_in));
    W = ad::make_param<float>(nn::init_uniform<float>(
        rng, static_cast<Eigen::Index>(volume) * c_in, c_out, limit));
    b = ad::make_param<float>(ad::Mat<float>::Zero(1, c_out));
}

Model::Model(const ModelSpec& spec, uint64_t seed) : spec_(spec) {
    for (size_t i = 0; i + 1 < spec.widths.size(); ++i) {
        TREC_CHECK(spec.widths[i] > 0 && spec.widths[i + 1] > 0, "channel widths must be positive");
    }
    Rng rng(seed);
    const Kernel4 unit{1, 1, 1, 1};

    stem_.init(rng, spec.enc_normal_kernel, unit, 3, spec.widths[0]);
    bn_stem_.reset(spec.widths[0]);

    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        const int c_in = spec.widths[static_cast<size_t>(i)];
        const int c_out = spec.widths[static_cast<size_t>(i) + 1];
        enc_[i].strided.init(rng, spec.enc_strided_kernel, spec.down_stride, c_in, c_out);
        enc_[i].bn_strided.reset(c_out);
        enc_[i].normal.init(rng, spec.enc_normal_kernel, unit, c_out, c_out);
        enc_[i].bn_normal.reset(c_out);
    }

    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        // dec_[i] up-samples from stride 2^(4-i) to 2^(3-i)
        const int c_in = spec.widths[static_cast<size_t>(ModelSpec::num_stages - i)];
        const int c_out = spec.widths[static_cast<size_t>(ModelSpec::num_stages - i) - 1];
        dec_[i].up.init(rng, spec.dec_strided_kernel, spec.down_stride, c_in, c_out);
        dec_[i].bn_up.reset(c_out);
        dec_[i].refine.init(rng, spec.dec_normal_kernel, unit, 2 * c_out, c_out);
        dec_[i].bn_refine.reset(c_out);
        dec_[i].likelihood.init(rng, unit, unit, c_out, 1);
    }

    out_head_.init(rng, unit, unit, spec.widths[0], 3);
}

namespace {

SparseVarF empty_var(int channels) {
    return SparseVarF{make_coord_set(), ad::make_leaf<float>(ad::Mat<float>::Zero(0, channels))};
}

// Gathers skip features onto the decoder coordinate set; decoder coordinates
// absent on the encoder side receive zeros.
SparseVarF merge_skip(const SparseVarF& dec, const SparseVarF& skip) {
    std::vector<int32_t> index(dec.size());
    const auto& coords = dec.coords->coords();
    for (size_t r = 0; r < coords.size(); ++r) {
        index[r] = skip.coords->find(coords[r]);
    }
    ad::NodePtr<float> gathered = ad::gather_rows_or_zero<float>(skip.feats, std::move(index));
    return SparseVarF{dec.coords, ad::concat_cols<float>(dec.feats, gathered)};
}

}  // namespace

Model::Forward Model::forward(const SparseTensor& input, float alpha, bool training) {
    TREC_CHECK(input.channels() == 3, "model input must have C = 3");
    TREC_CHECK((input.stride() == Stride4{1, 1, 1, 1}), "model input must have tensor stride 1");
    for (const Coord4& c : input.coords->coords()) {
        TREC_CHECK(c[0] >= 0 && c[0] < spec_.grid_dim && c[1] >= 0 && c[1] < spec_.grid_dim &&
                       c[2] >= 0 && c[2] < spec_.grid_dim && (c[3] == 0 || c[3] == 1),
                   "input coordinates must lie within the grid and k in {0, 1}");
    }

    Forward out;
    if (input.size() == 0) {
        out.estimate = empty_var(3);
        out.latent = make_coord_set({16, 16, 16, 1});
        out.truncated = true;
        return out;
    }

    SparseVarF x = to_var<float>(input);
    x = SparseVarF{x.coords, ad::elu<float>(bn_stem_.forward(stem_.apply(x).feats, training))};
    // stem output reuses the input coordinate set (stride-1 convolution)

    std::vector<SparseVarF> skips;  // strides 1, 2, 4, 8
    skips.push_back(x);
    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        SparseVarF s = enc_[i].strided.apply(x);
        s.feats = ad::elu<float>(enc_[i].bn_strided.forward(s.feats, training));
        SparseVarF n = enc_[i].normal.apply(s);
        n.feats = ad::elu<float>(enc_[i].bn_normal.forward(n.feats, training));
        x = n;
        if (i + 1 < ModelSpec::num_stages) skips.push_back(x);
    }
    out.latent = x.coords;

    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        SparseVarF u = dec_[i].up.apply_generative(x);
        u.feats = ad::elu<float>(dec_[i].bn_up.forward(u.feats, training));
        const SparseVarF& skip = skips[static_cast<size_t>(ModelSpec::num_stages - 1 - i)];
        SparseVarF merged = merge_skip(u, skip);
        SparseVarF r{merged.coords, dec_[i].refine.apply(merged).feats};
        r.feats = ad::elu<float>(dec_[i].bn_refine.forward(r.feats, training));

        SparseVarF lik{r.coords, ad::sigmoid<float>(dec_[i].likelihood.apply(r).feats)};
        out.likelihoods.push_back(lik);

        x = prune<float>(r, lik, alpha);
        if (x.size() == 0) {
            out.estimate = empty_var(3);
            out.truncated = true;
            return out;
        }
    }

    // output head on the pruned stride-1 tensor, then the k = 0 slice is the
    // point cloud estimate
    SparseVarF head{x.coords, ad::sigmoid<float>(out_head_.apply(x).feats)};
    std::vector<int32_t> k0_rows;
    auto est_coords = make_coord_set({1, 1, 1, 1});
    const auto& coords = head.coords->coords();
    for (size_t r = 0; r < coords.size(); ++r) {
        if (coords[r][3] == 0) {
            k0_rows.push_back(static_cast<int32_t>(r));
            est_coords->insert(coords[r]);
        }
    }
    out.estimate = SparseVarF{std::move(est_coords),
                              ad::take_rows<float>(head.feats, std::move(k0_rows))};
    return out;
}

std::vector<ad::NodePtr<float>> Model::parameters() const {
    std::vector<ad::NodePtr<float>> ps;
    auto push_conv = [&ps](const ConvLayer& c) {
        ps.push_back(c.W);
        ps.push_back(c.b);
    };
    auto push_bn = [&ps](const nn::BatchNorm<float>& bn) {
        ps.push_back(bn.gamma);
        ps.push_back(bn.beta);
    };
    push_conv(stem_);
    push_bn(bn_stem_);
    for (const auto& e : enc_) {
        push_conv(e.strided);
        push_bn(e.bn_strided);
        push_conv(e.normal);
        push_bn(e.bn_normal);
    }
    for (const auto& d : dec_) {
        push_conv(d.up);
        push_bn(d.bn_up);
        push_conv(d.refine);
        push_bn(d.bn_refine);
        push_conv(d.likelihood);
    }
    push_conv(out_head_);
    return ps;
}

int64_t Model::parameter_count() const {
    int64_t n = 0;
    for (const auto& p : parameters()) n += p->value.size();
    return n;
}

std::vector<std::pair<std::string, ad::Mat<float>*>> Model::named_state() {
    std::vector<std::pair<std::string, ad::Mat<float>*>> out;
    auto add_conv = [&out](const std::string& name, ConvLayer& c) {
        out.emplace_back(name + ".W", &c.W->value);
        out.emplace_back(name + ".b", &c.b->value);
    };
    auto add_bn = [&out](const std::string& name, nn::BatchNorm<float>& bn) {
        out.emplace_back(name + ".gamma", &bn.gamma->value);
        out.emplace_back(name + ".beta", &bn.beta->value);
        out.emplace_back(name + ".running_mean", &bn.running_mean);
        out.emplace_back(name + ".running_var", &bn.running_var);
    };
    add_conv("stem", stem_);
    add_bn("stem.bn", bn_stem_);
    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        const std::string p = "enc" + std::to_string(i);
        add_conv(p + ".strided", enc_[i].strided);
        add_bn(p + ".strided.bn", enc_[i].bn_strided);
        add_conv(p + ".normal", enc_[i].normal);
        add_bn(p + ".normal.bn", enc_[i].bn_normal);
    }
    for (int i = 0; i < ModelSpec::num_stages; ++i) {
        const std::string p = "dec" + std::to_string(i);
        add_conv(p + ".up", dec_[i].up);
        add_bn(p + ".up.bn", dec_[i].bn_up);
        add_conv(p + ".refine", dec_[i].refine);
        add_bn(p + ".refine.bn", dec_[i].bn_refine);
        add_conv(p + ".likelihood", dec_[i].likelihood);
    }
    add_conv("out", out_head_);
    return out;
}

std::vector<CoordSetPtr> target_pyramid(const CoordSet& gt, int levels) {
    std::vector<CoordSetPtr> out;
    out.reserve(static_cast<size_t>(levels));
    for (int l = 0; l < levels; ++l) {
        const int32_t s = 1 << l;
        auto set = make_coord_set({s, s, s, 1}, gt.size());
        for (const Coord4& c : gt.coords()) {
            set->insert(Coord4{(c[0] / s) * s, (c[1] / s) * s, (c[2] / s) * s, c[3]});
        }
        out.push_back(std::move(set));
    }
    return out;
}

}  // namespace trec
