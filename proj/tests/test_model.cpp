#include <doctest.h>

#include "trec/pipeline.hpp"
#include "trec/train.hpp"

using namespace trec;

namespace {

// closed-form parameter count from the layer shapes, independent of the
// model's own bookkeeping
int64_t expected_parameter_count(const ModelSpec& s) {
    auto conv = [](const Kernel4& k, int c_in, int c_out) {
        return static_cast<int64_t>(kernel_volume(k)) * c_in * c_out + c_out;
    };
    auto bn = [](int c) { return static_cast<int64_t>(2) * c; };

    int64_t n = conv(s.enc_normal_kernel, 3, s.widths[0]) + bn(s.widths[0]);
    for (int i = 0; i < 4; ++i) {
        const int ci = s.widths[static_cast<size_t>(i)];
        const int co = s.widths[static_cast<size_t>(i) + 1];
        n += conv(s.enc_strided_kernel, ci, co) + bn(co);
        n += conv(s.enc_normal_kernel, co, co) + bn(co);
    }
    for (int i = 4; i >= 1; --i) {
        const int ci = s.widths[static_cast<size_t>(i)];
        const int co = s.widths[static_cast<size_t>(i) - 1];
        n += conv(s.dec_strided_kernel, ci, co) + bn(co);
        n += conv(s.dec_normal_kernel, 2 * co, co) + bn(co);
        n += conv({1, 1, 1, 1}, co, 1);
    }
    n += conv({1, 1, 1, 1}, s.widths[0], 3);
    return n;
}

SparseTensor random_input(Rng& rng, int dim, int n) {
    std::vector<Vec3f> pts;
    for (int i = 0; i < n; ++i) {
        pts.emplace_back(static_cast<float>(rng.uniform(0, dim)),
                         static_cast<float>(rng.uniform(0, dim)),
                         static_cast<float>(rng.uniform(0, dim)));
    }
    GridConfig cfg;
    cfg.dim = dim;
    cfg.cell_size = 1.f;
    auto meas = voxelize(pts, cfg, 0).tensor;
    return temporal_concat(meas, SparseTensor::empty(3));
}

}  // namespace

TEST_CASE("parameter count matches the closed-form layer-shape count") {
    Model desk(ModelSpec::desk(), 1);
    CHECK(desk.parameter_count() == expected_parameter_count(ModelSpec::desk()));
    Model paper(ModelSpec::paper(), 1);
    CHECK(paper.parameter_count() == expected_parameter_count(ModelSpec::paper()));
}

TEST_CASE("parameter initialization determinism") {
    Model a(ModelSpec::desk(), 42);
    Model b(ModelSpec::desk(), 42);
    Model c(ModelSpec::desk(), 43);

    const auto pa = a.parameters();
    const auto pb = b.parameters();
    const auto pc = c.parameters();
    bool all_equal = true, any_diff = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->value != pb[i]->value) all_equal = false;
        if (pa[i]->value != pc[i]->value) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("invalid spec is a construction error") {
    ModelSpec bad = ModelSpec::desk();
    bad.widths[2] = 0;
    CHECK_THROWS_AS(Model(bad, 1), ContractViolation);
}

TEST_CASE("forward: sigmoid output range and k = 0 slice") {
    ad::NoGradGuard no_grad;
    Model model(ModelSpec::desk(), 7);
    Rng rng(9);
    const SparseTensor input = random_input(rng, 32, 300);
    Model::Forward fwd = model.forward(input, 0.3f, false);

    for (const Coord4& c : fwd.estimate.coords->coords()) CHECK(c[3] == 0);
    const auto& est = fwd.estimate.feats->value;
    for (Eigen::Index i = 0; i < est.rows(); ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(est(i, j) > 0.f);
            CHECK(est(i, j) < 1.f);
        }
    }
    CHECK(fwd.likelihoods.size() <= 4);
}

TEST_CASE("forward: fully occupied desk grid fills the latent block") {
    ad::NoGradGuard no_grad;
    ModelSpec spec = ModelSpec::desk();
    Model model(spec, 3);

    std::vector<Vec3f> pts;
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y)
            for (int z = 0; z < 32; ++z) pts.emplace_back(x + 0.5f, y + 0.5f, z + 0.5f);
    GridConfig cfg;
    cfg.dim = 32;
    cfg.cell_size = 1.f;
    const SparseTensor meas = voxelize(pts, cfg, 0).tensor;
    const SparseTensor prev = voxelize(pts, cfg, 1).tensor;
    const SparseTensor input = temporal_concat(meas, prev);

    Model::Forward fwd = model.forward(input, 0.5f, false);
    REQUIRE(fwd.latent != nullptr);
    CHECK(fwd.latent->size() == 2 * 2 * 2 * 2);
    CHECK((fwd.latent->stride() == Stride4{16, 16, 16, 1}));
    for (const Coord4& c : fwd.latent->coords()) {
        CHECK((c[0] == 0 || c[0] == 16));
        CHECK((c[1] == 0 || c[1] == 16));
        CHECK((c[2] == 0 || c[2] == 16));
        CHECK((c[3] == 0 || c[3] == 1));
    }
}

TEST_CASE("forward: alpha = 1 prunes everything, empty input is legal") {
    ad::NoGradGuard no_grad;
    Model model(ModelSpec::desk(), 5);
    Rng rng(11);
    const SparseTensor input = random_input(rng, 32, 200);

    Model::Forward all_pruned = model.forward(input, 1.0f, false);
    CHECK(all_pruned.estimate.size() == 0);
    CHECK(all_pruned.truncated);

    Model::Forward empty = model.forward(SparseTensor::empty(3), 0.5f, false);
    CHECK(empty.estimate.size() == 0);
    CHECK(empty.truncated);

    // out-of-grid coordinates violate the forward contract
    auto bad_coords = make_coord_set();
    bad_coords->insert(Coord4{40, 0, 0, 0});
    const SparseTensor bad(bad_coords, MatXf::Zero(1, 3));
    CHECK_THROWS_AS(model.forward(bad, 0.5f, false), ContractViolation);
}

TEST_CASE("target_pyramid examples") {
    SUBCASE("single coordinate OR-pools upward") {
        auto gt = make_coord_set();
        gt->insert(Coord4{5, 3, 2, 0});
        const auto pyr = target_pyramid(*gt, 4);
        REQUIRE(pyr.size() == 4);
        CHECK(pyr[0]->contains(Coord4{5, 3, 2, 0}));
        CHECK(pyr[1]->size() == 1);
        CHECK(pyr[1]->contains(Coord4{4, 2, 2, 0}));
        CHECK(pyr[3]->contains(Coord4{0, 0, 0, 0}));
    }
    SUBCASE("a full 2x2x2 block pools to one coarse cell") {
        auto gt = make_coord_set();
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                for (int z = 0; z < 2; ++z) gt->insert(Coord4{x, y, z, 0});
        const auto pyr = target_pyramid(*gt, 2);
        CHECK(pyr[1]->size() == 1);
        CHECK(pyr[1]->contains(Coord4{0, 0, 0, 0}));
    }
    SUBCASE("empty ground truth stays empty at all levels") {
        auto gt = make_coord_set();
        const auto pyr = target_pyramid(*gt, 4);
        for (const auto& level : pyr) CHECK(level->size() == 0);
    }
}

TEST_CASE("one optimizer step decreases the training loss") {
    ModelSpec spec = ModelSpec::desk();
    Model model(spec, 13);
    Rng rng(17);

    const SparseTensor input = random_input(rng, 32, 120);
    const SparseTensor gt = random_input(rng, 32, 150);

    // alpha = 0 keeps every coordinate, so both passes see the same active
    // sets and the losses are directly comparable
    nn::Adam<float> opt(model.parameters());
    Model::Forward fwd1 = model.forward(input, 0.0f, true);
    StepLoss loss1 = step_loss(fwd1, gt);
    ad::backward(loss1.node);
    REQUIRE(opt.step(1e-4f));

    Model::Forward fwd2 = model.forward(input, 0.0f, true);
    StepLoss loss2 = step_loss(fwd2, gt);
    CHECK(loss2.bce + loss2.offset < loss1.bce + loss1.offset);
}

TEST_CASE("rollout: cold start equals a measurement-only forward") {
    Model model(ModelSpec::desk(), 19);
    const GridConfig grid = GridConfig::robot_centric(32, 0.1f);
    Rng rng(23);

    Trajectory traj(1);
    traj[0].true_pose = Pose::identity();
    traj[0].odom_pose = Pose::identity();
    traj[0].measurement.frame = Frame::robot;
    for (int i = 0; i < 200; ++i) {
        traj[0].measurement.points.emplace_back(static_cast<float>(rng.uniform(-1.5, 1.5)),
                                                static_cast<float>(rng.uniform(-1.5, 1.5)),
                                                static_cast<float>(rng.uniform(-1.5, 1.5)));
    }

    const RolloutResult roll = rollout(model, traj, 0.4f);
    REQUIRE(roll.estimates.size() == 1);

    ad::NoGradGuard no_grad;
    const SparseTensor meas = voxelize_cloud(traj[0].measurement, grid, 0).tensor;
    const SparseTensor input = temporal_concat(meas, SparseTensor::empty(3));
    Model::Forward direct = model.forward(input, 0.4f, false);
    CHECK(roll.estimates[0].coords->coords() == direct.estimate.coords->coords());
    CHECK(roll.estimates[0].feats == direct.estimate.feats->value);
}

TEST_CASE("rollout: static robot sees both temporal slices at step 2") {
    Model model(ModelSpec::desk(), 29);
    const GridConfig grid = GridConfig::robot_centric(32, 0.1f);
    Rng rng(31);

    PointCloud meas;
    meas.frame = Frame::robot;
    for (int i = 0; i < 300; ++i) {
        meas.points.emplace_back(static_cast<float>(rng.uniform(-1.5, 1.5)),
                                 static_cast<float>(rng.uniform(-1.5, 1.5)),
                                 static_cast<float>(rng.uniform(-1.5, 1.5)));
    }
    Trajectory traj(2);
    for (auto& f : traj) {
        f.true_pose = Pose::identity();
        f.odom_pose = Pose::identity();
        f.measurement = meas;
    }

    // alpha = 0 keeps the first-step estimate non-empty
    const RolloutResult roll = rollout(model, traj, 0.0f);
    REQUIRE(roll.estimates[0].size() > 0);

    ad::NoGradGuard no_grad;
    const SparseTensor step2 = build_step_input(traj[1].measurement, roll.estimates[0],
                                                traj[0].odom_pose, traj[1].odom_pose, grid);
    bool has_k0 = false, has_k1 = false;
    for (const Coord4& c : step2.coords->coords()) {
        has_k0 |= c[3] == 0;
        has_k1 |= c[3] == 1;
    }
    CHECK(has_k0);
    CHECK(has_k1);
}

TEST_CASE("checkpoint round trip restores every tensor bit-exactly") {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "trec_ckpt_test.tckp";
    Model a(ModelSpec::desk(), 37);
    nn::Adam<float> opt_a(a.parameters());

    // make optimizer state non-trivial
    Rng rng(41);
    const SparseTensor input = random_input(rng, 32, 80);
    const SparseTensor gt = random_input(rng, 32, 90);
    Model::Forward fwd = a.forward(input, 0.0f, true);
    StepLoss loss = step_loss(fwd, gt);
    ad::backward(loss.node);
    REQUIRE(opt_a.step(1e-3f));
    save_model(path, a, &opt_a);

    Model b(ModelSpec::desk(), 999);
    nn::Adam<float> opt_b(b.parameters());
    load_model(path, b, &opt_b);

    auto sa = a.named_state();
    auto sb = b.named_state();
    REQUIRE(sa.size() == sb.size());
    for (size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].first == sb[i].first);
        CHECK(*sa[i].second == *sb[i].second);
    }
    CHECK(opt_b.step_count() == opt_a.step_count());

    // wrong spec: loading must fail
    Model c(ModelSpec::paper(), 1);
    CHECK_THROWS(load_model(path, c));
    std::filesystem::remove(path);
}
