#include <doctest.h>

#include <set>

#include "trec/icp.hpp"
#include "trec/metrics.hpp"
#include "trec/rng.hpp"

using namespace trec;

namespace {

GridConfig unit_grid(int dim) {
    GridConfig cfg;
    cfg.dim = dim;
    cfg.cell_size = 1.f;
    cfg.origin = Vec3f::Zero();
    return cfg;
}

PointCloud cloud_at_cells(const std::set<std::array<int, 3>>& cells) {
    PointCloud c;
    for (const auto& cell : cells) {
        c.points.emplace_back(cell[0] + 0.5f, cell[1] + 0.5f, cell[2] + 0.5f);
    }
    return c;
}

// independent brute-force oracle: explicit std::set comparison
struct OracleCounts {
    int64_t tp = 0, fp = 0, fn = 0;
};
OracleCounts brute_force(const PointCloud& pred, const PointCloud& gt, const GridConfig& cfg) {
    auto to_cells = [&cfg](const PointCloud& cloud) {
        std::set<std::array<int, 3>> cells;
        for (const Vec3f& p : cloud.points) {
            const float x = (p.x() - cfg.origin.x()) / cfg.cell_size;
            const float y = (p.y() - cfg.origin.y()) / cfg.cell_size;
            const float z = (p.z() - cfg.origin.z()) / cfg.cell_size;
            if (x < 0 || y < 0 || z < 0 || x >= cfg.dim || y >= cfg.dim || z >= cfg.dim) continue;
            cells.insert({static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)),
                          static_cast<int>(std::floor(z))});
        }
        return cells;
    };
    const auto p = to_cells(pred);
    const auto g = to_cells(gt);
    OracleCounts c;
    for (const auto& cell : p) {
        if (g.count(cell)) ++c.tp;
        else ++c.fp;
    }
    for (const auto& cell : g) {
        if (!p.count(cell)) ++c.fn;
    }
    return c;
}

PointCloud random_cloud(Rng& rng, int n, double extent) {
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        c.points.emplace_back(static_cast<float>(rng.uniform(0, extent)),
                              static_cast<float>(rng.uniform(0, extent)),
                              static_cast<float>(rng.uniform(0, extent)));
    }
    return c;
}

}  // namespace

TEST_CASE("occupancy_metrics examples") {
    const GridConfig cfg = unit_grid(8);

    SUBCASE("half-overlapping sets") {
        const PointCloud pred = cloud_at_cells({{0, 0, 0}, {1, 0, 0}});  // A, B
        const PointCloud gt = cloud_at_cells({{1, 0, 0}, {2, 0, 0}});    // B, C
        const MetricsRecord r = occupancy_metrics(pred, gt, cfg);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 0.5);
        CHECK(r.f1 == 0.5);
        CHECK(r.tp == 1);
        CHECK(r.fp == 1);
        CHECK(r.fn == 1);
    }
    SUBCASE("perfect prediction") {
        const PointCloud gt = cloud_at_cells({{0, 0, 0}, {3, 4, 5}, {7, 7, 7}});
        const MetricsRecord r = occupancy_metrics(gt, gt, cfg);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("empty ground truth is a contract violation") {
        const PointCloud pred = cloud_at_cells({{0, 0, 0}});
        CHECK_THROWS_AS(occupancy_metrics(pred, PointCloud{}, cfg), ContractViolation);
    }
    SUBCASE("empty prediction flags precision 0") {
        const PointCloud gt = cloud_at_cells({{0, 0, 0}});
        const MetricsRecord r = occupancy_metrics(PointCloud{}, gt, cfg);
        CHECK(r.empty_pred);
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }
}

TEST_CASE("occupancy_metrics matches the brute-force oracle on random grids") {
    Rng rng(13);
    const GridConfig cfg = unit_grid(6);
    for (int trial = 0; trial < 200; ++trial) {
        const PointCloud pred = random_cloud(rng, static_cast<int>(rng.uniform_index(80)) + 1, 6.0);
        const PointCloud gt = random_cloud(rng, static_cast<int>(rng.uniform_index(80)) + 1, 6.0);
        const OracleCounts oracle = brute_force(pred, gt, cfg);
        if (oracle.tp + oracle.fn == 0) continue;  // empty gt in grid
        const MetricsRecord r = occupancy_metrics(pred, gt, cfg);
        CHECK(r.tp == oracle.tp);
        CHECK(r.fp == oracle.fp);
        CHECK(r.fn == oracle.fn);
        // the F1 identity holds on every record
        if (r.precision + r.recall > 0) {
            CHECK(r.f1 ==
                  doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall))
                      .epsilon(1e-12));
        } else {
            CHECK(r.f1 == 0.0);
        }
    }
}

TEST_CASE("metrics are symmetric under pred/gt relabeling") {
    Rng rng(17);
    const GridConfig cfg = unit_grid(6);
    for (int trial = 0; trial < 50; ++trial) {
        const PointCloud a = random_cloud(rng, 40, 6.0);
        const PointCloud b = random_cloud(rng, 40, 6.0);
        const MetricsRecord ab = occupancy_metrics(a, b, cfg);
        const MetricsRecord ba = occupancy_metrics(b, a, cfg);
        CHECK(ab.precision == ba.recall);
        CHECK(ab.recall == ba.precision);
    }
}

TEST_CASE("height MAE examples") {
    const GridConfig cfg = unit_grid(8);
    PointCloud gt = cloud_at_cells({{0, 0, 0}, {1, 1, 0}});

    SUBCASE("identical clouds") { CHECK(height_mae_cm(gt, gt, cfg) == 0.0); }
    SUBCASE("uniform 5 cm offset") {
        PointCloud pred = gt;
        for (Vec3f& p : pred.points) p.z() += 0.05f;
        CHECK(height_mae_cm(pred, gt, cfg) == doctest::Approx(5.0).epsilon(1e-4));
    }
    SUBCASE("mean over columns") {
        PointCloud pred = gt;
        pred.points[1].z() += 0.02f;  // one column off by 2 cm, one exact
        CHECK(height_mae_cm(pred, gt, cfg) == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("no shared columns is an error") {
        const PointCloud pred = cloud_at_cells({{5, 5, 0}});
        CHECK_THROWS_AS(height_mae_cm(pred, gt, cfg), ContractViolation);
    }
    SUBCASE("top surface wins within a column") {
        PointCloud pred = cloud_at_cells({{0, 0, 0}});
        pred.points.emplace_back(0.5f, 0.5f, 3.5f);  // higher point, same column
        PointCloud gt2 = cloud_at_cells({{0, 0, 0}});
        gt2.points.emplace_back(0.5f, 0.5f, 3.5f);
        CHECK(height_mae_cm(pred, gt2, cfg) == 0.0);
    }
}

TEST_CASE("elevation map Kalman updates") {
    ElevationMap map(0.1f);
    PointCloud one;
    one.points.emplace_back(0.05f, 0.05f, 1.0f);

    SUBCASE("first measurement sets height and variance") {
        map.update(one, 0.04);
        const auto* cell = map.cell_at(0.05f, 0.05f);
        REQUIRE(cell != nullptr);
        CHECK(cell->height == doctest::Approx(1.0));
        CHECK(cell->variance == doctest::Approx(0.04));
    }
    SUBCASE("two equal-variance measurements average, variance halves") {
        map.update(one, 0.04);
        PointCloud two;
        two.points.emplace_back(0.05f, 0.05f, 2.0f);
        map.update(two, 0.04);
        const auto* cell = map.cell_at(0.05f, 0.05f);
        REQUIRE(cell != nullptr);
        CHECK(cell->height == doctest::Approx(1.5));
        CHECK(cell->variance == doctest::Approx(0.02));
    }
    SUBCASE("variance never increases under repeated updates") {
        map.update(one, 0.04);
        double prev = map.cell_at(0.05f, 0.05f)->variance;
        for (int i = 0; i < 20; ++i) {
            map.update(one, 0.04);
            const double v = map.cell_at(0.05f, 0.05f)->variance;
            CHECK(v <= prev);
            prev = v;
        }
    }
    SUBCASE("per-frame cell measurement is the mean height of its points") {
        PointCloud pair;
        pair.points.emplace_back(0.02f, 0.02f, 1.0f);
        pair.points.emplace_back(0.08f, 0.08f, 3.0f);
        map.update(pair, 0.04);
        CHECK(map.cell_at(0.05f, 0.05f)->height == doctest::Approx(2.0));
    }
}

namespace {
PointCloud structured_cloud(Rng& rng, int n) {
    // an L-shaped wall corner with a floor strip: rich geometry, no symmetry
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        const float t = static_cast<float>(rng.uniform(0, 1));
        const int face = static_cast<int>(rng.uniform_index(3));
        if (face == 0) {
            c.points.emplace_back(t * 2.f, 0.f, static_cast<float>(rng.uniform(0, 0.8)));
        } else if (face == 1) {
            c.points.emplace_back(0.f, t * 1.5f, static_cast<float>(rng.uniform(0, 0.8)));
        } else {
            c.points.emplace_back(t * 2.f, static_cast<float>(rng.uniform(0, 1.5)), 0.f);
        }
    }
    return c;
}
}  // namespace

TEST_CASE("icp_align") {
    Rng rng(19);
    const PointCloud target = structured_cloud(rng, 600);

    SUBCASE("already aligned clouds converge immediately to identity") {
        const IcpResult res = icp_align(target, target, Pose::identity(), 50, 1e-9);
        CHECK(res.rmse < 1e-6);
        CHECK(res.pose.t.norm() < 1e-6);
    }
    SUBCASE("recovers a known rigid transform") {
        for (int trial = 0; trial < 5; ++trial) {
            const double angle = rng.uniform(-0.5, 0.5);  // up to ~30 degrees
            const Vec3 axis =
                Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
            const Pose truth(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                                  rng.uniform(-0.3, 0.3)),
                             Quat(Eigen::AngleAxisd(angle, axis)));
            const PointCloud moved = transform_points(truth, target);
            // align the original onto the moved copy; exact correspondences
            // exist, so the RMSE must collapse
            const IcpResult res = icp_align(target, moved, Pose::identity(), 50, 1e-10);
            CHECK(res.rmse < 1e-3);
            CHECK(res.iterations <= 50);
            CHECK((res.pose.t - truth.t).norm() < 5e-3);
        }
    }
    SUBCASE("max_iter 0 returns the initial pose, flagged unconverged") {
        const Pose init(Vec3(0.1, 0, 0), Quat::Identity());
        const IcpResult res = icp_align(target, target, init, 0, 1e-6);
        CHECK_FALSE(res.converged);
        CHECK(res.iterations == 0);
        CHECK(res.pose.t == init.t);
    }
    SUBCASE("degenerate geometry is rejected") {
        PointCloud line;
        for (int i = 0; i < 10; ++i) line.points.emplace_back(static_cast<float>(i), 0.f, 0.f);
        CHECK_THROWS_AS(icp_align(line, target, Pose::identity(), 10, 1e-6), ContractViolation);
        PointCloud two;
        two.points = {Vec3f(0, 0, 0), Vec3f(1, 1, 1)};
        CHECK_THROWS_AS(icp_align(target, two, Pose::identity(), 10, 1e-6), ContractViolation);
    }
}

TEST_CASE("summarize reports both F1 conventions") {
    std::vector<MetricsRecord> records(2);
    records[0].precision = 1.0;
    records[0].recall = 0.2;
    records[0].f1 = 2 * 1.0 * 0.2 / 1.2;
    records[1].precision = 0.2;
    records[1].recall = 1.0;
    records[1].f1 = records[0].f1;
    const MetricsSummary s = summarize(records);
    CHECK(s.mean_precision == doctest::Approx(0.6));
    CHECK(s.mean_recall == doctest::Approx(0.6));
    CHECK(s.macro_f1 == doctest::Approx(0.6));
    CHECK(s.mean_f1 == doctest::Approx(records[0].f1));
    CHECK(s.mean_f1 < s.macro_f1);  // the two conventions genuinely differ
}
