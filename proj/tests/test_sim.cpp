#include <doctest.h>

#include "trec/sim.hpp"

using namespace trec;
using namespace trec::sim;

TEST_CASE("generate_scene: determinism and parameter ranges") {
    SceneParams params;
    const Scene a = generate_scene(params, 123);
    const Scene b = generate_scene(params, 123);
    REQUIRE(a.boxes.size() == b.boxes.size());
    for (size_t i = 0; i < a.boxes.size(); ++i) {
        CHECK(a.boxes[i].lo == b.boxes[i].lo);
        CHECK(a.boxes[i].hi == b.boxes[i].hi);
    }
    CHECK(generate_scene(params, 124).boxes.size() >= 1);
}

TEST_CASE("generate_scene: stair risers stay inside the sampled range") {
    SceneParams params;
    params.num_boxes = 0;
    params.num_poles = 0;
    params.num_corridors = 0;
    params.num_stair_flights = 1;
    params.min_steps = 5;
    params.max_steps = 5;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const Scene s = generate_scene(params, seed);
        REQUIRE(s.boxes.size() == 6);  // ground + 5 steps
        float prev_top = 0.f;
        float riser = 0.f;
        for (size_t i = 1; i < s.boxes.size(); ++i) {
            const float top = s.boxes[i].hi.z();
            CHECK(top > prev_top);  // monotone stack
            if (i == 1) riser = top;
            prev_top = top;
        }
        CHECK(riser >= 0.08f);
        CHECK(riser <= 0.25f);
        const float tread = s.boxes[1].hi.x() - s.boxes[1].lo.x();
        const float tread_y = s.boxes[1].hi.y() - s.boxes[1].lo.y();
        const float depth = std::min(tread, tread_y);  // walk axis extent
        CHECK(depth >= 0.2f);
        CHECK(depth <= 0.5f);
    }
}

TEST_CASE("generate_scene: zero element counts leave the bare ground plane") {
    SceneParams params;
    params.num_boxes = 0;
    params.num_poles = 0;
    params.num_corridors = 0;
    params.num_stair_flights = 0;
    const Scene s = generate_scene(params, 7);
    CHECK(s.boxes.size() == 1);
    CHECK(s.height_at(0.f, 0.f) == 0.f);
}

TEST_CASE("raycast: vertical ray, occlusion shadow, empty scene") {
    SceneParams params;
    params.num_boxes = 0;
    params.num_poles = 0;
    params.num_corridors = 0;
    params.num_stair_flights = 0;
    const Scene ground = generate_scene(params, 1);

    auto hit = ground.raycast(Vec3f(0, 0, 1), Vec3f(0, 0, -1), 0.f, 10.f);
    REQUIRE(hit.has_value());
    CHECK(hit->point.isApprox(Vec3f(0, 0, 0), 1e-6f));

    // box occludes the floor inside its footprint
    Scene with_box = ground;
    with_box.boxes.push_back(Aabb{Vec3f(-0.5f, -0.5f, 0.f), Vec3f(0.5f, 0.5f, 0.2f)});
    auto box_hit = with_box.raycast(Vec3f(0, 0, 1), Vec3f(0, 0, -1), 0.f, 10.f);
    REQUIRE(box_hit.has_value());
    CHECK(box_hit->point.z() == doctest::Approx(0.2f));

    const Scene empty;  // no primitives at all
    CHECK_FALSE(empty.raycast(Vec3f(0, 0, 1), Vec3f(0, 0, -1), 0.f, 10.f).has_value());
}

TEST_CASE("camera rig: four cameras pitched down") {
    const auto rig = default_camera_rig();
    REQUIRE(rig.size() == 4);
    for (const CameraModel& cam : rig) {
        // optical axis in the robot frame points 30 degrees below horizontal
        const Vec3 fwd = cam.mount.q * Vec3(0, 0, 1);
        CHECK(fwd.z() == doctest::Approx(-std::sin(30.0 * M_PI / 180.0)).epsilon(1e-9));
    }
}

TEST_CASE("raycast hits lie on scene surfaces within 1e-6 m") {
    SceneParams params;
    const Scene scene = generate_scene(params, 9);
    CameraModel cam;
    cam.mount = camera_mount(0.0, 30.0 * M_PI / 180.0, 0.3);
    const Pose robot = Pose::planar(0.2, -0.1, 0.5, 0.7);
    const Pose cam_world = compose(robot, cam.mount);
    const PointCloud hits = raycast_depth(scene, cam_world, cam);
    CHECK(hits.size() > 50);
    for (const Vec3f& p : hits.points) {
        float best = 1e9f;
        for (const Aabb& box : scene.boxes) {
            for (int a = 0; a < 3; ++a) {
                for (float plane : {box.lo[a], box.hi[a]}) {
                    const int a1 = (a + 1) % 3, a2 = (a + 2) % 3;
                    if (p[a1] >= box.lo[a1] - 1e-6f && p[a1] <= box.hi[a1] + 1e-6f &&
                        p[a2] >= box.lo[a2] - 1e-6f && p[a2] <= box.hi[a2] + 1e-6f) {
                        best = std::min(best, std::abs(p[a] - plane));
                    }
                }
            }
        }
        CHECK(best < 1e-6f);
    }
}

TEST_CASE("measurement points lie on scene surfaces after the frame round trip") {
    SceneParams params;
    const Scene scene = generate_scene(params, 5);
    const Pose robot = Pose::planar(0.0, 0.0, 0.5, 0.3);
    const PointCloud meas = render_measurement(scene, robot, default_camera_rig());
    CHECK(meas.frame == Frame::robot);
    CHECK(meas.size() > 100);

    int64_t on_surface = 0;
    for (const Vec3f& p_robot : meas.points) {
        const Vec3f p = robot.apply(p_robot);
        bool ok = false;
        for (const Aabb& box : scene.boxes) {
            // on some face plane of the box within its extents
            for (int a = 0; a < 3 && !ok; ++a) {
                if (std::abs(p[a] - box.lo[a]) < 1e-5f || std::abs(p[a] - box.hi[a]) < 1e-5f) {
                    const int a1 = (a + 1) % 3, a2 = (a + 2) % 3;
                    ok = p[a1] >= box.lo[a1] - 1e-5f && p[a1] <= box.hi[a1] + 1e-5f &&
                         p[a2] >= box.lo[a2] - 1e-5f && p[a2] <= box.hi[a2] + 1e-5f;
                }
            }
            if (ok) break;
        }
        if (ok) ++on_surface;
    }
    CHECK(on_surface == static_cast<int64_t>(meas.size()));
}

TEST_CASE("ground truth sampling: flat floor, density scaling, camera independence") {
    SceneParams params;
    params.num_boxes = 0;
    params.num_poles = 0;
    params.num_corridors = 0;
    params.num_stair_flights = 0;
    const Scene floor = generate_scene(params, 3);

    const PointCloud gt = sample_ground_truth(floor, Vec3(0, 0, 0.5), 3.2f, 500.0, 11);
    CHECK(gt.size() > 100);
    for (const Vec3f& p : gt.points) {
        CHECK(p.z() == 0.f);
        CHECK(std::abs(p.x()) <= 1.6f);
        CHECK(std::abs(p.y()) <= 1.6f);
    }

    const PointCloud dense = sample_ground_truth(floor, Vec3(0, 0, 0.5), 3.2f, 1000.0, 11);
    const double ratio = static_cast<double>(dense.size()) / static_cast<double>(gt.size());
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
}

TEST_CASE("trajectories: constant pose, straight walk spacing, stair climbs") {
    SceneParams params;
    params.num_boxes = 0;
    params.num_poles = 0;
    params.num_corridors = 0;
    params.num_stair_flights = 0;
    const Scene flat = generate_scene(params, 2);

    TrajectoryParams tp;
    tp.speed_min = tp.speed_max = 0.0;
    const TrajectorySample still = sample_trajectory(flat, 5, 10, tp);
    REQUIRE(still.poses.size() == 10);
    for (const Pose& p : still.poses) {
        CHECK((p.t - still.poses[0].t).norm() < 1e-12);
        CHECK(p.t.z() == doctest::Approx(0.5));
    }

    tp.speed_min = tp.speed_max = 1.0;
    tp.dt = 0.1;
    const TrajectorySample walk = sample_trajectory(flat, 6, 20, tp);
    for (size_t i = 1; i < walk.poses.size(); ++i) {
        const double step = (walk.poses[i].t - walk.poses[i - 1].t).norm();
        CHECK(step == doctest::Approx(0.1).epsilon(1e-6));
    }

    // climbing a step raises the base by the riser height
    Scene stepped = flat;
    stepped.boxes.push_back(Aabb{Vec3f(0.5f, -2.f, 0.f), Vec3f(4.f, 2.f, 0.2f)});
    CHECK(stepped.height_at(1.f, 0.f) == 0.2f);
    CHECK(stepped.height_at(0.f, 0.f) == 0.f);
}

TEST_CASE("inject_drift") {
    std::vector<Pose> poses;
    for (int i = 0; i < 100; ++i) poses.push_back(Pose::planar(0.01 * i, 0, 0.5, 0));

    SUBCASE("zero drift is the identity") {
        const auto out = inject_drift(poses, DriftSpec{}, 3);
        for (size_t i = 0; i < poses.size(); ++i) CHECK(out[i].t == poses[i].t);
    }
    SUBCASE("a -7 cm step event biases every subsequent pose") {
        DriftSpec spec;
        spec.step_events.push_back({40, Vec3(0, 0, -0.07)});
        const auto out = inject_drift(poses, spec, 3);
        for (size_t i = 0; i < 40; ++i) CHECK(out[i].t.z() == doctest::Approx(0.5));
        for (size_t i = 40; i < poses.size(); ++i) {
            CHECK(out[i].t.z() == doctest::Approx(0.43));
        }
    }
    SUBCASE("1 mm per step over 100 steps accumulates to 0.1 m") {
        DriftSpec spec;
        spec.per_step_bias = Vec3(0, 0, 0.001);
        const auto out = inject_drift(poses, spec, 3);
        CHECK(out.back().t.z() == doctest::Approx(0.5 + 0.1).epsilon(1e-9));
    }
}
