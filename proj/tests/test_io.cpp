#include <doctest.h>

#include <fstream>

#include "trec/dataset.hpp"
#include "trec/checkpoint_io.hpp"
#include "trec/pipeline.hpp"

using namespace trec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "trec_io_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Trajectory small_trajectory(Rng& rng, int steps) {
    Trajectory traj(static_cast<size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        auto& f = traj[static_cast<size_t>(t)];
        f.true_pose = Pose::planar(0.1 * t, 0.0, 0.5, 0.05 * t);
        f.odom_pose = f.true_pose;
        f.measurement.frame = Frame::robot;
        f.ground_truth.frame = Frame::world;
        for (int i = 0; i < 20; ++i) {
            f.measurement.points.emplace_back(static_cast<float>(rng.uniform(-1, 1)),
                                              static_cast<float>(rng.uniform(-1, 1)),
                                              static_cast<float>(rng.uniform(-1, 1)));
            f.ground_truth.points.emplace_back(static_cast<float>(rng.uniform(-1, 1)),
                                               static_cast<float>(rng.uniform(-1, 1)), 0.f);
        }
    }
    return traj;
}

}  // namespace

TEST_CASE("trajectory file round trip preserves content byte-exactly") {
    Rng rng(3);
    const Trajectory traj = small_trajectory(rng, 5);
    DatasetInfo info;
    info.cell_size = 0.1f;
    info.grid_dim = 32;
    for (const auto& cam : sim::default_camera_rig()) info.camera_mounts.push_back(cam.mount);

    const fs::path path = temp_dir() / "traj_roundtrip.trec";
    write_trajectory_file(path, traj, info);

    DatasetInfo info2;
    const Trajectory back = read_trajectory_file(path, &info2);
    REQUIRE(back.size() == traj.size());
    CHECK(info2.cell_size == info.cell_size);
    CHECK(info2.grid_dim == info.grid_dim);
    REQUIRE(info2.camera_mounts.size() == 4);
    for (size_t t = 0; t < traj.size(); ++t) {
        CHECK(back[t].measurement.points == traj[t].measurement.points);
        CHECK(back[t].ground_truth.points == traj[t].ground_truth.points);
        CHECK(back[t].true_pose.t.cast<float>() == traj[t].true_pose.t.cast<float>());
    }

    // writing the same content twice is byte-identical
    const fs::path path2 = temp_dir() / "traj_roundtrip2.trec";
    write_trajectory_file(path2, traj, info);
    CHECK(slurp_bytes(path) == slurp_bytes(path2));
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("trajectory file header starts with the TREC magic") {
    Rng rng(5);
    const fs::path path = temp_dir() / "magic.trec";
    write_trajectory_file(path, small_trajectory(rng, 1), DatasetInfo{});
    const std::string bytes = slurp_bytes(path);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.substr(0, 4) == "TREC");
    CHECK(bytes[4] == 1);  // u32 version, little-endian
    fs::remove(path);
}

TEST_CASE("corrupt trajectory files name the file and offset") {
    Rng rng(7);
    const fs::path path = temp_dir() / "corrupt.trec";
    write_trajectory_file(path, small_trajectory(rng, 3), DatasetInfo{});
    std::string bytes = slurp_bytes(path);

    SUBCASE("truncation") {
        bytes.resize(bytes.size() / 2);
        const fs::path bad = temp_dir() / "truncated.trec";
        atomic_write_file(bad, bytes);
        try {
            read_trajectory_file(bad);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            const std::string what = e.what();
            CHECK(what.find("truncated.trec") != std::string::npos);
            CHECK(what.find("byte") != std::string::npos);
        }
        fs::remove(bad);
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        const fs::path bad = temp_dir() / "badmagic.trec";
        atomic_write_file(bad, bytes);
        CHECK_THROWS_AS(read_trajectory_file(bad), IoError);
        fs::remove(bad);
    }
    fs::remove(path);
}

TEST_CASE("atomic write leaves no temporary behind") {
    const fs::path path = temp_dir() / "atomic.bin";
    atomic_write_file(path, "payload");
    CHECK(fs::exists(path));
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
    CHECK(slurp_bytes(path) == "payload");
    fs::remove(path);
}

TEST_CASE("estimate file round trip") {
    EstimateFrames est;
    est.cell_size = 0.1f;
    est.grid_dim = 32;
    Rng rng(9);
    for (int t = 0; t < 3; ++t) {
        est.true_poses.push_back(Pose::planar(t * 0.1, 0, 0.5, 0));
        est.odom_poses.push_back(est.true_poses.back());
        PointCloud c;
        c.frame = Frame::robot;
        for (int i = 0; i < 10; ++i) {
            c.points.emplace_back(static_cast<float>(rng.uniform(-1, 1)), 0.f, 0.f);
        }
        est.clouds.push_back(std::move(c));
    }
    const fs::path path = temp_dir() / "est.trce";
    write_estimate_file(path, est);
    const EstimateFrames back = read_estimate_file(path);
    REQUIRE(back.clouds.size() == 3);
    for (size_t t = 0; t < 3; ++t) CHECK(back.clouds[t].points == est.clouds[t].points);
    fs::remove(path);
}

TEST_CASE("checkpoint tensor container rejects corruption via the content hash") {
    std::vector<CheckpointTensor> tensors(1);
    tensors[0].name = "weights";
    tensors[0].dims = {2, 3};
    tensors[0].data = {1.f, 2.f, 3.f, 4.f, 5.f, 6.f};
    const fs::path path = temp_dir() / "hash.tckp";
    write_checkpoint_tensors(path, tensors);

    const auto back = read_checkpoint_tensors(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].name == "weights");
    CHECK(back[0].data == tensors[0].data);

    std::string bytes = slurp_bytes(path);
    CHECK(bytes.substr(0, 4) == "TCKP");
    bytes[20] ^= 0x5A;  // flip a payload byte
    const fs::path bad = temp_dir() / "hash_bad.tckp";
    atomic_write_file(bad, bytes);
    CHECK_THROWS_AS(read_checkpoint_tensors(bad), IoError);
    fs::remove(path);
    fs::remove(bad);
}

TEST_CASE("generated datasets are byte-identical for a fixed seed") {
    DataGenConfig cfg;
    cfg.grid_dim = 32;
    cfg.cell_size = 0.1f;
    cfg.steps = 4;
    cfg.gt_density = 200.0;
    cfg.scene.num_boxes = 1;
    cfg.scene.num_poles = 0;
    cfg.scene.num_corridors = 0;

    DatasetInfo info;
    info.cell_size = cfg.cell_size;
    info.grid_dim = 32;

    const GeneratedTrajectory a = generate_trajectory(cfg, 77);
    const GeneratedTrajectory b = generate_trajectory(cfg, 77);
    const fs::path pa = temp_dir() / "gen_a.trec";
    const fs::path pb = temp_dir() / "gen_b.trec";
    write_trajectory_file(pa, a.frames, info);
    write_trajectory_file(pb, b.frames, info);
    CHECK(slurp_bytes(pa) == slurp_bytes(pb));
    CHECK(a.mean_visibility == b.mean_visibility);
    CHECK(a.mean_visibility > 0.0);
    CHECK(a.mean_visibility < 1.0);
    fs::remove(pa);
    fs::remove(pb);
}
