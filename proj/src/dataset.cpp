#include "trec/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "trec/check.hpp"
#include "trec/pipeline.hpp"

namespace trec {

namespace {

class Writer {
public:
    void u32(uint32_t v) { raw(&v, 4); }
    void u16(uint16_t v) { raw(&v, 2); }
    void u8(uint8_t v) { raw(&v, 1); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void pose(const Pose& p) {
        f32(static_cast<float>(p.t.x()));
        f32(static_cast<float>(p.t.y()));
        f32(static_cast<float>(p.t.z()));
        f32(static_cast<float>(p.q.x()));
        f32(static_cast<float>(p.q.y()));
        f32(static_cast<float>(p.q.z()));
        f32(static_cast<float>(p.q.w()));
    }
    void cloud(const PointCloud& c) {
        u32(static_cast<uint32_t>(c.points.size()));
        for (const Vec3f& p : c.points) {
            f32(p.x());
            f32(p.y());
            f32(p.z());
        }
    }
    void raw(const void* p, size_t n) { bytes.append(static_cast<const char*>(p), n); }
    std::string bytes;
};

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    uint32_t u32() { return get<uint32_t>(); }
    uint16_t u16() { return get<uint16_t>(); }
    uint8_t u8() { return get<uint8_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    float f32() { return get<float>(); }

    Pose pose() {
        const float tx = f32(), ty = f32(), tz = f32();
        const float qx = f32(), qy = f32(), qz = f32(), qw = f32();
        return Pose(Vec3(tx, ty, tz), Quat(qw, qx, qy, qz));
    }

    PointCloud cloud(Frame frame) {
        const uint32_t n = u32();
        need(static_cast<uint64_t>(n) * 12, "point payload");
        PointCloud c;
        c.frame = frame;
        c.points.reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
            const float x = f32(), y = f32(), z = f32();
            c.points.emplace_back(x, y, z);
        }
        return c;
    }

    std::string str(size_t n) {
        need(n, "string payload");
        std::string s = data_.substr(offset_, n);
        offset_ += n;
        return s;
    }

    uint64_t offset() const { return offset_; }
    bool exhausted() const { return offset_ == data_.size(); }
    const std::string& path() const { return path_; }

    void need(uint64_t n, const char* what) {
        if (offset_ + n > data_.size()) throw IoError(path_, offset_, std::string("truncated ") + what);
    }

private:
    template <class T>
    T get() {
        need(sizeof(T), "field");
        T v;
        std::memcpy(&v, data_.data() + offset_, sizeof(T));
        offset_ += sizeof(T);
        return v;
    }

    std::string data_;
    std::string path_;
    uint64_t offset_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), 0, "cannot open file");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

constexpr uint32_t kTrajVersion = 1;
constexpr uint32_t kEstimateVersion = 1;

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp.string(), 0, "cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError(tmp.string(), 0, "short write");
    }
    std::filesystem::rename(tmp, path);
}

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& traj,
                           const DatasetInfo& info) {
    Writer w;
    w.raw("TREC", 4);
    w.u32(kTrajVersion);
    w.f32(info.cell_size);
    w.u32(info.grid_dim);
    w.u32(static_cast<uint32_t>(traj.size()));
    w.u32(static_cast<uint32_t>(info.camera_mounts.size()));
    for (const Pose& m : info.camera_mounts) w.pose(m);
    for (const FrameData& f : traj) {
        w.pose(f.true_pose);
        w.pose(f.odom_pose);
        w.cloud(f.measurement);
        w.cloud(f.ground_truth);
    }
    atomic_write_file(path, w.bytes);
}

Trajectory read_trajectory_file(const std::filesystem::path& path, DatasetInfo* info) {
    Reader r(slurp(path), path.string());
    if (r.str(4) != "TREC") throw IoError(path.string(), 0, "bad magic, expected TREC");
    const uint32_t version = r.u32();
    if (version != kTrajVersion) {
        throw IoError(path.string(), 4, "unsupported version " + std::to_string(version));
    }
    DatasetInfo local;
    local.cell_size = r.f32();
    local.grid_dim = r.u32();
    const uint32_t num_frames = r.u32();
    const uint32_t num_cameras = r.u32();
    for (uint32_t i = 0; i < num_cameras; ++i) local.camera_mounts.push_back(r.pose());

    Trajectory traj;
    traj.reserve(num_frames);
    for (uint32_t i = 0; i < num_frames; ++i) {
        FrameData f;
        f.true_pose = r.pose();
        f.odom_pose = r.pose();
        f.measurement = r.cloud(Frame::robot);
        f.ground_truth = r.cloud(Frame::world);
        traj.push_back(std::move(f));
    }
    if (!r.exhausted()) throw IoError(path.string(), r.offset(), "trailing bytes");
    if (info) *info = std::move(local);
    return traj;
}

std::vector<std::filesystem::path> list_trajectory_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::exists(dir)) return files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".trec") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

void write_estimate_file(const std::filesystem::path& path, const EstimateFrames& est) {
    TREC_CHECK(est.true_poses.size() == est.clouds.size() &&
                   est.odom_poses.size() == est.clouds.size(),
               "estimate frames must have one pose pair per cloud");
    Writer w;
    w.raw("TRCE", 4);
    w.u32(kEstimateVersion);
    w.f32(est.cell_size);
    w.u32(est.grid_dim);
    w.u32(static_cast<uint32_t>(est.clouds.size()));
    for (size_t i = 0; i < est.clouds.size(); ++i) {
        w.pose(est.true_poses[i]);
        w.pose(est.odom_poses[i]);
        w.cloud(est.clouds[i]);
    }
    atomic_write_file(path, w.bytes);
}

EstimateFrames read_estimate_file(const std::filesystem::path& path) {
    Reader r(slurp(path), path.string());
    if (r.str(4) != "TRCE") throw IoError(path.string(), 0, "bad magic, expected TRCE");
    const uint32_t version = r.u32();
    if (version != kEstimateVersion) {
        throw IoError(path.string(), 4, "unsupported version " + std::to_string(version));
    }
    EstimateFrames est;
    est.cell_size = r.f32();
    est.grid_dim = r.u32();
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        est.true_poses.push_back(r.pose());
        est.odom_poses.push_back(r.pose());
        est.clouds.push_back(r.cloud(Frame::robot));
    }
    if (!r.exhausted()) throw IoError(path.string(), r.offset(), "trailing bytes");
    return est;
}

GeneratedTrajectory generate_trajectory(const DataGenConfig& cfg, uint64_t seed) {
    const sim::Scene scene = sim::generate_scene(cfg.scene, mix_seed(seed, 0));
    const sim::TrajectorySample walk =
        sim::sample_trajectory(scene, mix_seed(seed, 1), cfg.steps, cfg.walk);
    const std::vector<Pose> odom = sim::inject_drift(walk.poses, cfg.drift, mix_seed(seed, 2));
    const std::vector<sim::CameraModel> rig = sim::default_camera_rig();

    const float grid_extent = static_cast<float>(cfg.grid_dim) * cfg.cell_size;
    const float gt_extent = grid_extent * static_cast<float>(cfg.gt_margin_scale);
    const GridConfig robot_cfg = GridConfig::robot_centric(cfg.grid_dim, cfg.cell_size);

    GeneratedTrajectory out;
    out.truncated = walk.truncated;
    double vis_sum = 0.0;
    for (size_t t = 0; t < walk.poses.size(); ++t) {
        FrameData f;
        f.true_pose = walk.poses[t];
        f.odom_pose = odom[t];
        f.measurement = sim::render_measurement(scene, f.true_pose, rig);
        f.ground_truth = sim::sample_ground_truth(scene, f.true_pose.t, gt_extent,
                                                  cfg.gt_density, mix_seed(seed, 1000 + t));
        vis_sum += visibility_fraction(f.measurement, f.ground_truth, f.true_pose, robot_cfg);
        out.frames.push_back(std::move(f));
    }
    if (!out.frames.empty()) out.mean_visibility = vis_sum / static_cast<double>(out.frames.size());
    return out;
}

}  // namespace trec
