// Terrain reconstruction pipeline: data generation, training, inference,
// evaluation, ablation and micro-benchmarks around the sparse 4D engine.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trec/config.hpp"
#include "trec/icp.hpp"
#include "trec/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trec;

namespace {

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--spec", cfg.spec_name, "model/grid variant: paper or desk")
        ->check(CLI::IsMember({"paper", "desk"}))
        ->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "pruning threshold in [0, 1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "rng seed")->capture_default_str();
    cmd->set_config("--config", "", "flat key=value config file; flags override file values");
}

std::string csv_join(const std::vector<std::string>& cells) {
    std::string out;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ",";
        out += cells[i];
    }
    out += "\n";
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<Trajectory> load_dataset(const std::string& dir, DatasetInfo* info) {
    const auto files = list_trajectory_files(dir);
    TREC_CHECK(!files.empty(), "no .trec trajectory files found in " + dir);
    std::vector<Trajectory> dataset;
    for (const auto& f : files) dataset.push_back(read_trajectory_file(f, info));
    return dataset;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir, double drift_bias_z,
                 int drift_step_at, double drift_step_z) {
    if (cfg.trajectories == 0) {
        std::cout << "warning: --trajectories 0, nothing to generate\n";
        return 0;
    }
    fs::create_directories(out_dir);
    DataGenConfig gen = cfg.datagen_config();
    gen.drift.per_step_bias = Vec3(0, 0, drift_bias_z);
    if (drift_step_at >= 0) gen.drift.step_events.push_back({drift_step_at, Vec3(0, 0, drift_step_z)});

    DatasetInfo info;
    info.cell_size = gen.cell_size;
    info.grid_dim = static_cast<uint32_t>(gen.grid_dim);
    for (const auto& cam : sim::default_camera_rig()) info.camera_mounts.push_back(cam.mount);

    int64_t total_steps = 0;
    double vis_sum = 0.0;
    for (int i = 0; i < cfg.trajectories; ++i) {
        const GeneratedTrajectory traj =
            generate_trajectory(gen, mix_seed(cfg.seed, static_cast<uint64_t>(i)));
        char name[64];
        std::snprintf(name, sizeof(name), "traj_%04d.trec", i);
        write_trajectory_file(fs::path(out_dir) / name, traj.frames, info);
        total_steps += static_cast<int64_t>(traj.frames.size());
        vis_sum += traj.mean_visibility;
        std::cout << name << ": " << traj.frames.size() << " steps"
                  << (traj.truncated ? " (truncated)" : "")
                  << ", visibility " << fmt(traj.mean_visibility) << "\n";
    }
    std::cout << "wrote " << cfg.trajectories << " trajectories, " << total_steps
              << " steps, mean visibility "
              << fmt(vis_sum / static_cast<double>(cfg.trajectories)) << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_path,
              const std::string& log_path, const std::string& resume_path) {
    DatasetInfo info;
    const std::vector<Trajectory> dataset = load_dataset(data_dir, &info);
    const ModelSpec spec = cfg.model_spec();
    TREC_CHECK(info.grid_dim == static_cast<uint32_t>(spec.grid_dim) &&
                   std::abs(info.cell_size - spec.cell_size) < 1e-6f,
               "dataset grid does not match the selected spec variant");

    Model model(spec, cfg.seed);
    Trainer trainer(model, cfg.train_config());
    if (!resume_path.empty()) {
        load_model(resume_path, model, &trainer.optimizer());
        std::cout << "resumed from " << resume_path << " at optimizer step "
                  << trainer.optimizer().step_count() << "\n";
    }

    std::vector<TrainLogRow> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        trainer.run_epoch(dataset, epoch, &log);
        save_model(out_path, model, &trainer.optimizer());
        std::cout << "epoch " << epoch << ": mean loss " << fmt(trainer.last_epoch_loss())
                  << ", lr " << fmt(nn::lr_schedule(epoch, cfg.epochs, cfg.lr_initial, cfg.lr_final))
                  << "\n";
    }

    if (!log_path.empty()) {
        std::string csv = "epoch,step,bce,offset,total,lr\n";
        for (const TrainLogRow& r : log) {
            csv += csv_join({std::to_string(r.epoch), std::to_string(r.step), fmt(r.bce),
                             fmt(r.offset), fmt(r.total), fmt(r.lr)});
        }
        atomic_write_file(log_path, csv);
    }
    std::cout << "checkpoint written to " << out_path << "\n";
    return 0;
}

int cmd_infer(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir,
              const std::string& out_dir) {
    DatasetInfo info;
    const std::vector<Trajectory> dataset = load_dataset(data_dir, &info);
    const ModelSpec spec = peek_checkpoint_spec(ckpt);
    Model model(spec, 0);
    load_model(ckpt, model);
    fs::create_directories(out_dir);

    const auto files = list_trajectory_files(data_dir);
    const GridConfig grid = GridConfig::robot_centric(spec.grid_dim, spec.cell_size);
    for (size_t i = 0; i < dataset.size(); ++i) {
        const RolloutResult roll = rollout(model, dataset[i], cfg.alpha);
        EstimateFrames est;
        est.cell_size = spec.cell_size;
        est.grid_dim = static_cast<uint32_t>(spec.grid_dim);
        int64_t empty_frames = 0;
        for (size_t t = 0; t < dataset[i].size(); ++t) {
            est.true_poses.push_back(dataset[i][t].true_pose);
            est.odom_poses.push_back(dataset[i][t].odom_pose);
            PointCloud cloud = devoxelize(roll.estimates[t], grid);
            cloud.frame = Frame::robot;
            if (cloud.empty()) ++empty_frames;
            est.clouds.push_back(std::move(cloud));
        }
        const fs::path out = fs::path(out_dir) / (files[i].stem().string() + ".trce");
        write_estimate_file(out, est);
        std::cout << out.string() << ": " << est.clouds.size() << " frames";
        if (empty_frames > 0) std::cout << " (" << empty_frames << " empty, flagged)";
        std::cout << "\n";
    }
    return 0;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
    std::string csv = "frame,precision,recall,f1,mae_cm,tp,fp,fn,empty_pred,mae_valid\n";
    for (size_t t = 0; t < records.size(); ++t) {
        const MetricsRecord& r = records[t];
        csv += csv_join({std::to_string(t), fmt(r.precision), fmt(r.recall), fmt(r.f1),
                         r.mae_valid ? fmt(r.mae_cm) : "nan", std::to_string(r.tp),
                         std::to_string(r.fp), std::to_string(r.fn),
                         std::to_string(static_cast<int>(r.empty_pred)),
                         std::to_string(static_cast<int>(r.mae_valid))});
    }
    const MetricsSummary s = summarize(records);
    csv += csv_join({"mean", fmt(s.mean_precision), fmt(s.mean_recall), fmt(s.mean_f1),
                     fmt(s.mean_mae_cm), "-", "-", "-", "-", "-"});
    csv += csv_join({"macro", fmt(s.mean_precision), fmt(s.mean_recall), fmt(s.macro_f1),
                     fmt(s.mean_mae_cm), "-", "-", "-", "-", "-"});
    return csv;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt, const std::string& estimates_dir,
             const std::string& data_dir, const std::string& out_path, const std::string& frame) {
    DatasetInfo info;
    const std::vector<Trajectory> dataset = load_dataset(data_dir, &info);
    const bool use_true_pose = frame == "true";

    std::vector<MetricsRecord> records;
    if (!ckpt.empty()) {
        const ModelSpec spec = peek_checkpoint_spec(ckpt);
        Model model(spec, 0);
        load_model(ckpt, model);
        for (const Trajectory& traj : dataset) {
            const auto r = evaluate_rollout(model, traj, cfg.alpha, use_true_pose);
            records.insert(records.end(), r.begin(), r.end());
        }
    } else {
        TREC_CHECK(!estimates_dir.empty(), "eval needs --ckpt or --estimates");
        const auto files = list_trajectory_files(data_dir);
        for (size_t i = 0; i < files.size(); ++i) {
            const fs::path est_path =
                fs::path(estimates_dir) / (files[i].stem().string() + ".trce");
            const EstimateFrames est = read_estimate_file(est_path);
            TREC_CHECK(est.clouds.size() == dataset[i].size(),
                       "estimate/dataset frame count mismatch for " + est_path.string());
            for (size_t t = 0; t < est.clouds.size(); ++t) {
                const Pose& pose = use_true_pose ? dataset[i][t].true_pose
                                                 : dataset[i][t].odom_pose;
                PointCloud world = transform_points(pose, est.clouds[t]);
                world.frame = Frame::world;
                records.push_back(evaluate_estimate_cloud(world, dataset[i][t].ground_truth,
                                                          pose, static_cast<int>(est.grid_dim),
                                                          est.cell_size));
            }
        }
    }

    const std::string csv = metrics_csv(records);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        atomic_write_file(out_path, csv);
        const MetricsSummary s = summarize(records);
        std::cout << "frames " << s.frames << ": precision " << fmt(s.mean_precision)
                  << ", recall " << fmt(s.mean_recall) << ", mean F1 " << fmt(s.mean_f1)
                  << ", macro F1 " << fmt(s.macro_f1) << ", MAE " << fmt(s.mean_mae_cm)
                  << " cm\n";
    }
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir,
               const std::vector<double>& rates, const std::string& out_path) {
    DatasetInfo info;
    const std::vector<Trajectory> dataset = load_dataset(data_dir, &info);
    const ModelSpec spec = peek_checkpoint_spec(ckpt);
    Model model(spec, 0);
    load_model(ckpt, model);

    const auto rows = sparsity_ablation(model, dataset, rates, cfg.seed);
    std::string csv = "rate,mean_precision,mean_recall,macro_f1,mean_f1,mean_mae_cm,frames\n";
    for (const AblationRow& r : rows) {
        csv += csv_join({fmt(r.rate), fmt(r.metrics.mean_precision), fmt(r.metrics.mean_recall),
                         fmt(r.metrics.macro_f1), fmt(r.metrics.mean_f1),
                         fmt(r.metrics.mean_mae_cm), std::to_string(r.metrics.frames)});
    }
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        atomic_write_file(out_path, csv);
        std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
    }
    return 0;
}

int cmd_bench(const RunConfig& cfg, int points, int iters) {
    using clock = std::chrono::steady_clock;
    const ModelSpec spec = cfg.model_spec();
    Rng rng(cfg.seed);

    // synthetic stride-1 input: `points` cells across both temporal slices
    auto coords = make_coord_set();
    while (coords->size() < static_cast<size_t>(points)) {
        coords->insert(Coord4{static_cast<int32_t>(rng.uniform_index(spec.grid_dim)),
                              static_cast<int32_t>(rng.uniform_index(spec.grid_dim)),
                              static_cast<int32_t>(rng.uniform_index(spec.grid_dim)),
                              static_cast<int32_t>(rng.uniform_index(2))});
    }
    MatXf feats(coords->size(), 3);
    for (Eigen::Index i = 0; i < feats.size(); ++i) {
        feats.data()[i] = static_cast<float>(rng.uniform());
    }
    const SparseTensor input(coords, feats);

    auto time_ms = [&](auto&& fn) {
        const auto t0 = clock::now();
        for (int i = 0; i < iters; ++i) fn();
        const auto t1 = clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
    };

    const double t_map = time_ms([&] {
        build_kernel_map(*input.coords, *input.coords, spec.enc_normal_kernel, {1, 1, 1, 1});
    });

    Model model(spec, cfg.seed);
    const double t_fwd = time_ms([&] {
        ad::NoGradGuard no_grad;
        model.forward(input, cfg.alpha, false);
    });

    const KernelMap km =
        build_kernel_map(*input.coords, *input.coords, spec.enc_normal_kernel, {1, 1, 1, 1});
    std::cout << "spec " << cfg.spec_name << ", " << points << " active cells, " << iters
              << " iters\n";
    std::cout << "  kernel-map build (" << km.total_pairs() << " pairs): " << fmt(t_map)
              << " ms\n";
    std::cout << "  full forward pass: " << fmt(t_fwd) << " ms\n";
    std::cout << "  (reference budget for embedded deployment: ~70 ms per frame)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"terrain reconstruction from sparse depth measurements"};
    app.require_subcommand(1);

    RunConfig cfg;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic trajectory dataset");
    std::string gen_out = "data";
    double drift_bias_z = 0.0, drift_step_z = 0.0;
    int drift_step_at = -1;
    add_common_options(gen, cfg);
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();
    gen->add_option("--trajectories", cfg.trajectories, "number of trajectories")
        ->capture_default_str();
    gen->add_option("--steps", cfg.steps, "time steps per trajectory")->capture_default_str();
    gen->add_option("--gt-density", cfg.gt_density,
                    "ground-truth samples per m^2 (0 = per-spec default)");
    gen->add_option("--drift-bias-z", drift_bias_z, "odometry z bias per step, m");
    gen->add_option("--drift-step-at", drift_step_at, "step index of an odometry jump");
    gen->add_option("--drift-step-z", drift_step_z, "odometry z jump, m");

    // train
    auto* train = app.add_subcommand("train", "train the reconstruction model");
    std::string train_data = "data", train_out = "model.tckp", train_log = "loss.csv",
                train_resume;
    add_common_options(train, cfg);
    train->add_option("--data", train_data, "dataset directory")->capture_default_str();
    train->add_option("--out", train_out, "checkpoint path")->capture_default_str();
    train->add_option("--log", train_log, "loss log CSV path")->capture_default_str();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_option("--epochs", cfg.epochs)->capture_default_str();
    train->add_option("--batch", cfg.batch, "rollout sequences per optimizer step")
        ->capture_default_str();
    train->add_option("--rollout", cfg.rollout, "steps per training rollout")
        ->capture_default_str();
    train->add_option("--lr-initial", cfg.lr_initial)->capture_default_str();
    train->add_option("--lr-final", cfg.lr_final)->capture_default_str();
    train->add_flag("!--no-augment", cfg.augment, "disable measurement augmentation");
    train->add_flag("!--no-mirror", cfg.mirror, "disable trajectory mirroring");

    // infer
    auto* infer = app.add_subcommand("infer", "run auto-regressive inference");
    std::string infer_ckpt = "model.tckp", infer_data = "data", infer_out = "estimates";
    add_common_options(infer, cfg);
    infer->add_option("--ckpt", infer_ckpt)->capture_default_str();
    infer->add_option("--data", infer_data)->capture_default_str();
    infer->add_option("--out", infer_out, "estimate output directory")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate estimates against ground truth");
    std::string eval_ckpt, eval_estimates, eval_data = "data", eval_out, eval_frame = "true";
    add_common_options(eval, cfg);
    eval->add_option("--ckpt", eval_ckpt, "checkpoint to run inference with");
    eval->add_option("--estimates", eval_estimates, "directory of precomputed .trce estimates");
    eval->add_option("--data", eval_data)->capture_default_str();
    eval->add_option("--out", eval_out, "metrics CSV path (stdout when omitted)");
    eval->add_option("--frame", eval_frame, "pose used to map estimates to world: true|odom")
        ->check(CLI::IsMember({"true", "odom"}))
        ->capture_default_str();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "sparsity ablation over removal rates");
    std::string ablate_ckpt = "model.tckp", ablate_data = "data", ablate_out;
    std::vector<double> ablate_rates{0.0, 0.25, 0.5, 0.75, 0.9};
    add_common_options(ablate, cfg);
    ablate->add_option("--ckpt", ablate_ckpt)->capture_default_str();
    ablate->add_option("--data", ablate_data)->capture_default_str();
    ablate->add_option("--rates", ablate_rates, "measurement removal rates")
        ->delimiter(',')
        ->capture_default_str();
    ablate->add_option("--out", ablate_out, "CSV path (stdout when omitted)");

    // bench
    auto* bench = app.add_subcommand("bench", "micro-benchmarks of the sparse engine");
    int bench_points = 20000, bench_iters = 5;
    add_common_options(bench, cfg);
    bench->add_option("--points", bench_points, "active input cells")->capture_default_str();
    bench->add_option("--iters", bench_iters)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen_data(cfg, gen_out, drift_bias_z, drift_step_at, drift_step_z);
        }
        if (train->parsed()) return cmd_train(cfg, train_data, train_out, train_log, train_resume);
        if (infer->parsed()) return cmd_infer(cfg, infer_ckpt, infer_data, infer_out);
        if (eval->parsed()) {
            return cmd_eval(cfg, eval_ckpt, eval_estimates, eval_data, eval_out, eval_frame);
        }
        if (ablate->parsed()) return cmd_ablate(cfg, ablate_ckpt, ablate_data, ablate_rates, ablate_out);
        if (bench->parsed()) return cmd_bench(cfg, bench_points, bench_iters);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
