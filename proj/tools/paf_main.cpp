// Command-line entry point: one subcommand per pipeline stage, all driven by
// a single experiment config file. Artifacts land in a fresh run directory
// together with the resolved config that produced them.
#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "paf/autoencoder.hpp"
#include "paf/checkpoint.hpp"
#include "paf/config.hpp"
#include "paf/dataset.hpp"
#include "paf/distill.hpp"
#include "paf/evalbench.hpp"
#include "paf/ppo.hpp"

namespace fs = std::filesystem;
using namespace paf;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = default_workers();
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (key = value sections)");
  cmd->add_option("--out", args.out_dir, "output directory (default: <output.dir>/<run-id>)");
  cmd->add_option("--seed", args.seed, "override every stage seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--workers", args.workers, "worker threads (default: logical cores)");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    if (!fs::exists(args.config_path)) {
      throw ConfigError(args.config_path, "config file not found");
    }
    cfg = parse_config_file(args.config_path);
  }
  if (args.seed_set) cfg.override_seeds(args.seed);
  cfg.validate();
  return cfg;
}

fs::path make_run_dir(const ExperimentConfig& cfg, const CommonArgs& args,
                      const std::string& stage) {
  fs::path dir;
  if (!args.out_dir.empty()) {
    dir = args.out_dir;
  } else {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    localtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    dir = fs::path(cfg.out_dir) / (std::string(stamp) + "-" + stage);
    for (int k = 2; fs::exists(dir); ++k) {
      dir = fs::path(cfg.out_dir) / (std::string(stamp) + "-" + stage + "-" + std::to_string(k));
    }
  }
  fs::create_directories(dir);
  std::ofstream resolved(dir / "config.ini");
  write_resolved_config(cfg, resolved);
  return dir;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what, "required checkpoint path not given");
  if (!fs::exists(path)) throw ConfigError(path, what + " file not found");
}

Scenario scenario_from(const ExperimentConfig& cfg) {
  return make_scenario(cfg.kind(), cfg.env_seed, cfg.scale, cfg.density,
                       cfg.vehicle.collision_radius);
}

nn::Network load_encoder(const std::string& path) {
  nn::CheckpointBundle bundle = nn::load_checkpoint(fs::path(path));
  auto it = bundle.nets.find("encoder");
  if (it == bundle.nets.end()) {
    throw std::runtime_error(path + ": checkpoint has no 'encoder' entry");
  }
  return std::move(it->second);
}

int cmd_train_teacher(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const fs::path dir = make_run_dir(cfg, args, "train-teacher");
  const TeacherTrainResult result =
      train_teacher(cfg.kind(), cfg.env_seed, cfg.scale, cfg.env_config(), cfg.ppo,
                    cfg.curriculum, args.workers, &std::cerr);
  result.policy.save(dir / "teacher.ckpt");
  std::ofstream log(dir / "train_log.csv");
  write_training_log_csv(result.log, log);
  save_world(scenario_from(cfg).world, dir / "world.txt");
  if (!result.warning.empty()) std::cerr << "warning: " << result.warning << '\n';
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_collect_depth(const CommonArgs& args, const std::string& teacher_path) {
  const ExperimentConfig cfg = load_config(args);
  require_file(teacher_path, "teacher checkpoint");
  const fs::path dir = make_run_dir(cfg, args, "collect-depth");
  const PolicyHead teacher = PolicyHead::load(teacher_path);
  const Scenario sc = scenario_from(cfg);
  const DepthDataset ds =
      collect_depth_dataset(teacher, sc.world, sc.path, cfg.env_config(), cfg.camera,
                            cfg.collect_episodes, cfg.collect_seed, args.workers,
                            cfg.collect_val_fraction);
  save_dataset(ds, dir / "dataset");
  std::cerr << "collected " << ds.size() << " frames over " << cfg.collect_episodes
            << " episodes\n";
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_train_ae(const CommonArgs& args, const std::string& dataset_prefix) {
  const ExperimentConfig cfg = load_config(args);
  require_file(dataset_prefix + ".csv", "dataset index");
  require_file(dataset_prefix + ".depth", "dataset blobs");
  const fs::path dir = make_run_dir(cfg, args, "train-ae");
  const DepthDataset ds = load_dataset(dataset_prefix);
  const AutoencoderResult result =
      train_autoencoder(ds, cfg.autoencoder, args.workers, &std::cerr);
  nn::CheckpointBundle bundle;
  bundle.nets.emplace("encoder", result.encoder);
  bundle.nets.emplace("decoder", result.decoder);
  nn::save_checkpoint(bundle, dir / "ae.ckpt");
  std::ofstream log(dir / "ae_log.csv");
  write_ae_log_csv(result.log, log);
  std::cerr << "val mse " << result.initial_val_mse << " -> " << result.final_val_mse << '\n';
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_distill(const CommonArgs& args, const std::string& teacher_path,
                const std::string& ae_path) {
  const ExperimentConfig cfg = load_config(args);
  require_file(teacher_path, "teacher checkpoint");
  require_file(ae_path, "autoencoder checkpoint");
  const fs::path dir = make_run_dir(cfg, args, "distill");
  const PolicyHead teacher = PolicyHead::load(teacher_path);
  const nn::Network encoder = load_encoder(ae_path);
  const Scenario sc = scenario_from(cfg);
  const int obs_dim = encoder.output_shape().size() + 12;
  const DistillResult result =
      distill_student(teacher, make_depth_student_obs(encoder, cfg.camera), obs_dim, sc.world,
                      sc.path, cfg.env_config(), cfg.distill, args.workers, nullptr, &std::cerr);
  result.student.save(dir / "student.ckpt");
  std::ofstream log(dir / "distill_log.csv");
  write_distill_log_csv(result.log, log);
  std::cerr << "student success " << result.final_success_pct << "%\n";
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& mode, const std::string& teacher_path,
             const std::string& student_path, const std::string& ae_path) {
  const ExperimentConfig cfg = load_config(args);
  const Scenario sc = scenario_from(cfg);
  const EnvConfig env_cfg = cfg.env_config();

  // Keep whichever networks the mode needs alive for the actor's lifetime.
  std::unique_ptr<PolicyHead> teacher;
  std::unique_ptr<nn::Network> encoder;
  std::unique_ptr<StudentPolicy> student;
  ActorFn actor;
  if (mode == "teacher") {
    require_file(teacher_path, "teacher checkpoint");
    teacher = std::make_unique<PolicyHead>(PolicyHead::load(teacher_path));
    actor = make_teacher_actor(*teacher);
  } else if (mode == "student") {
    require_file(student_path, "student checkpoint");
    require_file(ae_path, "autoencoder checkpoint");
    student = std::make_unique<StudentPolicy>(StudentPolicy::load(student_path));
    encoder = std::make_unique<nn::Network>(load_encoder(ae_path));
    actor = make_student_actor(*encoder, *student, cfg.camera);
  } else {
    throw ConfigError("--mode", "must be 'teacher' or 'student'");
  }
  const fs::path dir = make_run_dir(cfg, args, "eval");
  const EvalReport report = evaluate_policy(actor, sc.world, sc.path, env_cfg, cfg.eval_runs,
                                            cfg.eval_seed, args.workers);
  std::ofstream report_file(dir / "eval_report.txt");
  report_file << format_eval_report(report, mode);
  std::ofstream summary(dir / "eval_summary.csv");
  summary << "run,outcome,flight_time_s,steps\n";
  const fs::path traj_dir = dir / "trajectories";
  fs::create_directories(traj_dir);
  for (std::size_t i = 0; i < report.trajectories.size(); ++i) {
    const Trajectory& traj = report.trajectories[i];
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03zu.csv", i);
    export_trajectory(traj, traj_dir / name);
    summary << i << ',' << to_string(traj.outcome) << ','
            << fmt_f32(static_cast<float>(traj.flight_time)) << ',' << traj.steps.size() << '\n';
  }
  std::cout << format_eval_report(report, mode);
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& npa_teacher_path,
               const std::string& npa_student_path, const std::string& npa_ae_path,
               const std::string& pa_teacher_path, const std::string& pa_student_path,
               const std::string& pa_ae_path) {
  const ExperimentConfig cfg = load_config(args);
  require_file(npa_teacher_path, "non-perception-aware teacher checkpoint");
  require_file(npa_student_path, "non-perception-aware student checkpoint");
  require_file(npa_ae_path, "non-perception-aware autoencoder checkpoint");
  require_file(pa_teacher_path, "perception-aware teacher checkpoint");
  require_file(pa_student_path, "perception-aware student checkpoint");
  require_file(pa_ae_path, "perception-aware autoencoder checkpoint");
  const fs::path dir = make_run_dir(cfg, args, "ablate");
  const PolicyHead npa_teacher = PolicyHead::load(npa_teacher_path);
  const PolicyHead pa_teacher = PolicyHead::load(pa_teacher_path);
  const StudentPolicy npa_student = StudentPolicy::load(npa_student_path);
  const StudentPolicy pa_student = StudentPolicy::load(pa_student_path);
  const nn::Network npa_encoder = load_encoder(npa_ae_path);
  const nn::Network pa_encoder = load_encoder(pa_ae_path);
  const Scenario sc = scenario_from(cfg);
  const AblationTable table = ablation_perception(
      npa_teacher, pa_teacher, npa_encoder, npa_student, pa_encoder, pa_student, cfg.camera,
      sc.world, sc.path, cfg.env_config(), cfg.eval_runs, cfg.eval_seed, args.workers);
  const std::string text = format_ablation_table(table);
  std::ofstream out(dir / "ablation.txt");
  out << text;
  std::cout << text;
  return 0;
}

int cmd_bench_latency(const CommonArgs& args, const std::string& student_path,
                      const std::string& ae_path) {
  const ExperimentConfig cfg = load_config(args);
  require_file(student_path, "student checkpoint");
  require_file(ae_path, "autoencoder checkpoint");
  const fs::path dir = make_run_dir(cfg, args, "bench-latency");
  const StudentPolicy student = StudentPolicy::load(student_path);
  const nn::Network encoder = load_encoder(ae_path);
  const Scenario sc = scenario_from(cfg);
  // Pre-rendered frames from poses along the guiding path; rendering is
  // simulation overhead and stays outside the timed pipeline.
  std::vector<DepthImage> frames;
  const int n_poses = 32;
  for (int i = 0; i < n_poses; ++i) {
    const double s = sc.path.total_length() * i / n_poses;
    const Vec3 p = sc.path.point_at(s);
    const Vec3 ahead = sc.path.point_at(std::min(sc.path.total_length(), s + 0.5));
    const double yaw = std::atan2(ahead.y() - p.y(), ahead.x() - p.x());
    frames.push_back(
        render_depth(sc.world, p, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), cfg.camera));
  }
  const LatencyReport report =
      bench_latency(encoder, student, frames, cfg.latency_frames, cfg.latency_warmup);
  const std::string text = format_latency_report(report);
  std::ofstream out(dir / "latency.txt");
  out << text;
  std::cout << text;
  return 0;
}

int cmd_render_env(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const fs::path dir = make_run_dir(cfg, args, "render-env");
  const Scenario sc = scenario_from(cfg);
  save_world(sc.world, dir / "world.txt");
  const int n_poses = 8;
  for (int i = 0; i < n_poses; ++i) {
    const double s = sc.path.total_length() * i / n_poses;
    const Vec3 p = sc.path.point_at(s);
    const Vec3 ahead = sc.path.point_at(std::min(sc.path.total_length(), s + 0.5));
    const double yaw = std::atan2(ahead.y() - p.y(), ahead.x() - p.x());
    const DepthImage img = render_depth(sc.world, p, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())),
                                        cfg.camera, args.workers);
    char name[32];
    std::snprintf(name, sizeof(name), "depth_%03d.pgm", i);
    write_pgm16(img, dir / name);
  }
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_export_path(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const fs::path dir = make_run_dir(cfg, args, "export-path");
  const Scenario sc = scenario_from(cfg);
  // Guiding path in the trajectory format: arc length as the time column,
  // unit tangents as velocity, yaw aligned with the tangent.
  Trajectory traj;
  for (std::size_t i = 0; i < sc.path.vertices.size(); ++i) {
    TrajectoryStep step;
    step.state.p = sc.path.vertices[i];
    step.state.t = sc.path.arc_length[i];
    const std::size_t j = i + 1 < sc.path.vertices.size() ? i + 1 : i;
    Vec3 tangent = j == i ? sc.path.vertices[i] - sc.path.vertices[i - 1]
                          : sc.path.vertices[j] - sc.path.vertices[i];
    if (tangent.norm() > 0) tangent.normalize();
    step.state.v = tangent;
    step.state.q = Quat(Eigen::AngleAxisd(std::atan2(tangent.y(), tangent.x()), Vec3::UnitZ()));
    step.command.thrust = cfg.vehicle.hover_thrust();
    traj.steps.push_back(step);
  }
  export_trajectory(traj, dir / "path.csv");
  std::cout << (dir / "path.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perception-aware minimum-time flight: training and evaluation pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string teacher_path, student_path, ae_path, dataset_prefix, mode = "teacher";
  std::string npa_teacher, npa_student, npa_ae, pa_teacher, pa_student, pa_ae;

  CLI::App* train = app.add_subcommand("train-teacher", "train the state-based policy with PPO");
  add_common(train, args);

  CLI::App* collect =
      app.add_subcommand("collect-depth", "roll out the teacher, record depth frames");
  add_common(collect, args);
  collect->add_option("--teacher", teacher_path, "teacher checkpoint")->required();

  CLI::App* ae = app.add_subcommand("train-ae", "train the depth autoencoder on a dataset");
  add_common(ae, args);
  ae->add_option("--dataset", dataset_prefix, "dataset prefix (expects .csv and .depth)")
      ->required();

  CLI::App* distill =
      app.add_subcommand("distill", "distill the teacher into the vision-based student");
  add_common(distill, args);
  distill->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
  distill->add_option("--ae", ae_path, "autoencoder checkpoint")->required();

  CLI::App* eval = app.add_subcommand("eval", "closed-loop evaluation over uniform starts");
  add_common(eval, args);
  eval->add_option("--mode", mode, "teacher | student");
  eval->add_option("--teacher", teacher_path, "teacher checkpoint");
  eval->add_option("--student", student_path, "student checkpoint");
  eval->add_option("--ae", ae_path, "autoencoder checkpoint (student mode)");

  CLI::App* ablate = app.add_subcommand("ablate", "2x2 perception-aware ablation");
  add_common(ablate, args);
  ablate->add_option("--npa-teacher", npa_teacher, "k_pa = 0 teacher")->required();
  ablate->add_option("--npa-student", npa_student, "k_pa = 0 student")->required();
  ablate->add_option("--npa-ae", npa_ae, "k_pa = 0 autoencoder")->required();
  ablate->add_option("--pa-teacher", pa_teacher, "perception-aware teacher")->required();
  ablate->add_option("--pa-student", pa_student, "perception-aware student")->required();
  ablate->add_option("--pa-ae", pa_ae, "perception-aware autoencoder")->required();

  CLI::App* latency = app.add_subcommand("bench-latency", "per-frame processing latency");
  add_common(latency, args);
  latency->add_option("--student", student_path, "student checkpoint")->required();
  latency->add_option("--ae", ae_path, "autoencoder checkpoint")->required();

  CLI::App* render =
      app.add_subcommand("render-env", "write the world file and sample depth images");
  add_common(render, args);

  CLI::App* export_path =
      app.add_subcommand("export-path", "write the guiding path as trajectory CSV");
  add_common(export_path, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train_teacher(args);
    if (collect->parsed()) return cmd_collect_depth(args, teacher_path);
    if (ae->parsed()) return cmd_train_ae(args, dataset_prefix);
    if (distill->parsed()) return cmd_distill(args, teacher_path, ae_path);
    if (eval->parsed()) return cmd_eval(args, mode, teacher_path, student_path, ae_path);
    if (ablate->parsed()) {
      return cmd_ablate(args, npa_teacher, npa_student, npa_ae, pa_teacher, pa_student, pa_ae);
    }
    if (latency->parsed()) return cmd_bench_latency(args, student_path, ae_path);
    if (render->parsed()) return cmd_render_env(args);
    if (export_path->parsed()) return cmd_export_path(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
