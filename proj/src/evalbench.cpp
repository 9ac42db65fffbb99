#include "paf/evalbench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

ActorFn make_teacher_actor(const PolicyHead& policy) {
  return [&policy](const Env& env) { return policy.act_mean(env.observe_teacher()); };
}

ActorFn make_student_actor(const nn::Network& encoder, const StudentPolicy& student,
                           const CameraIntrinsics& intrinsics) {
  return [&encoder, &student, intrinsics](const Env& env) {
    const DepthImage img =
        render_depth(env.world(), env.state().p, env.state().q, intrinsics);
    const std::vector<float> embedding = encoder.forward(normalize_depth(img));
    return student.act(observe_student(embedding, env.state()));
  };
}

namespace {

double wrapped_yaw_error(const QuadState& state, const Vec3& gamma) {
  const double dx = gamma.x() - state.p.x();
  const double dy = gamma.y() - state.p.y();
  if (std::hypot(dx, dy) < 1e-6) return 0.0;
  return std::abs(std::remainder(state.yaw() - std::atan2(dy, dx), 2.0 * M_PI));
}

Trajectory run_episode(const ActorFn& actor, const World& world, const GuidingPath& path,
                       const EnvConfig& config, std::uint64_t seed) {
  Env env(world, path, config);
  env.reset(seed);
  Trajectory traj;
  while (!env.episode().done()) {
    const Eigen::Vector4d action = actor(env);
    const Env::StepResult res = env.step(action);
    TrajectoryStep step;
    step.state = env.state();
    step.command = env.last_command();
    step.terms = res.terms;
    step.yaw_error = wrapped_yaw_error(env.state(), env.lookahead());
    step.r_pa = perception_reward(env.state(), env.lookahead());
    step.reward_total = res.terms.total();
    traj.steps.push_back(step);
  }
  traj.outcome = env.episode().reason;
  traj.flight_time = env.state().t;
  return traj;
}

}  // namespace

EvalReport evaluate_policy(const ActorFn& actor, const World& world, const GuidingPath& path,
                           const EnvConfig& config, int n_runs, std::uint64_t seed,
                           int workers) {
  EvalReport report;
  report.n_runs = n_runs;
  report.trajectories.resize(n_runs);
  parallel_for(static_cast<std::size_t>(n_runs), workers,
               [&](std::size_t begin, std::size_t end, int) {
                 for (std::size_t run = begin; run < end; ++run) {
                   report.trajectories[run] =
                       run_episode(actor, world, path, config, derive_seed(seed, 0xE0AL + run));
                 }
               });

  double time_sum = 0.0;
  std::vector<double> times;
  double yaw_sum = 0.0;
  std::size_t yaw_count = 0;
  for (const auto& traj : report.trajectories) {
    if (traj.outcome == DoneReason::Goal) {
      ++report.successes;
      times.push_back(traj.flight_time);
      time_sum += traj.flight_time;
    }
    for (const auto& step : traj.steps) {
      yaw_sum += step.yaw_error;
      ++yaw_count;
    }
  }
  report.success_pct = 100.0 * report.successes / std::max(1, n_runs);
  if (!times.empty()) {
    report.flight_time_mean = time_sum / times.size();
    double ss = 0.0;
    for (double t : times) ss += (t - report.flight_time_mean) * (t - report.flight_time_mean);
    report.flight_time_std = times.size() > 1 ? std::sqrt(ss / (times.size() - 1)) : 0.0;
  }
  report.mean_yaw_error = yaw_count > 0 ? yaw_sum / yaw_count : 0.0;
  return report;
}

std::string format_eval_report(const EvalReport& r, const std::string& label) {
  std::ostringstream os;
  os << "policy: " << label << '\n';
  os << "runs: " << r.n_runs << '\n';
  os << "success_pct: " << fmt_fixed(r.success_pct, 1) << '\n';
  if (r.successes > 0) {
    os << "flight_time_s: " << fmt_fixed(r.flight_time_mean, 2) << " +- "
       << fmt_fixed(r.flight_time_std, 2) << '\n';
  } else {
    os << "flight_time_s: -\n";
  }
  os << "mean_yaw_error_rad: " << fmt_fixed(r.mean_yaw_error, 4) << '\n';
  return os.str();
}

AblationTable ablation_perception(const PolicyHead& npa_teacher, const PolicyHead& pa_teacher,
                                  const nn::Network& npa_encoder, const StudentPolicy& npa_student,
                                  const nn::Network& pa_encoder, const StudentPolicy& pa_student,
                                  const CameraIntrinsics& intrinsics, const World& world,
                                  const GuidingPath& path, const EnvConfig& config, int n_runs,
                                  std::uint64_t seed, int workers) {
  AblationTable table;
  const auto run = [&](const std::string& reward_mode, const std::string& policy_mode,
                       const ActorFn& actor) {
    // Identical seeds across cells: paired comparison.
    table.cells.push_back(
        {reward_mode, policy_mode, evaluate_policy(actor, world, path, config, n_runs, seed, workers)});
  };
  run("non_perception_aware", "state_based", make_teacher_actor(npa_teacher));
  run("non_perception_aware", "vision_based",
      make_student_actor(npa_encoder, npa_student, intrinsics));
  run("perception_aware", "state_based", make_teacher_actor(pa_teacher));
  run("perception_aware", "vision_based", make_student_actor(pa_encoder, pa_student, intrinsics));
  return table;
}

std::string format_ablation_table(const AblationTable& table) {
  std::ostringstream os;
  os << "reward_mode            policy_mode   success_pct  time_s          yaw_err_rad\n";
  for (const auto& cell : table.cells) {
    char time_buf[40];
    if (cell.report.successes > 0) {
      std::snprintf(time_buf, sizeof(time_buf), "%.2f +- %.2f", cell.report.flight_time_mean,
                    cell.report.flight_time_std);
    } else {
      std::snprintf(time_buf, sizeof(time_buf), "-");
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %-13s %-12.1f %-15s %.4f\n",
                  cell.reward_mode.c_str(), cell.policy_mode.c_str(), cell.report.success_pct,
                  time_buf, cell.report.mean_yaw_error);
    os << line;
  }
  return os.str();
}

LatencyReport bench_latency(const nn::Network& encoder, const StudentPolicy& student,
                            const std::vector<DepthImage>& frames, int n_frames, int warmup) {
  if (frames.empty()) throw std::invalid_argument("bench_latency: no frames");
  using Clock = std::chrono::steady_clock;
  QuadState probe_state;
  probe_state.v = Vec3(3.0, 0.5, -0.2);

  std::vector<double> pre_ms, inf_ms;
  pre_ms.reserve(n_frames);
  inf_ms.reserve(n_frames);
  for (int i = 0; i < n_frames + warmup; ++i) {
    const DepthImage& frame = frames[static_cast<std::size_t>(i) % frames.size()];

    const auto t0 = Clock::now();
    const std::vector<float> normalized = normalize_depth(frame);
    const std::vector<float> embedding = encoder.forward(normalized);
    const auto t1 = Clock::now();
    const std::vector<float> obs = observe_student(embedding, probe_state);
    const Eigen::Vector4d action = student.act(obs);
    const auto t2 = Clock::now();
    (void)action;

    if (i >= warmup) {
      pre_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      inf_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
  }
  const auto stats = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair<double, double>(mean, std::sqrt(ss / xs.size()));
  };
  LatencyReport r;
  std::tie(r.pre_mean_ms, r.pre_std_ms) = stats(pre_ms);
  std::tie(r.inf_mean_ms, r.inf_std_ms) = stats(inf_ms);
  r.total_ms = r.pre_mean_ms + r.inf_mean_ms;
  r.pre_pct = 100.0 * r.pre_mean_ms / r.total_ms;
  r.inf_pct = 100.0 * r.inf_mean_ms / r.total_ms;
  return r;
}

std::string format_latency_report(const LatencyReport& r) {
  std::ostringstream os;
  char line[160];
  os << "component       mean_ms  std_ms  pct\n";
  std::snprintf(line, sizeof(line), "pre-processing  %-8.2f %-7.2f %.1f\n", r.pre_mean_ms,
                r.pre_std_ms, r.pre_pct);
  os << line;
  std::snprintf(line, sizeof(line), "nn-inference    %-8.2f %-7.2f %.1f\n", r.inf_mean_ms,
                r.inf_std_ms, r.inf_pct);
  os << line;
  std::snprintf(line, sizeof(line), "total           %.2f\n", r.total_ms);
  os << line;
  return os.str();
}

namespace {
const char* kTrajHeader =
    "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,thrust,wcx,wcy,wcz,r_total,r_pa";
}

void export_trajectory(const Trajectory& traj, std::ostream& os) {
  if (traj.steps.empty()) throw std::invalid_argument("export_trajectory: empty trajectory");
  os << kTrajHeader << '\n';
  for (const auto& s : traj.steps) {
    const auto f = [&](double v) { return fmt_f32(static_cast<float>(v)); };
    os << f(s.state.t) << ',' << f(s.state.p.x()) << ',' << f(s.state.p.y()) << ','
       << f(s.state.p.z()) << ',' << f(s.state.v.x()) << ',' << f(s.state.v.y()) << ','
       << f(s.state.v.z()) << ',' << f(s.state.q.w()) << ',' << f(s.state.q.x()) << ','
       << f(s.state.q.y()) << ',' << f(s.state.q.z()) << ',' << f(s.state.omega.x()) << ','
       << f(s.state.omega.y()) << ',' << f(s.state.omega.z()) << ',' << f(s.command.thrust)
       << ',' << f(s.command.omega_cmd.x()) << ',' << f(s.command.omega_cmd.y()) << ','
       << f(s.command.omega_cmd.z()) << ',' << f(s.reward_total) << ',' << f(s.r_pa) << '\n';
  }
}

void export_trajectory(const Trajectory& traj, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write trajectory: " + file.string());
  export_trajectory(traj, os);
  if (!os) throw std::runtime_error("trajectory write failed: " + file.string());
}

Trajectory import_trajectory(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajHeader) {
    throw std::runtime_error("trajectory CSV: bad header");
  }
  Trajectory traj;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string field;
    while (std::getline(ls, field, ',')) {
      vals.push_back(static_cast<double>(std::stof(field)));
    }
    if (vals.size() != 20) throw std::runtime_error("trajectory CSV: bad row: " + line);
    TrajectoryStep s;
    s.state.t = vals[0];
    s.state.p = Vec3(vals[1], vals[2], vals[3]);
    s.state.v = Vec3(vals[4], vals[5], vals[6]);
    s.state.q = Quat(vals[7], vals[8], vals[9], vals[10]);
    s.state.omega = Vec3(vals[11], vals[12], vals[13]);
    s.command.thrust = vals[14];
    s.command.omega_cmd = Vec3(vals[15], vals[16], vals[17]);
    s.reward_total = vals[18];
    s.r_pa = vals[19];
    traj.steps.push_back(s);
  }
  if (!traj.steps.empty()) traj.flight_time = traj.steps.back().state.t;
  return traj;
}

}  // namespace paf
