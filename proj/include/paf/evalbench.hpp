#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "paf/depth_camera.hpp"
#include "paf/policy.hpp"
#include "paf/rl_env.hpp"

namespace paf {

struct TrajectoryStep {
  QuadState state;        // after the control step
  ControlCommand command;
  RewardTerms terms;
  double reward_total = 0.0;
  double r_pa = 0.0;       // raw perception term, exp(-yaw error)
  double yaw_error = 0.0;  // |wrapped(yaw - direction to lookahead)|
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  DoneReason outcome = DoneReason::None;
  double flight_time = 0.0;  // s, time of the final step
};

// Deterministic closed-loop actor: maps the current environment (state,
// lookahead, observations) to a normalized action.
using ActorFn = std::function<Eigen::Vector4d(const Env&)>;

ActorFn make_teacher_actor(const PolicyHead& policy);
ActorFn make_student_actor(const nn::Network& encoder, const StudentPolicy& student,
                           const CameraIntrinsics& intrinsics);

struct EvalReport {
  int n_runs = 0;
  int successes = 0;
  double success_pct = 0.0;
  double flight_time_mean = 0.0;  // over successful runs only
  double flight_time_std = 0.0;
  double mean_yaw_error = 0.0;    // rad, over all steps of all runs
  std::vector<Trajectory> trajectories;
};

// n_runs uniform-start episodes with per-run seeds derived from seed.
// Identical (policy, world, seed) inputs reproduce the report bit-exactly.
EvalReport evaluate_policy(const ActorFn& actor, const World& world, const GuidingPath& path,
                           const EnvConfig& config, int n_runs, std::uint64_t seed,
                           int workers = 1);

std::string format_eval_report(const EvalReport& report, const std::string& label);

struct AblationCell {
  std::string reward_mode;  // "non_perception_aware" | "perception_aware"
  std::string policy_mode;  // "state_based" | "vision_based"
  EvalReport report;
};

struct AblationTable {
  std::vector<AblationCell> cells;  // 4 entries
};

// Runs the 2x2 {non-PA, PA} x {teacher, student} comparison with identical
// evaluation seeds across cells.
AblationTable ablation_perception(const PolicyHead& npa_teacher, const PolicyHead& pa_teacher,
                                  const nn::Network& npa_encoder, const StudentPolicy& npa_student,
                                  const nn::Network& pa_encoder, const StudentPolicy& pa_student,
                                  const CameraIntrinsics& intrinsics, const World& world,
                                  const GuidingPath& path, const EnvConfig& config, int n_runs,
                                  std::uint64_t seed, int workers = 1);

std::string format_ablation_table(const AblationTable& table);

struct LatencyReport {
  double pre_mean_ms = 0.0, pre_std_ms = 0.0, pre_pct = 0.0;
  double inf_mean_ms = 0.0, inf_std_ms = 0.0, inf_pct = 0.0;
  double total_ms = 0.0;
};

// Wall-clock per frame over pre-rendered depth images, single-threaded:
// pre-processing = depth normalization + encoder forward, NN inference =
// student MLP forward. The first `warmup` frames are excluded.
LatencyReport bench_latency(const nn::Network& encoder, const StudentPolicy& student,
                            const std::vector<DepthImage>& frames, int n_frames = 1000,
                            int warmup = 100);

std::string format_latency_report(const LatencyReport& report);

// CSV with the fixed header
// t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,thrust,wcx,wcy,wcz,r_total,r_pa
// one row per control step, f32-lossless fields.
void export_trajectory(const Trajectory& traj, std::ostream& os);
void export_trajectory(const Trajectory& traj, const std::filesystem::path& file);
Trajectory import_trajectory(std::istream& is);

}  // namespace paf
