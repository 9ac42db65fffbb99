#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "paf/depth_camera.hpp"
#include "paf/policy.hpp"
#include "paf/rl_env.hpp"

namespace paf {

// Builds the student observation for the current environment state.
using StudentObsFn = std::function<std::vector<float>(const Env&)>;

// Depth render -> frozen encoder -> [normalized embedding; v; R].
StudentObsFn make_depth_student_obs(const nn::Network& encoder,
                                    const CameraIntrinsics& intrinsics);

struct DistillConfig {
  int rounds = 3;             // round 0 = teacher rollouts, later rounds student rollouts
  int episodes_per_round = 12;
  int epochs_per_round = 30;
  int minibatch = 256;
  float lr = 1e-3f;
  double val_fraction = 0.1;
  int heldout_episodes = 4;   // fresh student rollouts for the shift metric
  int final_eval_runs = 20;   // 0 skips the final success check
  std::uint64_t seed = 1;
};

struct DistillRoundLog {
  int round = 0;
  std::size_t dataset_size = 0;
  double train_mse = 0.0;    // last-epoch training action MSE
  double val_mse = 0.0;      // held-out split of the aggregated dataset
  double rollout_mse = 0.0;  // teacher-label MSE on fresh student rollouts
};

struct DistillResult {
  StudentPolicy student;
  std::vector<DistillRoundLog> log;
  double final_success_pct = -1.0;
};

// Dataset-aggregation imitation: every round the teacher labels all visited
// states; the student is refit on the union. Teacher and encoder parameters
// are never written.
DistillResult distill_student(const PolicyHead& teacher, const StudentObsFn& student_obs,
                              int student_obs_dim, const World& world, const GuidingPath& path,
                              const EnvConfig& config, const DistillConfig& distill, int workers,
                              const StudentPolicy* initial_student = nullptr,
                              std::ostream* progress = nullptr);

void write_distill_log_csv(const std::vector<DistillRoundLog>& log, std::ostream& os);

}  // namespace paf
