#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "paf/envgen.hpp"
#include "paf/policy.hpp"
#include "paf/rl_env.hpp"

namespace paf {

struct PpoConfig {
  int num_envs = 16;
  int steps_per_env = 256;  // batch = num_envs * steps_per_env
  int epochs = 4;
  int minibatch = 256;
  double discount = 0.98;
  double gae_lambda = 0.95;
  double clip = 0.2;
  float lr = 3e-4f;
  double entropy_coef = 1e-3;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  bool normalize_advantages = true;
  float init_log_std = -0.5f;
  int iterations = 400;
  int eval_every = 10;          // curriculum-gating evaluation cadence
  int eval_runs = 20;
  double stop_success_pct = 0;  // early stop at full stage; 0 disables
  std::uint64_t seed = 1;
};

struct CurriculumConfig {
  double speed_cap_start = 3.0;
  double speed_mult = 1.5;
  double speed_uncap_at = 12.0;  // caps at or above this mean "no cap"
  double density_start = 0.5;
  double density_mult = 1.25;
  double advance_success_pct = 80.0;
};

// Flattened rollout for the update phase.
struct PpoBatch {
  int n = 0;
  int obs_dim = 0;
  std::vector<float> obs;         // n x obs_dim, unscaled
  std::vector<float> actions;     // n x 4
  std::vector<float> old_logp;    // n
  std::vector<float> advantages;  // n, unnormalized
  std::vector<float> returns;     // n
};

struct PpoStats {
  double pg_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  bool finite = true;
};

// Mean analytic gradients of the clipped surrogate + entropy bonus + value
// regression over batch rows idx. Gradient buffers must be zeroed by the
// caller; reductions are deterministic for a fixed worker count.
PpoStats ppo_minibatch_gradients(const PolicyHead& policy, const PpoBatch& batch,
                                 std::span<const std::uint32_t> idx, double clip,
                                 double entropy_coef, double value_coef,
                                 bool normalize_advantages, std::span<float> grad_mean,
                                 std::span<float> grad_log_std, std::span<float> grad_value,
                                 int workers);

struct IterationLog {
  int iteration = 0;
  int stage = 0;
  double speed_cap = 0.0;  // 0 = uncapped
  double density = 0.0;
  int episodes = 0;
  double mean_return = 0.0;
  double rollout_success_pct = 0.0;
  double eval_success_pct = -1.0;  // -1 when no gating eval ran
  double pg_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

void write_training_log_csv(const std::vector<IterationLog>& log, std::ostream& os);

struct TeacherTrainResult {
  PolicyHead policy;
  std::vector<IterationLog> log;
  bool reached_full_stage = false;
  double best_full_success_pct = 0.0;
  std::string warning;  // nonempty when the curriculum stalled or NaNs aborted training
};

// PPO under the stage curriculum (speed cap and obstacle density ramp).
// Returns the best checkpoint observed at the highest stage reached.
// Deterministic in configs and seed for a fixed worker count.
TeacherTrainResult train_teacher(EnvKind kind, std::uint64_t env_seed, double scale,
                                 const EnvConfig& env_template, const PpoConfig& ppo,
                                 const CurriculumConfig& curriculum, int workers,
                                 std::ostream* progress = nullptr);

}  // namespace paf
