#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "paf/dynamics.hpp"
#include "paf/planner.hpp"
#include "paf/world.hpp"

namespace paf {

struct RewardWeights {
  double k_p = 10.0;       // progress
  double k_s = 1.0;        // reached distance, emitted at termination
  double k_wp = 5.0;       // waypoint pass
  double r_T = -20.0;      // collision penalty (applied as-is on the fatal step)
  double k_omega = -0.01;  // body-rate magnitude penalty
  double k_pa = 0.5;       // perception alignment

  void validate() const;
};

enum class DoneReason { None, Goal, Collision, OutOfBounds, Timeout };
std::string to_string(DoneReason reason);

struct RewardTerms {
  double progress = 0.0;
  double reached = 0.0;
  double waypoint = 0.0;
  double collision = 0.0;
  double body_rate = 0.0;
  double perception = 0.0;
  double total() const {
    return progress + reached + waypoint + collision + body_rate + perception;
  }
};

struct EnvConfig {
  VehicleParams vehicle;
  RewardWeights reward;
  double dt = 0.02;
  double integrator_substep = 0.005;
  int max_steps = 500;
  double obs_clamp = 10.0;           // relative vectors clamped to +-obs_clamp per axis
  double speed_cap = 0.0;            // curriculum velocity limit; <= 0 disables
  double lookahead_step = 0.1;
  double progress_hysteresis = 0.5;
};

struct EpisodeState {
  QuadState quad;
  double progress = 0.0;      // hysteresis-projected arc length
  double max_progress = 0.0;  // episode maximum
  int waypoints_passed = 0;
  int steps = 0;
  DoneReason reason = DoneReason::None;

  bool done() const { return reason != DoneReason::None; }
};

inline constexpr int kTeacherObsDim = 24;

// Eq-style perception term: exp(-|wrapped(yaw - atan2 of gamma - p)|), in
// (0, 1]. A gamma horizontally coincident with p (within 1e-6 m) is neutral
// and returns 1.
double perception_reward(const QuadState& state, const Vec3& gamma);

// [z / max(|z|, eps); v; R(q) row-major] with no privileged information.
std::vector<float> observe_student(std::span<const float> embedding, const QuadState& state);

DoneReason check_termination(const EpisodeState& ep, const World& world,
                             double collision_radius, int max_steps);

// Per-step reward between two consecutive episode states. gamma is the
// lookahead point of `cur`.
RewardTerms stage_reward(const EpisodeState& prev, const EpisodeState& cur, const Vec3& gamma,
                         const RewardWeights& weights);
// Spec-facing overload that derives gamma from the path and world.
RewardTerms stage_reward(const EpisodeState& prev, const EpisodeState& cur,
                         const GuidingPath& path, const World& world,
                         const RewardWeights& weights, double collision_radius = 0.2);

// One episodic MDP over a shared immutable world and guiding path. Actions
// are normalized [-1,1]^4: thrust (hover-centered) and body rates.
class Env {
 public:
  Env(const World& world, const GuidingPath& path, EnvConfig config);

  // Uniform collision-free start in the start region, uniform yaw, hover
  // attitude, zero twist. Returns the initial teacher observation.
  std::vector<float> reset(std::uint64_t seed);

  struct StepResult {
    RewardTerms terms;
    double reward = 0.0;
    bool done = false;
    DoneReason reason = DoneReason::None;
  };
  StepResult step(const Eigen::Vector4d& action);

  ControlCommand action_to_command(const Eigen::Vector4d& action) const;
  std::vector<float> observe_teacher() const;

  const EpisodeState& episode() const { return ep_; }
  const QuadState& state() const { return ep_.quad; }
  const Vec3& lookahead() const { return gamma_; }
  double lookahead_s() const { return gamma_s_; }
  const ControlCommand& last_command() const { return last_cmd_; }
  const World& world() const { return *world_; }
  const GuidingPath& path() const { return *path_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  void refresh_lookahead();

  const World* world_;
  const GuidingPath* path_;
  EnvConfig cfg_;
  EpisodeState ep_;
  ProgressCursor cursor_;
  Vec3 gamma_ = Vec3::Zero();
  double gamma_s_ = 0.0;
  ControlCommand last_cmd_;
};

}  // namespace paf
