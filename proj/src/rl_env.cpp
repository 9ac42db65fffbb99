#include "paf/rl_env.hpp"

#include <cmath>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

void RewardWeights::validate() const {
  if (!(r_T < 0.0)) throw std::invalid_argument("reward: r_T must be negative");
  if (k_omega > 0.0) throw std::invalid_argument("reward: k_omega must be <= 0");
  if (k_p < 0.0 || k_s < 0.0 || k_wp < 0.0 || k_pa < 0.0) {
    throw std::invalid_argument("reward: k_p, k_s, k_wp, k_pa must be >= 0");
  }
}

std::string to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::None: return "none";
    case DoneReason::Goal: return "goal";
    case DoneReason::Collision: return "collision";
    case DoneReason::OutOfBounds: return "out_of_bounds";
    case DoneReason::Timeout: return "timeout";
  }
  return "?";
}

double perception_reward(const QuadState& state, const Vec3& gamma) {
  const double dx = gamma.x() - state.p.x();
  const double dy = gamma.y() - state.p.y();
  if (std::hypot(dx, dy) < 1e-6) return 1.0;  // neutral when gamma is overhead
  const double dir = std::atan2(dy, dx);
  const double delta = std::remainder(state.yaw() - dir, 2.0 * M_PI);
  return std::exp(-std::abs(delta));
}

std::vector<float> observe_student(std::span<const float> embedding, const QuadState& state) {
  std::vector<float> obs;
  obs.reserve(embedding.size() + 12);
  double norm2 = 0.0;
  for (float z : embedding) norm2 += static_cast<double>(z) * z;
  const double inv = 1.0 / std::max(std::sqrt(norm2), 1e-8);
  for (float z : embedding) obs.push_back(static_cast<float>(z * inv));
  for (int i = 0; i < 3; ++i) obs.push_back(static_cast<float>(state.v[i]));
  const Mat3 r = state.q.toRotationMatrix();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) obs.push_back(static_cast<float>(r(row, col)));
  }
  return obs;
}

DoneReason check_termination(const EpisodeState& ep, const World& world,
                             double collision_radius, int max_steps) {
  const Vec3& p = ep.quad.p;
  if (!world.bounds.contains(p)) return DoneReason::OutOfBounds;
  if (world.is_collision(p, collision_radius)) return DoneReason::Collision;
  if (ep.waypoints_passed == static_cast<int>(world.waypoints.size())) return DoneReason::Goal;
  if (ep.steps >= max_steps) return DoneReason::Timeout;
  return DoneReason::None;
}

RewardTerms stage_reward(const EpisodeState& prev, const EpisodeState& cur, const Vec3& gamma,
                         const RewardWeights& weights) {
  RewardTerms terms;
  terms.progress = weights.k_p * (cur.progress - prev.progress);
  terms.reached = cur.done() ? weights.k_s * cur.max_progress : 0.0;
  terms.waypoint = weights.k_wp * (cur.waypoints_passed - prev.waypoints_passed);
  terms.collision = cur.reason == DoneReason::Collision ? weights.r_T : 0.0;
  terms.body_rate = weights.k_omega * cur.quad.omega.norm();
  terms.perception = weights.k_pa * perception_reward(cur.quad, gamma);
  return terms;
}

RewardTerms stage_reward(const EpisodeState& prev, const EpisodeState& cur,
                         const GuidingPath& path, const World& world,
                         const RewardWeights& weights, double collision_radius) {
  const Vec3 p = cur.quad.p;
  Vec3 gamma;
  if (world.bounds.contains(p)) {
    gamma = lookahead_point(path, world, p, collision_radius, cur.progress,
                            /*sample_step=*/0.1)
                .first;
  } else {
    gamma = path.point_at(cur.progress);
  }
  return stage_reward(prev, cur, gamma, weights);
}

Env::Env(const World& world, const GuidingPath& path, EnvConfig config)
    : world_(&world), path_(&path), cfg_(std::move(config)),
      cursor_(cfg_.progress_hysteresis) {
  cfg_.reward.validate();
  world.validate();
}

std::vector<float> Env::reset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xE9150DE));
  const Aabb& region = world_->start_region;
  Vec3 p = region.center();
  bool placed = false;
  for (int tries = 0; tries < 1000; ++tries) {
    p = Vec3(uniform_real(rng, region.lo.x(), region.hi.x()),
             uniform_real(rng, region.lo.y(), region.hi.y()),
             uniform_real(rng, region.lo.z(), region.hi.z()));
    if (world_->clearance(p) >= cfg_.vehicle.collision_radius) {
      placed = true;
      break;
    }
  }
  if (!placed) throw std::runtime_error("reset: no collision-free start after 1000 tries");

  const double yaw = uniform_real(rng, -M_PI, M_PI);
  ep_ = EpisodeState{};
  ep_.quad.p = p;
  ep_.quad.q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  cursor_ = ProgressCursor(cfg_.progress_hysteresis);
  cursor_.reset(*path_, p);
  ep_.progress = cursor_.s();
  ep_.max_progress = cursor_.max_s();
  last_cmd_ = ControlCommand{};
  refresh_lookahead();
  return observe_teacher();
}

ControlCommand Env::action_to_command(const Eigen::Vector4d& action) const {
  const VehicleParams& veh = cfg_.vehicle;
  ControlCommand cmd;
  const double hover = veh.hover_thrust();
  // Zero action hovers; +-1 spans the full admissible thrust range.
  if (action[0] >= 0.0) {
    cmd.thrust = hover + action[0] * (veh.max_thrust - hover);
  } else {
    cmd.thrust = hover * (1.0 + action[0]);
  }
  cmd.omega_cmd = Vec3(action[1], action[2], action[3]) * veh.max_body_rate;
  return cmd;
}

void Env::refresh_lookahead() {
  const Vec3& p = ep_.quad.p;
  if (world_->bounds.contains(p)) {
    auto [gamma, s] = lookahead_point(*path_, *world_, p, cfg_.vehicle.collision_radius,
                                      ep_.progress, cfg_.lookahead_step);
    gamma_ = gamma;
    gamma_s_ = s;
  } else {
    gamma_ = path_->point_at(ep_.progress);
    gamma_s_ = ep_.progress;
  }
}

Env::StepResult Env::step(const Eigen::Vector4d& action) {
  if (ep_.done()) throw std::logic_error("Env::step called on a finished episode");
  const EpisodeState prev = ep_;

  last_cmd_ = clamp_command(action_to_command(action), cfg_.vehicle);
  ep_.quad = paf::step(ep_.quad, last_cmd_, cfg_.dt, cfg_.vehicle, cfg_.integrator_substep);
  if (cfg_.speed_cap > 0.0) {
    const double speed = ep_.quad.v.norm();
    if (speed > cfg_.speed_cap) ep_.quad.v *= cfg_.speed_cap / speed;
  }
  ep_.steps += 1;

  ep_.progress = cursor_.update(*path_, ep_.quad.p);
  ep_.max_progress = cursor_.max_s();

  const auto& wps = world_->waypoints;
  while (ep_.waypoints_passed < static_cast<int>(wps.size()) &&
         (ep_.quad.p - wps[ep_.waypoints_passed]).norm() <= world_->goal_tolerance) {
    ep_.waypoints_passed += 1;
  }

  ep_.reason = check_termination(ep_, *world_, cfg_.vehicle.collision_radius, cfg_.max_steps);
  refresh_lookahead();

  StepResult result;
  result.terms = stage_reward(prev, ep_, gamma_, cfg_.reward);
  result.reward = result.terms.total();
  result.done = ep_.done();
  result.reason = ep_.reason;
  return result;
}

std::vector<float> Env::observe_teacher() const {
  const QuadState& s = ep_.quad;
  const Mat3 r = s.q.toRotationMatrix();
  const Mat3 r_t = r.transpose();

  const auto& wps = world_->waypoints;
  const int next_wp = std::min(ep_.waypoints_passed, static_cast<int>(wps.size()) - 1);
  const Vec3 to_wp = r_t * (wps[next_wp] - s.p);
  const Vec3 to_gamma = r_t * (gamma_ - s.p);
  const Vec3 to_proj = r_t * (path_->point_at(ep_.progress) - s.p);

  std::vector<float> obs;
  obs.reserve(kTeacherObsDim);
  for (int i = 0; i < 3; ++i) obs.push_back(static_cast<float>(s.v[i]));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) obs.push_back(static_cast<float>(r(row, col)));
  }
  for (int i = 0; i < 3; ++i) obs.push_back(static_cast<float>(s.omega[i]));
  const double c = cfg_.obs_clamp;
  for (const Vec3* vec : {&to_wp, &to_gamma, &to_proj}) {
    for (int i = 0; i < 3; ++i) {
      obs.push_back(static_cast<float>(std::clamp((*vec)[i], -c, c)));
    }
  }
  return obs;
}

}  // namespace paf
