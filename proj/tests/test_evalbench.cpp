#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "paf/autoencoder.hpp"
#include "paf/evalbench.hpp"

using namespace paf;

namespace {

struct Fixture {
  World world;
  GuidingPath path;
  Fixture() {
    world.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
    world.start_region = {Vec3(-8, -0.5, 1.5), Vec3(-7, 0.5, 2.5)};
    world.waypoints = {Vec3(6, 0, 2)};
    world.obstacles.emplace_back(CylinderZ{{0.0, 2.0}, 0.8, 0.0, 5.0});
    const Roadmap rm = build_prm(world, 150, 8, 1);
    path = shortest_path(rm, world);
  }
};

std::string export_to_string(const Trajectory& traj) {
  std::ostringstream os;
  export_trajectory(traj, os);
  return os.str();
}

}  // namespace

TEST_CASE("a zero-thrust policy never succeeds and reports no flight time") {
  Fixture fx;
  const ActorFn drop = [](const Env&) { return Eigen::Vector4d(-1.0, 0, 0, 0); };
  const EvalReport report = evaluate_policy(drop, fx.world, fx.path, EnvConfig{}, 20, 5);
  CHECK(report.n_runs == 20);
  CHECK(report.successes == 0);
  CHECK(report.success_pct == 0.0);
  CHECK(report.flight_time_mean == 0.0);
  const std::string text = format_eval_report(report, "drop");
  CHECK(text.find("flight_time_s: -") != std::string::npos);
}

TEST_CASE("evaluation reports are bit-identical under a fixed seed") {
  Fixture fx;
  PolicyHead teacher = PolicyHead::make_teacher(4);
  const EvalReport a =
      evaluate_policy(make_teacher_actor(teacher), fx.world, fx.path, EnvConfig{}, 5, 9);
  const EvalReport b =
      evaluate_policy(make_teacher_actor(teacher), fx.world, fx.path, EnvConfig{}, 5, 9);
  CHECK(a.success_pct == b.success_pct);
  CHECK(a.mean_yaw_error == b.mean_yaw_error);
  REQUIRE(a.trajectories.size() == b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    CHECK(export_to_string(a.trajectories[i]) == export_to_string(b.trajectories[i]));
  }
  const EvalReport c =
      evaluate_policy(make_teacher_actor(teacher), fx.world, fx.path, EnvConfig{}, 5, 10);
  CHECK(export_to_string(a.trajectories[0]) != export_to_string(c.trajectories[0]));
}

TEST_CASE("trajectory CSV: header, row count, and byte round trip") {
  Trajectory traj;
  TrajectoryStep s;
  s.state.p = Vec3(0.125, -2.5, 1.0);
  s.state.v = Vec3(1, 2, 3);
  s.state.t = 0.02;
  s.command.thrust = 5.2966;
  s.command.omega_cmd = Vec3(0.1, -0.2, 0.3);
  s.reward_total = 0.73;
  s.r_pa = 0.9;
  traj.steps.push_back(s);
  traj.outcome = DoneReason::Timeout;

  const std::string text = export_to_string(traj);
  std::istringstream is(text);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,thrust,wcx,wcy,wcz,r_total,r_pa");
  int rows = 0;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 1);  // one step -> header plus one row

  std::istringstream parse_in(text);
  const Trajectory back = import_trajectory(parse_in);
  CHECK(export_to_string(back) == text);

  Trajectory empty;
  std::ostringstream sink;
  CHECK_THROWS_AS(export_trajectory(empty, sink), std::invalid_argument);
  CHECK_THROWS(export_trajectory(traj, std::filesystem::path("/nonexistent_dir/x.csv")));
}

TEST_CASE("exported r_pa recomputes from the exported states and the path") {
  Fixture fx;
  PolicyHead teacher = PolicyHead::make_teacher(4);
  EnvConfig cfg;
  cfg.max_steps = 120;
  const EvalReport report =
      evaluate_policy(make_teacher_actor(teacher), fx.world, fx.path, cfg, 3, 2);
  for (const auto& traj : report.trajectories) {
    const std::string text = export_to_string(traj);
    std::istringstream is(text);
    const Trajectory parsed = import_trajectory(is);
    ProgressCursor cursor(0.5);
    REQUIRE(!parsed.steps.empty());
    cursor.reset(fx.path, parsed.steps.front().state.p);
    for (const auto& step : parsed.steps) {
      const double s = cursor.update(fx.path, step.state.p);
      Vec3 gamma;
      if (fx.world.bounds.contains(step.state.p)) {
        gamma = lookahead_point(fx.path, fx.world, step.state.p, 0.2, s, 0.1).first;
      } else {
        gamma = fx.path.point_at(s);
      }
      const double recomputed = perception_reward(step.state, gamma);
      CHECK(std::abs(recomputed - step.r_pa) < 1e-5);
    }
  }
}

TEST_CASE("latency report: percentages sum to 100 and total is the stage sum") {
  CameraIntrinsics intr;
  intr.width = 32;
  intr.height = 24;
  nn::Network encoder = make_depth_encoder(intr, 16, 1);
  StudentPolicy student = StudentPolicy::make(16 + 12, 2);

  World w;
  w.bounds = {Vec3(-20, -20, -20), Vec3(20, 20, 20)};
  w.start_region = {Vec3(0, 0, 0), Vec3(0, 0, 0)};
  w.waypoints = {Vec3(5, 0, 0)};
  w.obstacles.emplace_back(Sphere{Vec3(6, 0, 0), 1.5});
  std::vector<DepthImage> frames;
  for (int i = 0; i < 4; ++i) {
    frames.push_back(render_depth(w, Vec3(0, 0, 0.1 * i), Quat::Identity(), intr));
  }
  const LatencyReport report = bench_latency(encoder, student, frames, 60, 10);
  CHECK(std::abs(report.pre_pct + report.inf_pct - 100.0) < 0.1);
  CHECK(report.total_ms ==
        doctest::Approx(report.pre_mean_ms + report.inf_mean_ms).epsilon(1e-12));
  CHECK(report.total_ms > 0.0);
  const std::string text = format_latency_report(report);
  CHECK(text.find("pre-processing") != std::string::npos);
  CHECK(text.find("nn-inference") != std::string::npos);
}

TEST_CASE("successful flights respect the kinematic lower bound on time") {
  // Start inside reach of the goal ball so even a crude policy succeeds.
  World w;
  w.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
  const Vec3 goal(0, 0, 2);
  w.waypoints = {goal};
  const Vec3 start = goal + Vec3(-0.8, 0, 0);
  w.start_region = {start, start};
  const Roadmap rm = build_prm(w, 40, 5, 3);
  const GuidingPath path = shortest_path(rm, w);
  const ActorFn forward = [](const Env& env) {
    // Crude proportional commands toward the lookahead.
    const std::vector<float> obs = env.observe_teacher();
    return Eigen::Vector4d(0.05, 0.0, -0.4 * obs[20], 0.5 * std::atan2(obs[19], obs[18]));
  };
  EnvConfig cfg;
  const EvalReport report = evaluate_policy(forward, w, path, cfg, 5, 11);
  const VehicleParams& veh = cfg.vehicle;
  const double a_max = veh.max_thrust / veh.mass + veh.gravity;
  for (const auto& traj : report.trajectories) {
    if (traj.outcome != DoneReason::Goal) continue;
    const Vec3 p0 = Vec3(start);
    const double d = std::max(0.0, (goal - p0).norm() - w.goal_tolerance);
    CHECK(traj.flight_time >= std::sqrt(2.0 * d / a_max) - 1e-9);
  }
}

TEST_CASE("ablation table carries the four cells with shared seeds") {
  Fixture fx;
  PolicyHead t1 = PolicyHead::make_teacher(1);
  PolicyHead t2 = PolicyHead::make_teacher(2);
  CameraIntrinsics intr;
  intr.width = 32;
  intr.height = 24;
  nn::Network enc = make_depth_encoder(intr, 8, 3);
  StudentPolicy s1 = StudentPolicy::make(8 + 12, 4);
  StudentPolicy s2 = StudentPolicy::make(8 + 12, 5);
  EnvConfig cfg;
  cfg.max_steps = 40;
  const AblationTable table =
      ablation_perception(t1, t2, enc, s1, enc, s2, intr, fx.world, fx.path, cfg, 2, 3);
  REQUIRE(table.cells.size() == 4);
  CHECK(table.cells[0].reward_mode == "non_perception_aware");
  CHECK(table.cells[0].policy_mode == "state_based");
  CHECK(table.cells[3].reward_mode == "perception_aware");
  CHECK(table.cells[3].policy_mode == "vision_based");
  const std::string text = format_ablation_table(table);
  CHECK(text.find("perception_aware") != std::string::npos);
  CHECK(text.find("vision_based") != std::string::npos);
}
