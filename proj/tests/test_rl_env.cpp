#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "paf/planner.hpp"
#include "paf/rl_env.hpp"

using namespace paf;

namespace {

struct Fixture {
  World world;
  Roadmap roadmap;
  GuidingPath path;

  explicit Fixture(double goal_x = 6.0) {
    world.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
    world.start_region = {Vec3(-8, -0.5, 1.5), Vec3(-7, 0.5, 2.5)};
    world.waypoints = {Vec3(goal_x, 0, 2)};
    roadmap = build_prm(world, 80, 6, 1);
    path = shortest_path(roadmap, world);
  }
};

// Body-frame transform via raw quaternion algebra, independent of Eigen's
// rotation machinery.
Vec3 rotate_into_body(const Quat& q, const Vec3& v) {
  const double cw = q.w(), cx = -q.x(), cy = -q.y(), cz = -q.z();  // conjugate
  // t = q_conj * (0, v)
  const double tw = -cx * v.x() - cy * v.y() - cz * v.z();
  const double tx = cw * v.x() + cy * v.z() - cz * v.y();
  const double ty = cw * v.y() + cz * v.x() - cx * v.z();
  const double tz = cw * v.z() + cx * v.y() - cy * v.x();
  // result = t * q
  return {tw * q.x() + tx * q.w() + ty * q.z() - tz * q.y(),
          tw * q.y() + ty * q.w() + tz * q.x() - tx * q.z(),
          tw * q.z() + tz * q.w() + tx * q.y() - ty * q.x()};
}

QuadState state_with_yaw(const Vec3& p, double yaw) {
  QuadState s;
  s.p = p;
  s.q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return s;
}

}  // namespace

TEST_CASE("perception reward evaluates the wrapped-yaw exponential") {
  const Vec3 gamma(5, 0, 2);
  CHECK(perception_reward(state_with_yaw(Vec3(0, 0, 2), 0.0), gamma) == doctest::Approx(1.0));
  CHECK(perception_reward(state_with_yaw(Vec3(0, 0, 2), M_PI / 2), gamma) ==
        doctest::Approx(std::exp(-M_PI / 2)).epsilon(1e-12));
  CHECK(perception_reward(state_with_yaw(Vec3(0, 0, 2), M_PI / 2), gamma) ==
        doctest::Approx(0.20788).epsilon(1e-4));
  // Wrap symmetry: +179 deg and -179 deg are two degrees apart, not 358.
  const double d179 = 179.0 * M_PI / 180.0;
  CHECK(perception_reward(state_with_yaw(Vec3(0, 0, 2), d179), gamma) ==
        doctest::Approx(perception_reward(state_with_yaw(Vec3(0, 0, 2), -d179), gamma)));
  // Horizontally coincident lookahead is neutral.
  CHECK(perception_reward(state_with_yaw(Vec3(5, 0, 1), 1.234), Vec3(5, 0, 4)) == 1.0);
  // Range: always in (0, 1].
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-M_PI, M_PI);
  for (int i = 0; i < 200; ++i) {
    const double r = perception_reward(state_with_yaw(Vec3(0, 0, 2), uni(rng)), gamma);
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("teacher observation layout and frames") {
  Fixture fx;
  Env env(fx.world, fx.path, EnvConfig{});
  env.reset(7);
  const std::vector<float> obs = env.observe_teacher();
  REQUIRE(obs.size() == kTeacherObsDim);

  SUBCASE("identity attitude gives an identity rotation block") {
    // Reset until yaw is whatever it is; rebuild the state by hand instead.
    QuadState s;  // identity everywhere
    const Mat3 r = s.q.toRotationMatrix();
    CHECK(r.isApprox(Mat3::Identity()));
  }
}

TEST_CASE("facing the lookahead yields a forward-only relative vector") {
  Fixture fx;
  EnvConfig cfg;
  // Degenerate start at the path start vertex.
  World w = fx.world;
  const Vec3 start = fx.path.vertices.front();
  w.start_region = {start, start};
  Env env(w, fx.path, cfg);
  env.reset(1);
  // The lookahead is the goal; face it by constructing the right yaw seed:
  // instead of hunting seeds, check the relation on the produced state.
  const std::vector<float> obs = env.observe_teacher();
  const Vec3 gamma = env.lookahead();
  const Vec3 rel_expected = rotate_into_body(env.state().q, gamma - env.state().p);
  CHECK(obs[18] == doctest::Approx(std::clamp(rel_expected.x(), -10.0, 10.0)).epsilon(1e-6));
  CHECK(obs[19] == doctest::Approx(std::clamp(rel_expected.y(), -10.0, 10.0)).epsilon(1e-6));
  CHECK(obs[20] == doctest::Approx(std::clamp(rel_expected.z(), -10.0, 10.0)).epsilon(1e-6));

  // A hand-built pose looking straight at the goal.
  const Vec3 to_goal = w.goal() - start;
  const double yaw = std::atan2(to_goal.y(), to_goal.x());
  const QuadState face = state_with_yaw(start, yaw);
  const Vec3 rel = rotate_into_body(face.q, w.goal() - start);
  CHECK(rel.y() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rel.x() == doctest::Approx(to_goal.head<2>().norm()).epsilon(1e-9));
}

TEST_CASE("teacher observation body-frame vectors match a quaternion oracle") {
  Fixture fx;
  Env env(fx.world, fx.path, EnvConfig{});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    env.reset(trial);
    // Random actions to decorrelate attitude from the start pose.
    for (int i = 0; i < 5; ++i) {
      if (env.episode().done()) break;
      env.step(Eigen::Vector4d(uni(rng) * 0.2, uni(rng), uni(rng), uni(rng)));
    }
    if (env.episode().done()) continue;
    const std::vector<float> obs = env.observe_teacher();
    const QuadState& s = env.state();
    for (int i = 0; i < 3; ++i) CHECK(obs[i] == doctest::Approx(s.v[i]).epsilon(1e-6));
    const Mat3 r = s.q.toRotationMatrix();
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        CHECK(obs[3 + 3 * row + col] == doctest::Approx(r(row, col)).epsilon(1e-6));
      }
    }
    for (int i = 0; i < 3; ++i) CHECK(obs[12 + i] == doctest::Approx(s.omega[i]).epsilon(1e-6));
    const Vec3 wp_rel = rotate_into_body(s.q, fx.world.waypoints[0] - s.p);
    const Vec3 gm_rel = rotate_into_body(s.q, env.lookahead() - s.p);
    const Vec3 pj_rel =
        rotate_into_body(s.q, fx.path.point_at(env.episode().progress) - s.p);
    for (int i = 0; i < 3; ++i) {
      CHECK(obs[15 + i] == doctest::Approx(std::clamp(wp_rel[i], -10.0, 10.0)).epsilon(1e-5));
      CHECK(obs[18 + i] == doctest::Approx(std::clamp(gm_rel[i], -10.0, 10.0)).epsilon(1e-5));
      CHECK(obs[21 + i] == doctest::Approx(std::clamp(pj_rel[i], -10.0, 10.0)).epsilon(1e-5));
    }
  }
}

TEST_CASE("student observation normalizes the embedding and appends state") {
  QuadState s;
  s.v = Vec3(1, 2, 3);

  std::vector<float> zero(64, 0.0f);
  const std::vector<float> obs0 = observe_student(zero, s);
  REQUIRE(obs0.size() == 64 + 12);
  for (int i = 0; i < 64; ++i) CHECK(obs0[i] == 0.0f);  // eps guard, no NaN

  std::vector<float> z(64, 0.0f);
  z[0] = 3.0f;
  z[1] = 4.0f;  // norm 5
  const std::vector<float> obs = observe_student(z, s);
  double n2 = 0.0;
  for (int i = 0; i < 64; ++i) n2 += obs[i] * obs[i];
  CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(obs[64] == 1.0f);
  CHECK(obs[65] == 2.0f);
  CHECK(obs[66] == 3.0f);
  CHECK(obs[67] == 1.0f);  // R(identity) row-major starts 1,0,0
}

TEST_CASE("stage reward isolates the perception term for a stationary state") {
  RewardWeights w;
  w.k_pa = 1.0;
  w.k_omega = -0.01;
  EpisodeState prev;
  prev.quad = state_with_yaw(Vec3(0, 0, 2), 0.0);
  prev.progress = 1.0;
  EpisodeState cur = prev;  // no progress, no events, omega = 0, not done
  const RewardTerms terms = stage_reward(prev, cur, Vec3(5, 0, 2), w);
  CHECK(terms.perception == doctest::Approx(1.0));
  CHECK(terms.progress == 0.0);
  CHECK(terms.reached == 0.0);
  CHECK(terms.waypoint == 0.0);
  CHECK(terms.collision == 0.0);
  CHECK(terms.body_rate == 0.0);
  CHECK(terms.total() == doctest::Approx(1.0));
}

TEST_CASE("progress component equals k_p times the projection advance") {
  RewardWeights w;
  w.k_p = 1.0;
  w.k_pa = 0.0;
  EpisodeState prev;
  prev.progress = 0.7;
  EpisodeState cur = prev;
  cur.progress = 1.0;
  const RewardTerms terms = stage_reward(prev, cur, Vec3(5, 0, 2), w);
  CHECK(terms.progress == doctest::Approx(0.3));
}

TEST_CASE("reward breakdown always sums to the total") {
  Fixture fx;
  Env env(fx.world, fx.path, EnvConfig{});
  env.reset(3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  while (!env.episode().done()) {
    const auto res = env.step(Eigen::Vector4d(0.3 * uni(rng), uni(rng), uni(rng), uni(rng)));
    const double sum = res.terms.progress + res.terms.reached + res.terms.waypoint +
                       res.terms.collision + res.terms.body_rate + res.terms.perception;
    CHECK(res.reward == sum);
  }
}

TEST_CASE("per-step progress terms telescope to the final minus initial projection") {
  Fixture fx;
  EnvConfig cfg;
  cfg.reward.k_pa = 0.0;
  Env env(fx.world, fx.path, cfg);
  env.reset(9);
  const double s0 = env.episode().progress;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double progress_sum = 0.0;
  while (!env.episode().done()) {
    const auto res = env.step(Eigen::Vector4d(0.4 * uni(rng), uni(rng), uni(rng), uni(rng)));
    progress_sum += res.terms.progress;
  }
  const double expected = cfg.reward.k_p * (env.episode().progress - s0);
  CHECK(progress_sum == doctest::Approx(expected).epsilon(1e-9).scale(1e-5));
}

TEST_CASE("with k_pa = 0 the stage reward is yaw-invariant") {
  RewardWeights w;
  w.k_pa = 0.0;
  EpisodeState prev;
  prev.quad = state_with_yaw(Vec3(1, 1, 2), 0.3);
  prev.quad.omega = Vec3(0.5, -0.2, 0.1);
  prev.progress = 2.0;
  EpisodeState cur = prev;
  cur.progress = 2.4;
  cur.waypoints_passed = 1;
  const RewardTerms base = stage_reward(prev, cur, Vec3(5, 0, 2), w);
  for (double yaw : {0.5, 1.7, -2.9}) {
    EpisodeState rotated = cur;
    rotated.quad.q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * cur.quad.q;
    const RewardTerms t = stage_reward(prev, rotated, Vec3(5, 0, 2), w);
    CHECK(t.total() == doctest::Approx(base.total()).epsilon(1e-12));
  }
  // With k_pa > 0 it is not invariant.
  w.k_pa = 0.5;
  const RewardTerms on = stage_reward(prev, cur, Vec3(5, 0, 2), w);
  EpisodeState rotated = cur;
  rotated.quad.q = Quat(Eigen::AngleAxisd(1.7, Vec3::UnitZ())) * cur.quad.q;
  CHECK(stage_reward(prev, rotated, Vec3(5, 0, 2), w).total() != doctest::Approx(on.total()));
}

TEST_CASE("termination reasons") {
  Fixture fx;
  World w = fx.world;
  w.obstacles.emplace_back(Sphere{Vec3(0, 5, 2), 1.0});

  EpisodeState ep;
  ep.quad.p = Vec3(0, 5, 2);  // obstacle center
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::Collision);

  ep.quad.p = Vec3(11, 0, 2);
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::OutOfBounds);

  ep.quad.p = w.goal();
  ep.waypoints_passed = 1;
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::Goal);

  ep.waypoints_passed = 0;
  ep.steps = 10;
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::None);

  ep.steps = 500;
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::Timeout);
}

TEST_CASE("goal requires every prior waypoint in order") {
  World w;
  w.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
  w.start_region = {Vec3(-8, -0.1, 1.9), Vec3(-7.8, 0.1, 2.1)};
  w.waypoints = {Vec3(0, 3, 2), Vec3(6, 0, 2)};
  const Roadmap rm = build_prm(w, 150, 8, 2);
  const GuidingPath path = shortest_path(rm, w);

  EpisodeState ep;
  ep.quad.p = w.waypoints.back();  // at the goal, middle waypoint skipped
  ep.waypoints_passed = 1;         // only one of two passed
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::None);
  ep.waypoints_passed = 2;
  CHECK(check_termination(ep, w, 0.2, 500) == DoneReason::Goal);
}

TEST_CASE("reset: degenerate region, determinism, and uniformity") {
  Fixture fx;
  World w = fx.world;
  const Vec3 point(-7.5, 0.25, 2.0);
  w.start_region = {point, point};
  Env env(w, fx.path, EnvConfig{});
  env.reset(4);
  CHECK(env.state().p == point);

  Env env2(fx.world, fx.path, EnvConfig{});
  env2.reset(42);
  const Vec3 p1 = env2.state().p;
  const Quat q1 = env2.state().q;
  env2.reset(42);
  CHECK(env2.state().p == p1);
  CHECK(env2.state().q.coeffs() == q1.coeffs());
  env2.reset(43);
  CHECK(env2.state().p != p1);

  // Chi-squared uniformity over the 8 octants of the start region, 1% level.
  Env env3(fx.world, fx.path, EnvConfig{});
  const Aabb& r = fx.world.start_region;
  const Vec3 mid = r.center();
  int counts[8] = {0};
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    env3.reset(1000 + i);
    const Vec3& p = env3.state().p;
    const int bin = (p.x() > mid.x()) + 2 * (p.y() > mid.y()) + 4 * (p.z() > mid.z());
    counts[bin] += 1;
  }
  double chi2 = 0.0;
  const double expected = n / 8.0;
  for (int b = 0; b < 8; ++b) {
    chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
  }
  CHECK(chi2 < 18.475);  // chi2(7 dof) at the 1% level

  // Initial velocity and rates are zero, attitude is pure yaw.
  CHECK(env3.state().v.norm() == 0.0);
  CHECK(env3.state().omega.norm() == 0.0);
  const Vec3 body_z = env3.state().q * Vec3::UnitZ();
  CHECK(body_z.z() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reward weight invariants are enforced") {
  RewardWeights w;
  w.r_T = 1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = RewardWeights{};
  w.k_omega = 0.5;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = RewardWeights{};
  w.k_p = -1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
