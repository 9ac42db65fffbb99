#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "paf/autoencoder.hpp"
#include "paf/dataset.hpp"
#include "paf/distill.hpp"
#include "paf/envgen.hpp"
#include "paf/gae.hpp"
#include "paf/ppo.hpp"

using namespace paf;

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;

struct Fixture {
  World world;
  GuidingPath path;
  explicit Fixture() {
    world.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
    world.start_region = {Vec3(-8, -0.5, 1.5), Vec3(-7, 0.5, 2.5)};
    world.waypoints = {Vec3(6, 0, 2)};
    const Roadmap rm = build_prm(world, 80, 6, 1);
    path = shortest_path(rm, world);
  }
};

}  // namespace

TEST_CASE("GAE with lambda = 0 is the one-step TD residual") {
  const std::vector<float> rewards{1.0f, -0.5f, 2.0f, 0.25f};
  const std::vector<float> values{0.5f, 1.0f, -1.0f, 0.75f, 2.0f};
  const std::vector<std::uint8_t> dones{0, 0, 0, 0};
  std::vector<float> adv(4), ret(4);
  compute_gae(rewards, values, dones, 0.9, 0.0, adv, ret);
  for (int t = 0; t < 4; ++t) {
    const float expected = rewards[t] + 0.9f * values[t + 1] - values[t];
    CHECK(adv[t] == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("GAE with lambda = 1 and zero values is discounted reward-to-go") {
  const std::vector<float> rewards{1.0f, 1.0f, 1.0f, 1.0f, 1.0f};
  const std::vector<float> values{0, 0, 0, 0, 0, 0};
  const std::vector<std::uint8_t> dones{0, 0, 1, 0, 0};  // episode boundary after t=2
  std::vector<float> adv(5), ret(5);
  const double g = 0.95;
  compute_gae(rewards, values, dones, g, 1.0, adv, ret);
  CHECK(adv[2] == doctest::Approx(1.0));
  CHECK(adv[1] == doctest::Approx(1.0 + g));
  CHECK(adv[0] == doctest::Approx(1.0 + g + g * g));
  CHECK(adv[4] == doctest::Approx(1.0));  // truncated tail bootstraps V=0
  CHECK(adv[3] == doctest::Approx(1.0 + g));
}

TEST_CASE("GAE matches the O(T^2) direct-summation oracle") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 20;
    std::vector<float> rewards(T), values(T + 1);
    std::vector<std::uint8_t> dones(T, 0);
    for (auto& r : rewards) r = static_cast<float>(2.0 * uni(rng));
    for (auto& v : values) v = static_cast<float>(uni(rng));
    for (auto& d : dones) d = uni(rng) > 0.7 ? 1 : 0;
    std::vector<float> adv(T), ret(T), adv_ref, ret_ref;
    compute_gae(rewards, values, dones, 0.98, 0.95, adv, ret);
    oracles::gae_direct(rewards, values, dones, 0.98, 0.95, adv_ref, ret_ref);
    for (std::size_t t = 0; t < T; ++t) {
      CHECK(std::abs(adv[t] - adv_ref[t]) < 1e-6);
      CHECK(std::abs(ret[t] - ret_ref[t]) < 1e-6);
    }
  }
}

TEST_CASE("surrogate gradient equals the vanilla policy gradient at ratio one") {
  PolicyHead policy = PolicyHead::make_teacher(3);
  std::fill(policy.obs_scale.begin(), policy.obs_scale.end(), 1.0f);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  PpoBatch batch;
  batch.n = 6;
  batch.obs_dim = policy.obs_dim();
  for (int s = 0; s < batch.n; ++s) {
    std::vector<float> obs(batch.obs_dim);
    for (float& v : obs) v = static_cast<float>(0.5 * uni(rng));
    Eigen::Vector4d a;
    for (int j = 0; j < 4; ++j) a[j] = 0.3 * uni(rng);
    batch.obs.insert(batch.obs.end(), obs.begin(), obs.end());
    for (int j = 0; j < 4; ++j) batch.actions.push_back(static_cast<float>(a[j]));
    batch.old_logp.push_back(static_cast<float>(policy.log_prob(obs, a)));  // ratio = 1
    batch.advantages.push_back(static_cast<float>(uni(rng)));
    batch.returns.push_back(0.0f);
  }
  std::vector<std::uint32_t> idx{0, 1, 2, 3, 4, 5};
  std::vector<float> g_mean(policy.mean.param_count(), 0.0f);
  std::vector<float> g_ls(4, 0.0f);
  std::vector<float> g_val(policy.value.param_count(), 0.0f);
  ppo_minibatch_gradients(policy, batch, idx, 0.2, /*entropy=*/0.0, /*value=*/0.0,
                          /*normalize=*/false, g_mean, g_ls, g_val, 1);
  for (float g : g_val) CHECK(g == 0.0f);  // value_coef 0 isolates the policy path

  // Finite differences of the vanilla policy-gradient loss
  // L = -mean(A * log pi(a|s)) over the mean-network parameters.
  const auto vanilla_loss = [&](const std::vector<double>& params,
                                const std::vector<float>& log_std) {
    double loss = 0.0;
    for (int s = 0; s < batch.n; ++s) {
      std::vector<double> obs(batch.obs.begin() + s * batch.obs_dim,
                              batch.obs.begin() + (s + 1) * batch.obs_dim);
      const std::vector<double> raw = oracles::naive_forward_f64(policy.mean, params, obs);
      double logp = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double mu = std::tanh(raw[j]);
        const double sigma = std::exp(static_cast<double>(log_std[j]));
        const double z = (batch.actions[s * 4 + j] - mu) / sigma;
        logp += -0.5 * z * z - log_std[j] - kLogSqrt2Pi;
      }
      loss += -batch.advantages[s] * logp;
    }
    return loss / batch.n;
  };
  std::vector<double> params(policy.mean.params().begin(), policy.mean.params().end());
  const double h = 1e-3;
  double worst = 0.0;
  std::mt19937_64 pick(17);
  for (int probe = 0; probe < 60; ++probe) {  // spot-check a parameter subset
    const std::size_t i = pick() % params.size();
    const double keep = params[i];
    params[i] = keep + h;
    const double lp = vanilla_loss(params, policy.log_std);
    params[i] = keep - h;
    const double lm = vanilla_loss(params, policy.log_std);
    params[i] = keep;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(g_mean[i] - fd) / std::max(std::abs(g_mean[i]) + std::abs(fd), 1e-5);
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-3);

  // log-std entries via finite differences as well.
  for (int j = 0; j < 4; ++j) {
    std::vector<float> ls = policy.log_std;
    ls[j] += static_cast<float>(h);
    const double lp = vanilla_loss(params, ls);
    ls[j] -= static_cast<float>(2 * h);
    const double lm = vanilla_loss(params, ls);
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(std::abs(g_ls[j] - fd) < 1e-3);
  }
}

TEST_CASE("clipped samples contribute zero gradient in the improving direction") {
  PolicyHead policy = PolicyHead::make_teacher(11);
  std::fill(policy.obs_scale.begin(), policy.obs_scale.end(), 1.0f);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<float> obs(policy.obs_dim());
  for (float& v : obs) v = static_cast<float>(0.5 * uni(rng));
  Eigen::Vector4d a;
  for (int j = 0; j < 4; ++j) a[j] = 0.2 * uni(rng);
  const double logp = policy.log_prob(obs, a);

  const auto run_case = [&](double ratio, float advantage) {
    PpoBatch batch;
    batch.n = 1;
    batch.obs_dim = policy.obs_dim();
    batch.obs.assign(obs.begin(), obs.end());
    for (int j = 0; j < 4; ++j) batch.actions.push_back(static_cast<float>(a[j]));
    batch.old_logp.push_back(static_cast<float>(logp - std::log(ratio)));
    batch.advantages.push_back(advantage);
    batch.returns.push_back(0.0f);
    std::vector<std::uint32_t> idx{0};
    std::vector<float> g_mean(policy.mean.param_count(), 0.0f);
    std::vector<float> g_ls(4, 0.0f);
    std::vector<float> g_val(policy.value.param_count(), 0.0f);
    ppo_minibatch_gradients(policy, batch, idx, 0.2, 0.0, 0.0, false, g_mean, g_ls, g_val, 1);
    double norm = 0.0;
    for (float g : g_mean) norm += std::abs(g);
    for (float g : g_ls) norm += std::abs(g);
    return norm;
  };
  CHECK(run_case(1.3, 1.0f) == 0.0);    // ratio above 1+eps, positive advantage
  CHECK(run_case(0.7, -1.0f) == 0.0);   // ratio below 1-eps, negative advantage
  CHECK(run_case(1.3, -1.0f) > 0.0);    // worsening direction still pulls back
  CHECK(run_case(1.0, 1.0f) > 0.0);     // unclipped
}

TEST_CASE("zero learning rate leaves parameters unchanged after an iteration") {
  EnvConfig env_cfg;
  PpoConfig ppo;
  ppo.num_envs = 2;
  ppo.steps_per_env = 32;
  ppo.minibatch = 32;
  ppo.epochs = 2;
  ppo.iterations = 1;
  ppo.eval_every = 0;
  ppo.lr = 0.0f;
  ppo.seed = 21;
  CurriculumConfig curriculum;
  curriculum.density_start = 0.0;
  curriculum.density_mult = 1.0;
  const TeacherTrainResult result =
      train_teacher(EnvKind::Columns, 3, 20.0, env_cfg, ppo, curriculum, 1);
  const PolicyHead fresh = PolicyHead::make_teacher(ppo.seed, ppo.init_log_std);
  CHECK(std::equal(result.policy.mean.params().begin(), result.policy.mean.params().end(),
                   fresh.mean.params().begin()));
  CHECK(std::equal(result.policy.value.params().begin(), result.policy.value.params().end(),
                   fresh.value.params().begin()));
  CHECK(result.policy.log_std == fresh.log_std);
}

TEST_CASE("training is deterministic for a fixed seed and worker count") {
  EnvConfig env_cfg;
  PpoConfig ppo;
  ppo.num_envs = 2;
  ppo.steps_per_env = 16;
  ppo.minibatch = 16;
  ppo.epochs = 1;
  ppo.iterations = 2;
  ppo.eval_every = 0;
  ppo.seed = 33;
  CurriculumConfig curriculum;
  curriculum.density_start = 0.0;
  curriculum.density_mult = 1.0;
  const TeacherTrainResult a =
      train_teacher(EnvKind::Columns, 3, 20.0, env_cfg, ppo, curriculum, 1);
  const TeacherTrainResult b =
      train_teacher(EnvKind::Columns, 3, 20.0, env_cfg, ppo, curriculum, 1);
  CHECK(std::equal(a.policy.mean.params().begin(), a.policy.mean.params().end(),
                   b.policy.mean.params().begin()));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_return == b.log[i].mean_return);
    CHECK(a.log[i].pg_loss == b.log[i].pg_loss);
  }
}

TEST_CASE("autoencoder on zero images with zero init has exactly zero loss") {
  DepthDataset ds;
  ds.intrinsics.width = 32;
  ds.intrinsics.height = 24;
  for (int i = 0; i < 8; ++i) {
    ds.images.emplace_back(32 * 24, 0.0f);
    ds.train_indices.push_back(i);
  }
  nn::Network enc = make_depth_encoder(ds.intrinsics, 8, 1);
  nn::Network dec = make_depth_decoder(ds.intrinsics, 8, 1);
  enc.init_params(1, 0.0f);
  dec.init_params(1, 0.0f);
  CHECK(autoencoder_mse(enc, dec, ds, ds.train_indices, 1) == 0.0);
}

TEST_CASE("autoencoder fits a constant image via the decoder bias") {
  DepthDataset ds;
  ds.intrinsics.width = 32;
  ds.intrinsics.height = 24;
  for (int i = 0; i < 256; ++i) {
    ds.images.emplace_back(32 * 24, 0.37f);
    if (i % 8 == 0) {
      ds.val_indices.push_back(i);
    } else {
      ds.train_indices.push_back(i);
    }
  }
  AutoencoderConfig cfg;
  cfg.embedding_dim = 8;
  cfg.epochs = 20;
  cfg.seed = 3;
  const AutoencoderResult result = train_autoencoder(ds, cfg, 1);
  CHECK(result.final_val_mse < 1e-4);
}

TEST_CASE("cheat-wired student is a distillation fixed point") {
  World world;
  world.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
  world.start_region = {Vec3(-8, -0.5, 1.5), Vec3(-7, 0.5, 2.5)};
  world.waypoints = {Vec3(6, 0, 2)};
  world.obstacles.emplace_back(CylinderZ{{0.0, 0.0}, 0.8, 0.0, 5.0});  // one obstacle
  const Roadmap rm = build_prm(world, 150, 8, 2);
  const GuidingPath path = shortest_path(rm, world);

  PolicyHead teacher = PolicyHead::make_teacher(5);
  // Cheat wiring: the "student observation" is the teacher's action itself.
  const StudentObsFn cheat_obs = [&teacher](const Env& env) {
    const Eigen::Vector4d a = teacher.act_mean(env.observe_teacher());
    return std::vector<float>{static_cast<float>(a[0]), static_cast<float>(a[1]),
                              static_cast<float>(a[2]), static_cast<float>(a[3])};
  };
  StudentPolicy identity_student{nn::Network({4, 1, 1}, {nn::DenseSpec{4, 4}}),
                                 std::vector<float>(4, 1.0f)};
  auto p = identity_student.net.params();
  p[0] = 1.0f;
  p[5] = 1.0f;
  p[10] = 1.0f;
  p[15] = 1.0f;
  const std::vector<float> before(identity_student.net.params().begin(),
                                  identity_student.net.params().end());

  EnvConfig env_cfg;
  env_cfg.max_steps = 60;
  DistillConfig cfg;
  cfg.rounds = 2;
  cfg.episodes_per_round = 2;
  cfg.epochs_per_round = 3;
  cfg.heldout_episodes = 1;
  cfg.final_eval_runs = 0;  // plumbing test; no success requirement
  cfg.seed = 9;
  const DistillResult result = distill_student(teacher, cheat_obs, 4, world, path, env_cfg, cfg,
                                               1, &identity_student);
  for (const auto& log : result.log) {
    CHECK(log.train_mse == 0.0);
    CHECK(log.val_mse == 0.0);
    CHECK(log.rollout_mse < 1e-15);  // f32 action vs f64 label rounding
  }
  CHECK(std::equal(result.student.net.params().begin(), result.student.net.params().end(),
                   before.begin()));
}

TEST_CASE("distillation never modifies teacher or encoder parameters") {
  Fixture fx;
  PolicyHead teacher = PolicyHead::make_teacher(6);
  const std::vector<float> teacher_before(teacher.mean.params().begin(),
                                          teacher.mean.params().end());
  CameraIntrinsics intr;
  intr.width = 32;
  intr.height = 24;
  nn::Network encoder = make_depth_encoder(intr, 8, 2);
  const std::vector<float> encoder_before(encoder.params().begin(), encoder.params().end());

  EnvConfig env_cfg;
  env_cfg.max_steps = 30;
  DistillConfig cfg;
  cfg.rounds = 1;
  cfg.episodes_per_round = 1;
  cfg.epochs_per_round = 1;
  cfg.heldout_episodes = 1;
  cfg.final_eval_runs = 0;
  const StudentObsFn obs_fn = make_depth_student_obs(encoder, intr);
  distill_student(teacher, obs_fn, 8 + 12, fx.world, fx.path, env_cfg, cfg, 1);
  CHECK(std::equal(teacher.mean.params().begin(), teacher.mean.params().end(),
                   teacher_before.begin()));
  CHECK(std::equal(encoder.params().begin(), encoder.params().end(), encoder_before.begin()));
}

TEST_CASE("depth dataset: trivial episode, determinism, and bit-exact replay") {
  // Start a hair away from the goal so the first step already succeeds.
  World world;
  world.bounds = {Vec3(-10, -10, 0), Vec3(10, 10, 5)};
  const Vec3 goal(0, 0, 2);
  world.waypoints = {goal};
  world.goal_tolerance = 0.5;
  const Vec3 start = goal + Vec3(-0.3, 0, 0);
  world.start_region = {start, start};
  const Roadmap rm = build_prm(world, 40, 5, 3);
  const GuidingPath path = shortest_path(rm, world);

  PolicyHead teacher = PolicyHead::make_teacher(8);
  EnvConfig env_cfg;
  CameraIntrinsics intr;
  intr.width = 16;
  intr.height = 12;
  const DepthDataset ds =
      collect_depth_dataset(teacher, world, path, env_cfg, intr, 1, 77, 1, 0.0);
  CHECK(ds.size() == 1);  // one-step episode
  CHECK(ds.episode[0] == 0);

  // Stored observations replayed through the frozen teacher reproduce the
  // stored actions bit for bit.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Eigen::Vector4d a = teacher.act_mean(ds.teacher_obs[i]);
    for (int j = 0; j < 4; ++j) {
      CHECK(static_cast<float>(a[j]) == ds.teacher_actions[i][j]);
    }
  }

  const auto tmp = std::filesystem::temp_directory_path();
  save_dataset(ds, tmp / "paf_ds_a");
  const DepthDataset again =
      collect_depth_dataset(teacher, world, path, env_cfg, intr, 1, 77, 1, 0.0);
  save_dataset(again, tmp / "paf_ds_b");
  const auto read_file = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  };
  CHECK(read_file(tmp / "paf_ds_a.depth") == read_file(tmp / "paf_ds_b.depth"));
  CHECK(read_file(tmp / "paf_ds_a.csv") == read_file(tmp / "paf_ds_b.csv"));

  // Round trip through the files preserves frames, observations and actions.
  const DepthDataset loaded = load_dataset(tmp / "paf_ds_a");
  REQUIRE(loaded.size() == ds.size());
  CHECK(loaded.teacher_obs[0] == ds.teacher_obs[0]);
  CHECK(loaded.teacher_actions[0] == ds.teacher_actions[0]);
  for (const auto& name : {"paf_ds_a.depth", "paf_ds_a.csv", "paf_ds_b.depth", "paf_ds_b.csv"}) {
    std::filesystem::remove(tmp / name);
  }

  // A hovering teacher in a world with an unreachable goal never succeeds.
  World far = world;
  far.waypoints = {Vec3(8, 0, 2)};
  far.start_region = {Vec3(-8, 0, 2), Vec3(-8, 0, 2)};
  const Roadmap rm2 = build_prm(far, 40, 5, 4);
  const GuidingPath path2 = shortest_path(rm2, far);
  EnvConfig short_cfg;
  short_cfg.max_steps = 10;
  CHECK_THROWS_WITH_AS(collect_depth_dataset(teacher, far, path2, short_cfg, intr, 1, 5, 1, 0.0),
                       doctest::Contains("never reached"), std::runtime_error);
}
