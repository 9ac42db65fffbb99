#include "paf/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

#include "paf/common.hpp"
#include "paf/evalbench.hpp"
#include "paf/gae.hpp"

namespace paf {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;
constexpr double kHalfLn2PiE = 1.4189385332046727;  // 0.5 * ln(2*pi*e)

bool all_finite(std::span<const float> xs) {
  for (float x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void clip_grad_norm(std::span<float> a, std::span<float> b, double max_norm) {
  double ss = 0.0;
  for (float x : a) ss += static_cast<double>(x) * x;
  for (float x : b) ss += static_cast<double>(x) * x;
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (float& x : a) x *= scale;
    for (float& x : b) x *= scale;
  }
}

}  // namespace

PpoStats ppo_minibatch_gradients(const PolicyHead& policy, const PpoBatch& batch,
                                 std::span<const std::uint32_t> idx, double clip,
                                 double entropy_coef, double value_coef,
                                 bool normalize_advantages, std::span<float> grad_mean,
                                 std::span<float> grad_log_std, std::span<float> grad_value,
                                 int workers) {
  const std::size_t n = idx.size();
  const int act_dim = PolicyHead::kActionDim;
  const int obs_dim = batch.obs_dim;

  double adv_mean = 0.0, adv_std = 1.0;
  if (normalize_advantages) {
    double sum = 0.0;
    for (std::uint32_t row : idx) sum += batch.advantages[row];
    adv_mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::uint32_t row : idx) {
      const double d = batch.advantages[row] - adv_mean;
      ss += d * d;
    }
    adv_std = std::sqrt(ss / static_cast<double>(n)) + 1e-8;
  }

  const std::size_t w_count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::vector<std::vector<float>> gm(w_count), gls(w_count), gv(w_count);
  std::vector<double> pg_acc(w_count, 0.0), v_acc(w_count, 0.0), ent_acc(w_count, 0.0);
  for (std::size_t w = 0; w < w_count; ++w) {
    gm[w].assign(policy.mean.param_count(), 0.0f);
    gls[w].assign(static_cast<std::size_t>(act_dim), 0.0f);
    gv[w].assign(policy.value.param_count(), 0.0f);
  }

  parallel_for(n, static_cast<int>(w_count), [&](std::size_t begin, std::size_t end, int w) {
    std::vector<float> scaled(static_cast<std::size_t>(obs_dim));
    std::vector<float> d_raw(static_cast<std::size_t>(act_dim));
    std::vector<float> d_value(1);
    nn::Network::Cache cache_mean, cache_value;
    for (std::size_t k = begin; k < end; ++k) {
      const std::uint32_t row = idx[k];
      const float* obs = batch.obs.data() + static_cast<std::size_t>(row) * obs_dim;
      for (int i = 0; i < obs_dim; ++i) scaled[i] = obs[i] / policy.obs_scale[i];

      const std::vector<float> raw = policy.mean.forward_cached(scaled, cache_mean);
      double new_logp = 0.0;
      double mu[PolicyHead::kActionDim], z[PolicyHead::kActionDim],
          sigma[PolicyHead::kActionDim];
      for (int j = 0; j < act_dim; ++j) {
        mu[j] = std::tanh(static_cast<double>(raw[j]));
        sigma[j] = std::exp(static_cast<double>(policy.log_std[j]));
        const double a = batch.actions[static_cast<std::size_t>(row) * act_dim + j];
        z[j] = (a - mu[j]) / sigma[j];
        new_logp += -0.5 * z[j] * z[j] - policy.log_std[j] - kLogSqrt2Pi;
      }
      const double ratio = std::exp(new_logp - batch.old_logp[row]);
      const double adv = (batch.advantages[row] - adv_mean) / adv_std;
      const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
      const double l1 = -adv * ratio;
      const double l2 = -adv * clipped_ratio;
      const double pg_loss = std::max(l1, l2);
      // Gradient flows through the unclipped branch only; when the clipped
      // branch dominates its derivative w.r.t. ratio is zero.
      const double d_logp = (l1 >= l2 ? -adv : 0.0) * ratio;

      for (int j = 0; j < act_dim; ++j) {
        const double d_mu = d_logp * z[j] / sigma[j];
        d_raw[j] = static_cast<float>(d_mu * (1.0 - mu[j] * mu[j]));
        gls[w][j] += static_cast<float>(d_logp * (z[j] * z[j] - 1.0) - entropy_coef);
      }
      policy.mean.backward(cache_mean, d_raw, gm[w]);

      const double v = policy.value.forward_cached(scaled, cache_value)[0];
      const double ret = batch.returns[row];
      d_value[0] = static_cast<float>(value_coef * (v - ret));
      policy.value.backward(cache_value, d_value, gv[w]);

      pg_acc[w] += pg_loss;
      v_acc[w] += 0.5 * value_coef * (v - ret) * (v - ret);
      double ent = 0.0;
      for (int j = 0; j < act_dim; ++j) ent += policy.log_std[j] + kHalfLn2PiE;
      ent_acc[w] += ent;
    }
  });

  const float inv_n = 1.0f / static_cast<float>(n);
  for (std::size_t w = 0; w < w_count; ++w) {
    for (std::size_t i = 0; i < grad_mean.size(); ++i) grad_mean[i] += gm[w][i];
    for (std::size_t i = 0; i < grad_log_std.size(); ++i) grad_log_std[i] += gls[w][i];
    for (std::size_t i = 0; i < grad_value.size(); ++i) grad_value[i] += gv[w][i];
  }
  for (float& g : grad_mean) g *= inv_n;
  for (float& g : grad_log_std) g *= inv_n;
  for (float& g : grad_value) g *= inv_n;

  PpoStats stats;
  for (std::size_t w = 0; w < w_count; ++w) {
    stats.pg_loss += pg_acc[w];
    stats.value_loss += v_acc[w];
    stats.entropy += ent_acc[w];
  }
  stats.pg_loss /= static_cast<double>(n);
  stats.value_loss /= static_cast<double>(n);
  stats.entropy /= static_cast<double>(n);
  stats.finite = std::isfinite(stats.pg_loss) && std::isfinite(stats.value_loss) &&
                 all_finite(grad_mean) && all_finite(grad_log_std) && all_finite(grad_value);
  return stats;
}

void write_training_log_csv(const std::vector<IterationLog>& log, std::ostream& os) {
  os << "iteration,stage,speed_cap,density,episodes,mean_return,success_pct,eval_success_pct,"
        "pg_loss,value_loss,entropy\n";
  for (const auto& row : log) {
    os << row.iteration << ',' << row.stage << ',' << fmt_f32(static_cast<float>(row.speed_cap))
       << ',' << fmt_f32(static_cast<float>(row.density)) << ',' << row.episodes << ','
       << fmt_f32(static_cast<float>(row.mean_return)) << ','
       << fmt_f32(static_cast<float>(row.rollout_success_pct)) << ','
       << fmt_f32(static_cast<float>(row.eval_success_pct)) << ','
       << fmt_f32(static_cast<float>(row.pg_loss)) << ','
       << fmt_f32(static_cast<float>(row.value_loss)) << ','
       << fmt_f32(static_cast<float>(row.entropy)) << '\n';
  }
}

namespace {

struct Stage {
  std::unique_ptr<World> world;
  std::unique_ptr<GuidingPath> path;
  EnvConfig env_cfg;
  std::vector<Env> envs;
  int index = 0;
  double speed_cap = 0.0;  // 0 = uncapped
  double density = 1.0;
  bool full = false;
};

struct EpisodeTracker {
  double ep_return = 0.0;
  std::uint64_t episode_counter = 0;
};

}  // namespace

TeacherTrainResult train_teacher(EnvKind kind, std::uint64_t env_seed, double scale,
                                 const EnvConfig& env_template, const PpoConfig& ppo,
                                 const CurriculumConfig& curriculum, int workers,
                                 std::ostream* progress) {
  const int n_envs = ppo.num_envs;
  const int t_steps = ppo.steps_per_env;
  const int batch_n = n_envs * t_steps;
  if (batch_n % ppo.minibatch != 0) {
    throw std::invalid_argument("train_teacher: minibatch must divide num_envs*steps_per_env");
  }

  TeacherTrainResult result{PolicyHead::make_teacher(ppo.seed, ppo.init_log_std), {}, false, 0.0, ""};
  PolicyHead& policy = result.policy;

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = ppo.lr;
  nn::AdamState adam_mean(policy.mean.param_count(), adam_cfg);
  nn::AdamState adam_log_std(policy.log_std.size(), adam_cfg);
  nn::AdamState adam_value(policy.value.param_count(), adam_cfg);

  double speed_cap = curriculum.speed_cap_start >= curriculum.speed_uncap_at
                         ? 0.0
                         : curriculum.speed_cap_start;
  double density = std::min(1.0, curriculum.density_start);
  int stage_index = 0;

  std::vector<EpisodeTracker> trackers(n_envs);
  std::vector<Rng> action_rngs;
  for (int e = 0; e < n_envs; ++e) action_rngs.emplace_back(derive_seed(ppo.seed, 0x5A0 + e));
  std::vector<std::vector<float>> current_obs(n_envs);

  Stage stage;
  const auto episode_seed = [&](int env_index) {
    return derive_seed(derive_seed(ppo.seed, 0xE50000 + env_index),
                       trackers[env_index].episode_counter++);
  };
  const auto setup_stage = [&]() {
    stage.index = stage_index;
    stage.speed_cap = speed_cap;
    stage.density = density;
    stage.full = density >= 1.0 && speed_cap == 0.0;
    Scenario sc = make_scenario(kind, env_seed, scale, density,
                                env_template.vehicle.collision_radius);
    stage.world = std::make_unique<World>(std::move(sc.world));
    stage.path = std::make_unique<GuidingPath>(std::move(sc.path));
    stage.env_cfg = env_template;
    stage.env_cfg.speed_cap = speed_cap;
    stage.envs.clear();
    stage.envs.reserve(n_envs);
    for (int e = 0; e < n_envs; ++e) {
      stage.envs.emplace_back(*stage.world, *stage.path, stage.env_cfg);
      current_obs[e] = stage.envs[e].reset(episode_seed(e));
      trackers[e].ep_return = 0.0;
    }
  };
  setup_stage();

  PpoBatch batch;
  batch.n = batch_n;
  batch.obs_dim = policy.obs_dim();
  batch.obs.resize(static_cast<std::size_t>(batch_n) * batch.obs_dim);
  batch.actions.resize(static_cast<std::size_t>(batch_n) * PolicyHead::kActionDim);
  batch.old_logp.resize(batch_n);
  batch.advantages.resize(batch_n);
  batch.returns.resize(batch_n);
  std::vector<float> rewards(batch_n), values(batch_n);
  std::vector<std::uint8_t> dones(batch_n);
  std::vector<float> bootstrap(n_envs);
  std::vector<std::vector<std::pair<double, bool>>> finished(n_envs);  // (return, success)

  std::vector<float> grad_mean(policy.mean.param_count());
  std::vector<float> grad_log_std(policy.log_std.size());
  std::vector<float> grad_value(policy.value.param_count());

  PolicyHead best_policy = policy;
  bool have_best_full = false;
  PolicyHead last_good = policy;

  for (int iter = 1; iter <= ppo.iterations; ++iter) {
    last_good = policy;

    // ---- rollout phase: frozen parameters, one worker per env shard ----
    for (auto& f : finished) f.clear();
    parallel_for(static_cast<std::size_t>(n_envs), workers,
                 [&](std::size_t env_begin, std::size_t env_end, int) {
                   for (std::size_t e = env_begin; e < env_end; ++e) {
                     Env& env = stage.envs[e];
                     std::vector<float>& obs = current_obs[e];
                     for (int t = 0; t < t_steps; ++t) {
                       const std::size_t row = e * t_steps + t;
                       std::copy(obs.begin(), obs.end(),
                                 batch.obs.begin() + row * batch.obs_dim);
                       const PolicyHead::Sample sample = policy.sample(obs, action_rngs[e]);
                       values[row] = static_cast<float>(policy.value_of(obs));
                       const Env::StepResult res = env.step(sample.action);
                       for (int j = 0; j < PolicyHead::kActionDim; ++j) {
                         batch.actions[row * PolicyHead::kActionDim + j] =
                             static_cast<float>(sample.action[j]);
                       }
                       batch.old_logp[row] = static_cast<float>(sample.log_prob);
                       rewards[row] = static_cast<float>(res.reward);
                       dones[row] = res.done ? 1 : 0;
                       trackers[e].ep_return += res.reward;
                       if (res.done) {
                         finished[e].emplace_back(trackers[e].ep_return,
                                                  res.reason == DoneReason::Goal);
                         trackers[e].ep_return = 0.0;
                         obs = env.reset(episode_seed(static_cast<int>(e)));
                       } else {
                         obs = env.observe_teacher();
                       }
                     }
                     bootstrap[e] = static_cast<float>(policy.value_of(obs));
                   }
                 });

    // ---- GAE per environment segment ----
    std::vector<float> seg_values(t_steps + 1);
    for (int e = 0; e < n_envs; ++e) {
      const std::size_t base = static_cast<std::size_t>(e) * t_steps;
      std::copy(values.begin() + base, values.begin() + base + t_steps, seg_values.begin());
      seg_values[t_steps] = bootstrap[e];
      compute_gae({rewards.data() + base, static_cast<std::size_t>(t_steps)}, seg_values,
                  {dones.data() + base, static_cast<std::size_t>(t_steps)}, ppo.discount,
                  ppo.gae_lambda,
                  {batch.advantages.data() + base, static_cast<std::size_t>(t_steps)},
                  {batch.returns.data() + base, static_cast<std::size_t>(t_steps)});
    }

    // ---- update phase: single writer between rollouts ----
    IterationLog row;
    row.iteration = iter;
    row.stage = stage.index;
    row.speed_cap = stage.speed_cap;
    row.density = stage.density;
    double pg_sum = 0.0, v_sum = 0.0, ent_sum = 0.0;
    int mb_count = 0;
    bool nan_abort = false;
    std::vector<std::uint32_t> perm(batch_n);
    std::iota(perm.begin(), perm.end(), 0u);
    for (int epoch = 0; epoch < ppo.epochs && !nan_abort; ++epoch) {
      Rng shuffle_rng(derive_seed(ppo.seed, 0x0E0C4 + static_cast<std::uint64_t>(iter) * 131 +
                                                static_cast<std::uint64_t>(epoch)));
      std::shuffle(perm.begin(), perm.end(), shuffle_rng);
      for (int start = 0; start < batch_n && !nan_abort; start += ppo.minibatch) {
        std::fill(grad_mean.begin(), grad_mean.end(), 0.0f);
        std::fill(grad_log_std.begin(), grad_log_std.end(), 0.0f);
        std::fill(grad_value.begin(), grad_value.end(), 0.0f);
        const PpoStats stats = ppo_minibatch_gradients(
            policy, batch, {perm.data() + start, static_cast<std::size_t>(ppo.minibatch)},
            ppo.clip, ppo.entropy_coef, ppo.value_coef, ppo.normalize_advantages, grad_mean,
            grad_log_std, grad_value, workers);
        if (!stats.finite) {
          nan_abort = true;
          break;
        }
        clip_grad_norm(grad_mean, grad_log_std, ppo.max_grad_norm);
        clip_grad_norm(grad_value, {}, ppo.max_grad_norm);
        nn::adam_step(policy.mean.params(), grad_mean, adam_mean);
        nn::adam_step(policy.log_std, grad_log_std, adam_log_std);
        nn::adam_step(policy.value.params(), grad_value, adam_value);
        pg_sum += stats.pg_loss;
        v_sum += stats.value_loss;
        ent_sum += stats.entropy;
        ++mb_count;
      }
    }
    if (nan_abort) {
      policy.mean = last_good.mean;
      policy.value = last_good.value;
      policy.log_std = last_good.log_std;
      result.warning = "training aborted on non-finite loss at iteration " +
                       std::to_string(iter) + "; restored last good parameters";
      result.log.push_back(row);
      break;
    }

    double ret_sum = 0.0;
    int ep_count = 0, goal_count = 0;
    for (int e = 0; e < n_envs; ++e) {
      for (const auto& [ep_ret, goal] : finished[e]) {
        ret_sum += ep_ret;
        ep_count += 1;
        goal_count += goal ? 1 : 0;
      }
    }
    row.episodes = ep_count;
    row.mean_return = ep_count > 0 ? ret_sum / ep_count : 0.0;
    row.rollout_success_pct = ep_count > 0 ? 100.0 * goal_count / ep_count : 0.0;
    row.pg_loss = mb_count > 0 ? pg_sum / mb_count : 0.0;
    row.value_loss = mb_count > 0 ? v_sum / mb_count : 0.0;
    row.entropy = mb_count > 0 ? ent_sum / mb_count : 0.0;

    bool stop_early = false;
    if (ppo.eval_every > 0 && iter % ppo.eval_every == 0) {
      const EvalReport eval =
          evaluate_policy(make_teacher_actor(policy), *stage.world, *stage.path, stage.env_cfg,
                          ppo.eval_runs, derive_seed(ppo.seed, 0xEA100 + iter), workers);
      row.eval_success_pct = eval.success_pct;
      if (stage.full) {
        result.reached_full_stage = true;
        if (!have_best_full || eval.success_pct > result.best_full_success_pct) {
          best_policy = policy;
          result.best_full_success_pct = eval.success_pct;
          have_best_full = true;
        }
        if (ppo.stop_success_pct > 0.0 && eval.success_pct >= ppo.stop_success_pct) {
          stop_early = true;
        }
      } else if (eval.success_pct >= curriculum.advance_success_pct) {
        stage_index += 1;
        density = std::min(1.0, density * curriculum.density_mult);
        if (speed_cap > 0.0) {
          speed_cap *= curriculum.speed_mult;
          if (speed_cap >= curriculum.speed_uncap_at) speed_cap = 0.0;
        }
        setup_stage();
      }
    }
    if (progress) {
      *progress << "iter " << row.iteration << " stage " << row.stage << " return "
                << fmt_fixed(row.mean_return, 2) << " success "
                << fmt_fixed(row.rollout_success_pct, 1) << "% eval "
                << fmt_fixed(row.eval_success_pct, 1) << "%\n";
      progress->flush();
    }
    result.log.push_back(row);
    if (stop_early) break;
  }

  if (result.reached_full_stage && have_best_full) {
    // Final evaluation of the last parameters; keep whichever is better.
    const EvalReport final_eval =
        evaluate_policy(make_teacher_actor(policy), *stage.world, *stage.path, stage.env_cfg,
                        ppo.eval_runs, derive_seed(ppo.seed, 0xF17A1), workers);
    if (final_eval.success_pct > result.best_full_success_pct) {
      result.best_full_success_pct = final_eval.success_pct;
    } else {
      policy.mean = best_policy.mean;
      policy.value = best_policy.value;
      policy.log_std = best_policy.log_std;
    }
  } else if (!result.reached_full_stage) {
    if (result.warning.empty()) {
      result.warning = "curriculum did not reach full difficulty within the iteration budget "
                       "(stalled at stage " +
                       std::to_string(stage.index) + ")";
    }
  }
  return result;
}

}  // namespace paf
