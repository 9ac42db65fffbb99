#include "paf/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "paf/common.hpp"
#include "paf/evalbench.hpp"

namespace paf {

StudentObsFn make_depth_student_obs(const nn::Network& encoder,
                                    const CameraIntrinsics& intrinsics) {
  return [&encoder, intrinsics](const Env& env) {
    const DepthImage img = render_depth(env.world(), env.state().p, env.state().q, intrinsics);
    const std::vector<float> z = encoder.forward(normalize_depth(img));
    return observe_student(z, env.state());
  };
}

namespace {

struct Pairs {
  std::vector<std::vector<float>> obs;
  std::vector<std::array<float, 4>> labels;
};

std::array<float, 4> to_array(const Eigen::Vector4d& a) {
  return {static_cast<float>(a[0]), static_cast<float>(a[1]), static_cast<float>(a[2]),
          static_cast<float>(a[3])};
}

// Rolls episodes with the given actor while the teacher labels every state.
// When collect is null only the action MSE is accumulated.
double roll_and_label(const PolicyHead& teacher, const StudentObsFn& student_obs,
                      const StudentPolicy* student, bool use_teacher_actions, const World& world,
                      const GuidingPath& path, const EnvConfig& config, int episodes,
                      std::uint64_t seed, int workers, Pairs* collect) {
  std::vector<Pairs> per_ep(episodes);
  std::vector<double> se(episodes, 0.0);
  std::vector<std::size_t> count(episodes, 0);
  parallel_for(static_cast<std::size_t>(episodes), workers,
               [&](std::size_t begin, std::size_t end, int) {
                 for (std::size_t ep = begin; ep < end; ++ep) {
                   Env env(world, path, config);
                   env.reset(derive_seed(seed, 0xD0 + ep));
                   while (!env.episode().done()) {
                     std::vector<float> sobs = student_obs(env);
                     const Eigen::Vector4d label = teacher.act_mean(env.observe_teacher());
                     Eigen::Vector4d act = label;
                     if (!use_teacher_actions) {
                       act = student->act(sobs);
                       se[ep] += (act - label).squaredNorm() / 4.0;
                     }
                     count[ep] += 1;
                     if (collect) {
                       per_ep[ep].obs.push_back(std::move(sobs));
                       per_ep[ep].labels.push_back(to_array(label));
                     }
                     env.step(act);
                   }
                 }
               });
  if (collect) {
    for (auto& p : per_ep) {
      for (std::size_t i = 0; i < p.obs.size(); ++i) {
        collect->obs.push_back(std::move(p.obs[i]));
        collect->labels.push_back(p.labels[i]);
      }
    }
  }
  double total_se = 0.0;
  std::size_t total_count = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    total_se += se[ep];
    total_count += count[ep];
  }
  return total_count > 0 ? total_se / static_cast<double>(total_count) : 0.0;
}

double action_mse(const StudentPolicy& student, const Pairs& data,
                  std::span<const std::uint32_t> idx, int workers) {
  if (idx.empty()) return 0.0;
  const std::size_t w_count = std::max<std::size_t>(1, std::min<std::size_t>(workers, idx.size()));
  std::vector<double> partial(w_count, 0.0);
  parallel_for(idx.size(), static_cast<int>(w_count),
               [&](std::size_t begin, std::size_t end, int w) {
                 for (std::size_t k = begin; k < end; ++k) {
                   const auto& obs = data.obs[idx[k]];
                   const Eigen::Vector4d a = student.act(obs);
                   double se = 0.0;
                   for (int j = 0; j < 4; ++j) {
                     const double d = a[j] - data.labels[idx[k]][j];
                     se += d * d;
                   }
                   partial[w] += se / 4.0;
                 }
               });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / static_cast<double>(idx.size());
}

}  // namespace

DistillResult distill_student(const PolicyHead& teacher, const StudentObsFn& student_obs,
                              int student_obs_dim, const World& world, const GuidingPath& path,
                              const EnvConfig& config, const DistillConfig& distill, int workers,
                              const StudentPolicy* initial_student, std::ostream* progress) {
  if (distill.rounds < 1) throw std::invalid_argument("distill_student: rounds < 1");
  DistillResult result{initial_student
                           ? *initial_student
                           : StudentPolicy::make(student_obs_dim, derive_seed(distill.seed, 7)),
                       {},
                       -1.0};
  StudentPolicy& student = result.student;
  if (student.net.input_shape().size() != student_obs_dim) {
    throw std::invalid_argument("distill_student: student input dim mismatch");
  }

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = distill.lr;
  nn::AdamState adam(student.net.param_count(), adam_cfg);

  Pairs data;
  std::vector<std::uint32_t> train_idx, val_idx;
  Rng split_rng(derive_seed(distill.seed, 0x59117));

  std::vector<float> grads(student.net.param_count());
  for (int round = 0; round < distill.rounds; ++round) {
    // Aggregate: round 0 visits teacher states, later rounds student states.
    const std::size_t old_size = data.obs.size();
    roll_and_label(teacher, student_obs, &student, round == 0, world, path, config,
                   distill.episodes_per_round, derive_seed(distill.seed, 0xA9 + round), workers,
                   &data);
    for (std::uint32_t i = static_cast<std::uint32_t>(old_size); i < data.obs.size(); ++i) {
      if (uniform_real(split_rng, 0.0, 1.0) < distill.val_fraction) {
        val_idx.push_back(i);
      } else {
        train_idx.push_back(i);
      }
    }
    if (train_idx.empty()) throw std::runtime_error("distill_student: no training data collected");

    double train_mse = 0.0;
    std::vector<std::uint32_t> order = train_idx;
    for (int epoch = 0; epoch < distill.epochs_per_round; ++epoch) {
      Rng rng(derive_seed(distill.seed, 0xD15E + round * 1000 + epoch));
      std::shuffle(order.begin(), order.end(), rng);
      double se_sum = 0.0;
      std::size_t n_seen = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(distill.minibatch)) {
        const std::size_t mb_n = std::min<std::size_t>(distill.minibatch, order.size() - start);
        std::fill(grads.begin(), grads.end(), 0.0f);
        const std::size_t w_count =
            std::max<std::size_t>(1, std::min<std::size_t>(workers, mb_n));
        std::vector<std::vector<float>> gw(w_count);
        std::vector<double> se(w_count, 0.0);
        for (auto& g : gw) g.assign(student.net.param_count(), 0.0f);
        parallel_for(mb_n, static_cast<int>(w_count), [&](std::size_t b, std::size_t e, int w) {
          nn::Network::Cache cache;
          std::vector<float> scaled(static_cast<std::size_t>(student_obs_dim));
          std::vector<float> d_out(4);
          for (std::size_t k = b; k < e; ++k) {
            const std::uint32_t row = order[start + k];
            const auto& obs = data.obs[row];
            for (int i = 0; i < student_obs_dim; ++i) scaled[i] = obs[i] / student.obs_scale[i];
            const std::vector<float> out = student.net.forward_cached(scaled, cache);
            const double scale = 2.0 / (static_cast<double>(mb_n) * 4.0);
            for (int j = 0; j < 4; ++j) {
              const double diff = static_cast<double>(out[j]) - data.labels[row][j];
              se[w] += diff * diff / 4.0;
              d_out[j] = static_cast<float>(diff * scale);
            }
            student.net.backward(cache, d_out, gw[w]);
          }
        });
        for (std::size_t w = 0; w < w_count; ++w) {
          for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += gw[w][i];
          se_sum += se[w];
        }
        n_seen += mb_n;
        nn::adam_step(student.net.params(), grads, adam);
      }
      train_mse = se_sum / static_cast<double>(n_seen);
    }

    DistillRoundLog log;
    log.round = round;
    log.dataset_size = data.obs.size();
    log.train_mse = train_mse;
    log.val_mse = action_mse(student, data, val_idx, workers);
    // Distribution-shift metric: fresh student rollouts, teacher labels.
    log.rollout_mse =
        roll_and_label(teacher, student_obs, &student, false, world, path, config,
                       distill.heldout_episodes, derive_seed(distill.seed, 0x3EED + round),
                       workers, nullptr);
    result.log.push_back(log);
    if (progress) {
      *progress << "round " << round << " n " << log.dataset_size << " train_mse "
                << fmt_f32(static_cast<float>(log.train_mse)) << " val_mse "
                << fmt_f32(static_cast<float>(log.val_mse)) << " rollout_mse "
                << fmt_f32(static_cast<float>(log.rollout_mse)) << '\n';
      progress->flush();
    }
  }

  if (distill.final_eval_runs > 0) {
    StudentObsFn obs_fn = student_obs;
    const ActorFn actor = [&student, &obs_fn](const Env& env) {
      return student.act(obs_fn(env));
    };
    const EvalReport eval = evaluate_policy(actor, world, path, config, distill.final_eval_runs,
                                            derive_seed(distill.seed, 0xF1EA1), workers);
    result.final_success_pct = eval.success_pct;
    if (eval.successes == 0) {
      std::ostringstream msg;
      msg << "distill_student: student success is 0 after " << distill.rounds << " rounds";
      for (const auto& log : result.log) {
        msg << "; round " << log.round << " rollout_mse "
            << fmt_f32(static_cast<float>(log.rollout_mse));
      }
      throw std::runtime_error(msg.str());
    }
  }
  return result;
}

void write_distill_log_csv(const std::vector<DistillRoundLog>& log, std::ostream& os) {
  os << "round,dataset_size,train_mse,val_mse,rollout_mse\n";
  for (const auto& row : log) {
    os << row.round << ',' << row.dataset_size << ','
       << fmt_f32(static_cast<float>(row.train_mse)) << ','
       << fmt_f32(static_cast<float>(row.val_mse)) << ','
       << fmt_f32(static_cast<float>(row.rollout_mse)) << '\n';
  }
}

}  // namespace paf
