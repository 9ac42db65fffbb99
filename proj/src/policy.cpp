#include "paf/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "paf/checkpoint.hpp"
#include "paf/rl_env.hpp"

namespace paf {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}

std::vector<float> teacher_obs_scale() {
  std::vector<float> s(kTeacherObsDim, 1.0f);
  for (int i = 0; i < 3; ++i) s[i] = 10.0f;         // v
  for (int i = 12; i < 15; ++i) s[i] = 6.0f;        // omega
  for (int i = 15; i < 24; ++i) s[i] = 10.0f;       // relative vectors
  return s;
}

std::vector<float> student_obs_scale(int embedding_dim) {
  std::vector<float> s(embedding_dim + 12, 1.0f);
  for (int i = 0; i < 3; ++i) s[embedding_dim + i] = 10.0f;  // v
  return s;
}

PolicyHead PolicyHead::make_teacher(std::uint64_t seed, float init_log_std) {
  PolicyHead head{
      nn::Network::mlp(kTeacherObsDim, {128, 128}, kActionDim),
      nn::Network::mlp(kTeacherObsDim, {128, 128}, 1),
      std::vector<float>(kActionDim, init_log_std),
      teacher_obs_scale(),
  };
  head.mean.init_params(derive_seed(seed, 1));
  head.value.init_params(derive_seed(seed, 2));
  // Small output layer so the initial policy hovers near the zero action.
  auto out = head.mean.layer_params(head.mean.layers().size() - 1);
  for (float& w : out) w *= 0.01f;
  return head;
}

std::vector<float> PolicyHead::scaled(std::span<const float> obs) const {
  if (obs.size() != obs_scale.size()) {
    throw std::invalid_argument("policy: observation size mismatch");
  }
  std::vector<float> s(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) s[i] = obs[i] / obs_scale[i];
  return s;
}

Eigen::Vector4d PolicyHead::act_mean(std::span<const float> obs) const {
  const std::vector<float> raw = mean.forward(scaled(obs));
  Eigen::Vector4d a;
  for (int i = 0; i < kActionDim; ++i) a[i] = std::tanh(static_cast<double>(raw[i]));
  return a;
}

double PolicyHead::value_of(std::span<const float> obs) const {
  return value.forward(scaled(obs))[0];
}

PolicyHead::Sample PolicyHead::sample(std::span<const float> obs, Rng& rng) const {
  const Eigen::Vector4d mu = act_mean(obs);
  Sample out;
  out.log_prob = 0.0;
  for (int i = 0; i < kActionDim; ++i) {
    const double sigma = std::exp(static_cast<double>(log_std[i]));
    const double a = mu[i] + sigma * standard_normal(rng);
    out.action[i] = a;
    const double z = (a - mu[i]) / sigma;
    out.log_prob += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
  }
  return out;
}

double PolicyHead::log_prob(std::span<const float> obs, const Eigen::Vector4d& action) const {
  const Eigen::Vector4d mu = act_mean(obs);
  double lp = 0.0;
  for (int i = 0; i < kActionDim; ++i) {
    const double sigma = std::exp(static_cast<double>(log_std[i]));
    const double z = (action[i] - mu[i]) / sigma;
    lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
  }
  return lp;
}

void PolicyHead::save(const std::filesystem::path& file) const {
  nn::CheckpointBundle bundle;
  bundle.nets.emplace("mean", mean);
  bundle.nets.emplace("value", value);
  bundle.arrays.emplace("log_std", log_std);
  bundle.arrays.emplace("obs_scale", obs_scale);
  nn::save_checkpoint(bundle, file);
}

PolicyHead PolicyHead::load(const std::filesystem::path& file) {
  nn::CheckpointBundle bundle = nn::load_checkpoint(file);
  auto need_net = [&](const char* name) -> nn::Network& {
    auto it = bundle.nets.find(name);
    if (it == bundle.nets.end()) {
      throw std::runtime_error("policy checkpoint missing network '" + std::string(name) + "'");
    }
    return it->second;
  };
  auto need_arr = [&](const char* name) -> std::vector<float>& {
    auto it = bundle.arrays.find(name);
    if (it == bundle.arrays.end()) {
      throw std::runtime_error("policy checkpoint missing array '" + std::string(name) + "'");
    }
    return it->second;
  };
  return PolicyHead{std::move(need_net("mean")), std::move(need_net("value")),
                    std::move(need_arr("log_std")), std::move(need_arr("obs_scale"))};
}

StudentPolicy StudentPolicy::make(int obs_dim, std::uint64_t seed) {
  std::vector<nn::LayerSpec> layers{
      nn::DenseSpec{obs_dim, 128}, nn::ActSpec{nn::Activation::Tanh},
      nn::DenseSpec{128, 128},     nn::ActSpec{nn::Activation::Tanh},
      nn::DenseSpec{128, PolicyHead::kActionDim}, nn::ActSpec{nn::Activation::Tanh}};
  StudentPolicy sp{nn::Network({obs_dim, 1, 1}, std::move(layers)),
                   student_obs_scale(obs_dim - 12)};
  sp.net.init_params(derive_seed(seed, 3));
  return sp;
}

Eigen::Vector4d StudentPolicy::act(std::span<const float> obs) const {
  if (obs.size() != obs_scale.size()) {
    throw std::invalid_argument("student: observation size mismatch");
  }
  std::vector<float> s(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) s[i] = obs[i] / obs_scale[i];
  const std::vector<float> out = net.forward(s);
  return {out[0], out[1], out[2], out[3]};
}

void StudentPolicy::save(const std::filesystem::path& file) const {
  nn::CheckpointBundle bundle;
  bundle.nets.emplace("student", net);
  bundle.arrays.emplace("obs_scale", obs_scale);
  nn::save_checkpoint(bundle, file);
}

StudentPolicy StudentPolicy::load(const std::filesystem::path& file) {
  nn::CheckpointBundle bundle = nn::load_checkpoint(file);
  auto nit = bundle.nets.find("student");
  auto ait = bundle.arrays.find("obs_scale");
  if (nit == bundle.nets.end() || ait == bundle.arrays.end()) {
    throw std::runtime_error("student checkpoint missing 'student' net or 'obs_scale'");
  }
  return StudentPolicy{std::move(nit->second), std::move(ait->second)};
}

}  // namespace paf
