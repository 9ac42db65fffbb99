#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "paf/common.hpp"
#include "paf/nn.hpp"

namespace paf {

// Gaussian policy with tanh-squashed mean and state-independent log-std,
// plus a separate value network. Observations are divided by fixed per-entry
// scales before entering either network.
struct PolicyHead {
  nn::Network mean;             // obs -> act_dim, pre-squash
  nn::Network value;            // obs -> 1
  std::vector<float> log_std;   // act_dim
  std::vector<float> obs_scale; // obs_dim divisors

  static constexpr int kActionDim = 4;

  static PolicyHead make_teacher(std::uint64_t seed, float init_log_std = -0.5f);

  int obs_dim() const { return mean.input_shape().size(); }

  std::vector<float> scaled(std::span<const float> obs) const;
  // Deterministic action: tanh of the mean network output.
  Eigen::Vector4d act_mean(std::span<const float> obs) const;
  double value_of(std::span<const float> obs) const;

  struct Sample {
    Eigen::Vector4d action;
    double log_prob;
  };
  Sample sample(std::span<const float> obs, Rng& rng) const;
  double log_prob(std::span<const float> obs, const Eigen::Vector4d& action) const;

  void save(const std::filesystem::path& file) const;
  static PolicyHead load(const std::filesystem::path& file);
};

// Vision-based student: a single MLP with tanh-squashed output regressing
// normalized actions from [embedding; velocity; rotation].
struct StudentPolicy {
  nn::Network net;
  std::vector<float> obs_scale;

  static StudentPolicy make(int obs_dim, std::uint64_t seed);

  Eigen::Vector4d act(std::span<const float> obs) const;
  void save(const std::filesystem::path& file) const;
  static StudentPolicy load(const std::filesystem::path& file);
};

// Default observation scaling used by both policies: velocities by 10,
// body rates by the rate limit, relative vectors by 10, rotation entries
// and embeddings unscaled.
std::vector<float> teacher_obs_scale();
std::vector<float> student_obs_scale(int embedding_dim);

}  // namespace paf
