#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "paf/autoencoder.hpp"
#include "paf/depth_camera.hpp"
#include "paf/distill.hpp"
#include "paf/envgen.hpp"
#include "paf/ppo.hpp"
#include "paf/rl_env.hpp"

namespace paf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error("config: " + key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Flat key = value sections; every field has a default, unknown keys are
// rejected. The resolved form written next to run artifacts lists every key.
struct ExperimentConfig {
  // [environment]
  std::string env_kind = "columns";
  std::uint64_t env_seed = 1;
  double scale = 20.0;
  double density = 1.0;

  VehicleParams vehicle;        // [vehicle]
  CameraIntrinsics camera;      // [camera]
  RewardWeights reward;         // [reward]

  // [env]
  double dt = 0.02;
  int max_steps = 500;
  double obs_clamp = 10.0;
  double lookahead_step = 0.1;
  double progress_hysteresis = 0.5;

  PpoConfig ppo;                // [ppo]
  CurriculumConfig curriculum;  // [curriculum]
  AutoencoderConfig autoencoder;  // [autoencoder]
  DistillConfig distill;        // [distill]

  // [collect]
  int collect_episodes = 20;
  double collect_val_fraction = 0.1;
  std::uint64_t collect_seed = 1;

  // [eval]
  int eval_runs = 20;
  std::uint64_t eval_seed = 1;

  // [latency]
  int latency_frames = 1000;
  int latency_warmup = 100;

  // [output]
  std::string out_dir = "runs";

  EnvKind kind() const { return env_kind_from_string(env_kind); }
  EnvConfig env_config() const;
  void override_seeds(std::uint64_t seed);
  void validate() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::filesystem::path& file);
void write_resolved_config(const ExperimentConfig& cfg, std::ostream& os);

}  // namespace paf
