#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "paf/depth_camera.hpp"
#include "paf/policy.hpp"
#include "paf/rl_env.hpp"

namespace paf {

// (normalized depth image, teacher observation, deterministic teacher action)
// triples collected from frozen-teacher rollouts.
struct DepthDataset {
  CameraIntrinsics intrinsics;
  std::vector<std::vector<float>> images;  // normalized to [0, 1]
  std::vector<std::vector<float>> teacher_obs;
  std::vector<std::array<float, 4>> teacher_actions;
  std::vector<std::int32_t> episode;
  std::vector<std::int32_t> step;
  std::vector<std::uint32_t> train_indices;
  std::vector<std::uint32_t> val_indices;

  std::size_t size() const { return images.size(); }
};

// Rolls out the frozen teacher (mean action); records every visited state,
// keeping failed episodes up to the failure step. Deterministic in seed.
// Throws when the teacher never reaches the goal.
DepthDataset collect_depth_dataset(const PolicyHead& teacher, const World& world,
                                   const GuidingPath& path, const EnvConfig& config,
                                   const CameraIntrinsics& intrinsics, int n_episodes,
                                   std::uint64_t seed, int workers = 1,
                                   double val_fraction = 0.1);

// prefix.depth = concatenated depth blobs (metric), prefix.csv = frame index
// with observations and actions.
void save_dataset(const DepthDataset& dataset, const std::filesystem::path& prefix);
DepthDataset load_dataset(const std::filesystem::path& prefix);

}  // namespace paf
