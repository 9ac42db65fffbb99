#pragma once

#include <cstdint>
#include <string>

#include "paf/planner.hpp"
#include "paf/world.hpp"

namespace paf {

enum class EnvKind { Columns, Office, Racing, RacingMW };

EnvKind env_kind_from_string(const std::string& name);
std::string to_string(EnvKind kind);

struct EnvGenOptions {
  double density = 1.0;        // scales clutter counts (curriculum knob)
  double collision_radius = 0.2;
  int prm_samples = 800;       // reachability verification
  int prm_k = 10;
  int max_attempts = 20;
};

// Deterministic in (kind, seed, scale, options). Throws RoadmapDisconnected
// when no reachable layout is found within max_attempts.
World generate_environment(EnvKind kind, std::uint64_t seed, double scale = 20.0,
                           const EnvGenOptions& options = {});

// World plus its guiding path from the standard PRM (1000 samples, k = 10,
// derived seed). Every pipeline stage reconstructs the same scenario from
// (kind, seed, scale, density).
struct Scenario {
  World world;
  GuidingPath path;
};

Scenario make_scenario(EnvKind kind, std::uint64_t seed, double scale, double density,
                       double collision_radius);

}  // namespace paf
