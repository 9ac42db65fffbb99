#include "paf/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "columns") return EnvKind::Columns;
  if (name == "office") return EnvKind::Office;
  if (name == "racing") return EnvKind::Racing;
  if (name == "racing_mw") return EnvKind::RacingMW;
  throw std::invalid_argument("unknown environment kind: " + name);
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::Columns: return "columns";
    case EnvKind::Office: return "office";
    case EnvKind::Racing: return "racing";
    case EnvKind::RacingMW: return "racing_mw";
  }
  return "?";
}

namespace {

constexpr double kWaypointClearance = 0.7;  // goal tolerance + collision radius margin

struct Arena {
  double half;    // half side of the xy square
  double height;  // z extent
  double u;       // scale / 20, nominal unit
};

World base_world(const Arena& a) {
  World w;
  w.bounds = {Vec3(-a.half, -a.half, 0.0), Vec3(a.half, a.half, a.height)};
  w.start_region = {Vec3(-a.half + 0.5 * a.u, -2.0 * a.u, 1.0 * a.u),
                    Vec3(-a.half + 1.5 * a.u, 2.0 * a.u, 2.5 * a.u)};
  w.goal_tolerance = 0.5;
  return w;
}

bool clears_keep_out(const World& w, const Obstacle& obs) {
  for (const auto& wp : w.waypoints) {
    if (obs.distance(wp) < kWaypointClearance) return false;
  }
  const Aabb sr = w.start_region;
  const Vec3 c = sr.center();
  // Keep the whole start region free with margin.
  Aabb inflated{sr.lo - Vec3::Constant(0.5), sr.hi + Vec3::Constant(0.5)};
  const Aabb obb = obs.bounding_box();
  const bool overlap = (inflated.lo.array() <= obb.hi.array()).all() &&
                       (inflated.hi.array() >= obb.lo.array()).all();
  if (overlap) return false;
  return obs.distance(c) >= kWaypointClearance;
}

void add_clutter_cylinders(World& w, Rng& rng, int count, const Arena& a, double x_lo,
                           double x_hi) {
  int placed = 0, tries = 0;
  while (placed < count && tries < count * 60) {
    ++tries;
    CylinderZ c;
    c.center = {uniform_real(rng, x_lo, x_hi),
                uniform_real(rng, -a.half + 1.2 * a.u, a.half - 1.2 * a.u)};
    c.radius = uniform_real(rng, 0.3, 0.6) * a.u;
    c.z_lo = 0.0;
    c.z_hi = a.height;
    Obstacle obs{Obstacle::Shape(c)};
    if (clears_keep_out(w, obs)) {
      w.obstacles.push_back(obs);
      ++placed;
    }
  }
}

World make_columns(Rng& rng, const Arena& a, double density) {
  World w = base_world(a);
  w.waypoints = {Vec3(a.half - 1.5 * a.u, 0.0, 1.75 * a.u)};
  const int n = static_cast<int>(std::lround(20.0 * density));
  add_clutter_cylinders(w, rng, n, a, -a.half + 3.0 * a.u, a.half - 3.0 * a.u);
  return w;
}

World make_office(Rng& rng, const Arena& a, double density) {
  World w = base_world(a);
  w.waypoints = {Vec3(a.half - 1.5 * a.u, 0.0, 1.6 * a.u)};
  const double thick = 0.3 * a.u;
  const double door_w = 1.8 * a.u;
  for (double wall_x : {-5.0 * a.u, 0.0, 5.0 * a.u}) {
    const double door_y = uniform_real(rng, -a.half + 2.5 * a.u, a.half - 2.5 * a.u);
    // Two full-height wall segments leaving a door gap.
    Aabb left{Vec3(wall_x - thick / 2, -a.half, 0.0),
              Vec3(wall_x + thick / 2, door_y - door_w / 2, a.height)};
    Aabb right{Vec3(wall_x - thick / 2, door_y + door_w / 2, 0.0),
               Vec3(wall_x + thick / 2, a.half, a.height)};
    w.obstacles.emplace_back(left);
    w.obstacles.emplace_back(right);
  }
  const int clutter = static_cast<int>(std::lround(6.0 * density));
  int placed = 0, tries = 0;
  while (placed < clutter && tries < clutter * 60) {
    ++tries;
    const double cx = uniform_real(rng, -3.8 * a.u, 3.8 * a.u);
    const double cy = uniform_real(rng, -a.half + 2.0 * a.u, a.half - 2.0 * a.u);
    const double wx = uniform_real(rng, 0.5, 1.0) * a.u;
    const double wy = uniform_real(rng, 0.5, 1.0) * a.u;
    const double h = uniform_real(rng, 1.2, 2.6) * a.u;
    // Keep clutter away from the wall planes so doors stay passable.
    if (std::abs(cx - (-5.0 * a.u)) < 1.6 * a.u || std::abs(cx) < 1.6 * a.u ||
        std::abs(cx - 5.0 * a.u) < 1.6 * a.u) {
      continue;
    }
    Aabb box{Vec3(cx - wx, cy - wy, 0.0), Vec3(cx + wx, cy + wy, h)};
    Obstacle obs{Obstacle::Shape(box)};
    if (clears_keep_out(w, obs)) {
      w.obstacles.push_back(obs);
      ++placed;
    }
  }
  return w;
}

void add_gate(World& w, const Arena& a, double x, double y, double gap) {
  const double pw = 0.4 * a.u;  // pillar cross-section
  Aabb left{Vec3(x - pw / 2, y - gap / 2 - pw, 0.0), Vec3(x + pw / 2, y - gap / 2, a.height)};
  Aabb right{Vec3(x - pw / 2, y + gap / 2, 0.0), Vec3(x + pw / 2, y + gap / 2 + pw, a.height)};
  w.obstacles.emplace_back(left);
  w.obstacles.emplace_back(right);
}

World make_racing(Rng& rng, const Arena& a, double density, bool multi_waypoint) {
  World w = base_world(a);
  const double gap = 2.2 * a.u;
  const double gate_z = 1.6 * a.u;
  std::vector<double> xs;
  if (multi_waypoint) {
    xs = {-5.0 * a.u, -1.0 * a.u, 3.0 * a.u, 7.0 * a.u};
  } else {
    xs = {-4.0 * a.u, 0.5 * a.u, 5.0 * a.u};
  }
  std::vector<Vec3> gate_centers;
  for (double x : xs) {
    const double y = uniform_real(rng, -3.0 * a.u, 3.0 * a.u);
    add_gate(w, a, x, y, gap);
    gate_centers.emplace_back(x, y, gate_z);
  }
  if (multi_waypoint) {
    w.waypoints = gate_centers;
    w.waypoints.emplace_back(a.half - 1.2 * a.u, gate_centers.back().y(), gate_z);
  } else {
    w.waypoints = {Vec3(a.half - 1.5 * a.u, gate_centers.back().y(), gate_z)};
  }
  const int clutter = static_cast<int>(std::lround(4.0 * density));
  add_clutter_cylinders(w, rng, clutter, a, -2.8 * a.u, 2.2 * a.u);
  return w;
}

}  // namespace

World generate_environment(EnvKind kind, std::uint64_t seed, double scale,
                           const EnvGenOptions& options) {
  if (!(scale > 0.0)) throw std::invalid_argument("generate_environment: scale must be positive");
  Arena arena{scale / 2.0, scale / 4.0, scale / 20.0};

  std::string last_error = "no attempt made";
  Vec3 last_wp = Vec3::Zero();
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, 0xE57 + static_cast<std::uint64_t>(attempt) * 0x9E37));
    World w;
    switch (kind) {
      case EnvKind::Columns: w = make_columns(rng, arena, options.density); break;
      case EnvKind::Office: w = make_office(rng, arena, options.density); break;
      case EnvKind::Racing: w = make_racing(rng, arena, options.density, false); break;
      case EnvKind::RacingMW: w = make_racing(rng, arena, options.density, true); break;
    }
    bool waypoints_clear = true;
    for (const auto& wp : w.waypoints) {
      if (w.clearance(wp) < options.collision_radius) waypoints_clear = false;
    }
    if (!waypoints_clear) {
      last_error = "waypoint clearance violated";
      continue;
    }
    try {
      const Roadmap rm = build_prm(w, options.prm_samples, options.prm_k,
                                   derive_seed(seed, 0xBEEF + attempt), options.collision_radius);
      shortest_path(rm, w, options.collision_radius);  // throws when disconnected
      return w;
    } catch (const RoadmapDisconnected& e) {
      last_error = e.what();
      last_wp = e.unreached_waypoint;
    }
  }
  throw RoadmapDisconnected("generate_environment: no reachable layout for " + to_string(kind) +
                                " after " + std::to_string(options.max_attempts) +
                                " attempts (last: " + last_error + ")",
                            last_wp);
}

Scenario make_scenario(EnvKind kind, std::uint64_t seed, double scale, double density,
                       double collision_radius) {
  EnvGenOptions gen;
  gen.density = density;
  gen.collision_radius = collision_radius;
  Scenario sc;
  sc.world = generate_environment(kind, seed, scale, gen);
  const Roadmap rm = build_prm(sc.world, 1000, 10, derive_seed(seed, 0x6A1D), collision_radius);
  sc.path = shortest_path(rm, sc.world, collision_radius);
  return sc;
}

}  // namespace paf
