#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "paf/world.hpp"

namespace paf {

class RoadmapDisconnected : public std::runtime_error {
 public:
  RoadmapDisconnected(const std::string& msg, Vec3 unreached)
      : std::runtime_error(msg), unreached_waypoint(std::move(unreached)) {}
  Vec3 unreached_waypoint;
};

struct Roadmap {
  std::vector<Vec3> nodes;
  // Undirected adjacency: edges[i] holds (neighbor index, edge length).
  std::vector<std::vector<std::pair<int, double>>> edges;
  // Mandatory node indices: start first, then world waypoints in order.
  std::vector<int> mandatory;

  std::size_t edge_count() const;
};

// Uniform rejection-sampled collision-free nodes plus start/waypoints as
// mandatory nodes; k-nearest-neighbor connection subject to line of sight.
// Deterministic in seed. The start node is the center of the start region.
Roadmap build_prm(const World& world, int n_samples, int k, std::uint64_t seed,
                  double collision_radius = 0.2);

struct GuidingPath {
  std::vector<Vec3> vertices;
  std::vector<double> arc_length;     // cumulative, arc_length[0] == 0
  std::vector<int> waypoint_indices;  // vertex index of each world waypoint, in order

  double total_length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }
  Vec3 point_at(double s) const;
  // Closest-point arc length restricted to s >= s_min.
  double project(const Vec3& p, double s_min = 0.0) const;
};

GuidingPath make_guiding_path(std::vector<Vec3> vertices, const std::vector<Vec3>& waypoints);

// Dijkstra between consecutive via points (start, waypoints...) followed by a
// greedy line-of-sight shortcut pass that never removes via vertices.
GuidingPath shortest_path(const Roadmap& roadmap, const World& world,
                          double collision_radius = 0.2, bool shortcut = true);

// Stateless closest-point projection.
double path_progress(const GuidingPath& path, const Vec3& p);

// Episode-local projection with monotone hysteresis: the returned arc length
// never drops more than `window` below the episode maximum.
class ProgressCursor {
 public:
  explicit ProgressCursor(double window = 0.5) : window_(window) {}
  void reset(const GuidingPath& path, const Vec3& p);
  double update(const GuidingPath& path, const Vec3& p);
  double s() const { return s_; }
  double max_s() const { return max_s_; }

 private:
  double window_;
  double s_ = 0.0;
  double max_s_ = 0.0;
};

// Farthest path sample (0.1 m discretization at or beyond s_from, endpoint
// included) visible from p through a collision-free capsule; falls back to
// the closest path point when nothing is visible. Returns (point, arc length).
std::pair<Vec3, double> lookahead_point(const GuidingPath& path, const World& world,
                                        const Vec3& p, double collision_radius,
                                        double s_from, double sample_step = 0.1);
// Spec-facing overload: s_from = path_progress(p).
std::pair<Vec3, double> lookahead_point(const GuidingPath& path, const World& world,
                                        const Vec3& p, double collision_radius = 0.2,
                                        double sample_step = 0.1);

}  // namespace paf
