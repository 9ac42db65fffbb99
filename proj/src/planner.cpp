#include "paf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "paf/common.hpp"

namespace paf {

std::size_t Roadmap::edge_count() const {
  std::size_t n = 0;
  for (const auto& adj : edges) n += adj.size();
  return n / 2;
}

Roadmap build_prm(const World& world, int n_samples, int k, std::uint64_t seed,
                  double collision_radius) {
  if (n_samples < 2) throw std::invalid_argument("build_prm: n_samples must be >= 2");
  if (k < 1) throw std::invalid_argument("build_prm: k must be >= 1");

  Roadmap rm;
  const Vec3 start = world.start_region.center();
  rm.nodes.push_back(start);
  rm.mandatory.push_back(0);
  for (const auto& wp : world.waypoints) {
    rm.mandatory.push_back(static_cast<int>(rm.nodes.size()));
    rm.nodes.push_back(wp);
  }

  Rng rng(derive_seed(seed, 0x70726d));
  const Vec3 lo = world.bounds.lo, hi = world.bounds.hi;
  int attempts = 0;
  const int max_attempts = n_samples * 200;
  while (static_cast<int>(rm.nodes.size()) < n_samples + 1 + static_cast<int>(world.waypoints.size()) &&
         attempts < max_attempts) {
    ++attempts;
    Vec3 p(uniform_real(rng, lo.x(), hi.x()), uniform_real(rng, lo.y(), hi.y()),
           uniform_real(rng, lo.z(), hi.z()));
    if (world.clearance(p) >= collision_radius) rm.nodes.push_back(p);
  }

  const int n = static_cast<int>(rm.nodes.size());
  rm.edges.assign(n, {});

  // k nearest neighbors per node; an undirected edge is kept when either
  // endpoint selects the other and the connecting capsule is free.
  std::vector<std::pair<double, int>> dist_idx(n);
  std::set<std::pair<int, int>> candidates;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dist_idx[j] = {(rm.nodes[i] - rm.nodes[j]).norm(), j};
    }
    const int take = std::min(k + 1, n);  // +1 because node i itself is in the list
    std::partial_sort(dist_idx.begin(), dist_idx.begin() + take, dist_idx.end());
    for (int m = 0; m < take; ++m) {
      const int j = dist_idx[m].second;
      if (j != i) candidates.emplace(std::min(i, j), std::max(i, j));
    }
  }
  for (const auto& [i, j] : candidates) {
    if (world.line_of_sight(rm.nodes[i], rm.nodes[j], collision_radius)) {
      const double len = (rm.nodes[i] - rm.nodes[j]).norm();
      rm.edges[i].emplace_back(j, len);
      rm.edges[j].emplace_back(i, len);
    }
  }
  for (auto& adj : rm.edges) {
    std::sort(adj.begin(), adj.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  return rm;
}

namespace {

std::vector<int> dijkstra(const Roadmap& rm, int src, int dst) {
  const int n = static_cast<int>(rm.nodes.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == dst) break;
    for (const auto& [v, len] : rm.edges[u]) {
      const double nd = d + len;
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = u;
        pq.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[dst])) return {};
  std::vector<int> path;
  for (int v = dst; v != -1; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

GuidingPath make_guiding_path(std::vector<Vec3> vertices, const std::vector<Vec3>& waypoints) {
  GuidingPath path;
  // Drop zero-length duplicates so that arc lengths are strictly increasing.
  for (const auto& v : vertices) {
    if (path.vertices.empty() || (path.vertices.back() - v).norm() > 1e-12) {
      path.vertices.push_back(v);
    }
  }
  path.arc_length.resize(path.vertices.size());
  path.arc_length[0] = 0.0;
  for (std::size_t i = 1; i < path.vertices.size(); ++i) {
    path.arc_length[i] =
        path.arc_length[i - 1] + (path.vertices[i] - path.vertices[i - 1]).norm();
  }
  std::size_t search_from = 0;
  for (const auto& wp : waypoints) {
    int idx = -1;
    for (std::size_t i = search_from; i < path.vertices.size(); ++i) {
      if ((path.vertices[i] - wp).norm() < 1e-9) {
        idx = static_cast<int>(i);
        break;
      }
    }
    if (idx < 0) throw std::runtime_error("guiding path does not visit a world waypoint");
    path.waypoint_indices.push_back(idx);
    search_from = static_cast<std::size_t>(idx);
  }
  return path;
}

GuidingPath shortest_path(const Roadmap& roadmap, const World& world, double collision_radius,
                          bool shortcut) {
  if (roadmap.mandatory.size() < 2) {
    throw std::invalid_argument("shortest_path: roadmap lacks mandatory via nodes");
  }
  std::vector<Vec3> joined;
  for (std::size_t leg = 0; leg + 1 < roadmap.mandatory.size(); ++leg) {
    const int src = roadmap.mandatory[leg];
    const int dst = roadmap.mandatory[leg + 1];
    std::vector<int> leg_path = dijkstra(roadmap, src, dst);
    if (leg_path.empty()) {
      std::ostringstream msg;
      const Vec3& wp = roadmap.nodes[dst];
      msg << "disconnected: no roadmap path to waypoint (" << wp.x() << ", " << wp.y() << ", "
          << wp.z() << ")";
      throw RoadmapDisconnected(msg.str(), wp);
    }
    if (shortcut) {
      // Greedy pass: from each kept vertex jump to the farthest visible one.
      std::vector<int> cut;
      std::size_t i = 0;
      cut.push_back(leg_path[0]);
      while (i + 1 < leg_path.size()) {
        std::size_t j = leg_path.size() - 1;
        for (; j > i + 1; --j) {
          if (world.line_of_sight(roadmap.nodes[leg_path[i]], roadmap.nodes[leg_path[j]],
                                  collision_radius)) {
            break;
          }
        }
        cut.push_back(leg_path[j]);
        i = j;
      }
      leg_path = std::move(cut);
    }
    for (std::size_t i = (leg == 0 ? 0 : 1); i < leg_path.size(); ++i) {
      joined.push_back(roadmap.nodes[leg_path[i]]);
    }
  }
  std::vector<Vec3> via_points;
  for (std::size_t i = 1; i < roadmap.mandatory.size(); ++i) {
    via_points.push_back(roadmap.nodes[roadmap.mandatory[i]]);
  }
  return make_guiding_path(std::move(joined), via_points);
}

Vec3 GuidingPath::point_at(double s) const {
  if (vertices.size() == 1 || s <= 0.0) return vertices.front();
  if (s >= total_length()) return vertices.back();
  const auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - arc_length.begin());
  const double seg_len = arc_length[i] - arc_length[i - 1];
  const double t = (s - arc_length[i - 1]) / seg_len;
  return vertices[i - 1] + t * (vertices[i] - vertices[i - 1]);
}

double GuidingPath::project(const Vec3& p, double s_min) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = std::clamp(s_min, 0.0, total_length());
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    if (arc_length[i + 1] < s_min) continue;
    const Vec3& a = vertices[i];
    const Vec3& b = vertices[i + 1];
    const Vec3 ab = b - a;
    const double seg_len = arc_length[i + 1] - arc_length[i];
    double t = ab.squaredNorm() > 0.0 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
    // Restrict to the admissible part of this segment.
    const double t_lo = std::clamp((s_min - arc_length[i]) / seg_len, 0.0, 1.0);
    t = std::clamp(t, t_lo, 1.0);
    const double d2 = (p - (a + t * ab)).squaredNorm();
    if (d2 < best_d2 - 1e-15) {
      best_d2 = d2;
      best_s = arc_length[i] + t * seg_len;
    }
  }
  if (vertices.size() == 1) best_s = 0.0;
  return best_s;
}

double path_progress(const GuidingPath& path, const Vec3& p) { return path.project(p, 0.0); }

void ProgressCursor::reset(const GuidingPath& path, const Vec3& p) {
  s_ = path.project(p, 0.0);
  max_s_ = s_;
}

double ProgressCursor::update(const GuidingPath& path, const Vec3& p) {
  s_ = path.project(p, std::max(0.0, max_s_ - window_));
  max_s_ = std::max(max_s_, s_);
  return s_;
}

std::pair<Vec3, double> lookahead_point(const GuidingPath& path, const World& world,
                                        const Vec3& p, double collision_radius, double s_from,
                                        double sample_step) {
  const double total = path.total_length();
  const double s0 = std::clamp(s_from, 0.0, total);
  // Sample arc lengths on the fixed grid at or beyond s0, endpoint included,
  // scanned from the far end so the first visible sample wins.
  const long first = static_cast<long>(std::ceil(s0 / sample_step - 1e-9));
  const long last = static_cast<long>(std::floor(total / sample_step + 1e-9));
  {
    const Vec3 goal = path.vertices.back();
    if (world.line_of_sight(p, goal, collision_radius)) return {goal, total};
  }
  for (long i = last; i >= first; --i) {
    const double s = static_cast<double>(i) * sample_step;
    if (s >= total) continue;  // endpoint already tested
    if (s < s0) break;
    const Vec3 candidate = path.point_at(s);
    if (world.line_of_sight(p, candidate, collision_radius)) return {candidate, s};
  }
  return {path.point_at(s0), s0};
}

std::pair<Vec3, double> lookahead_point(const GuidingPath& path, const World& world,
                                        const Vec3& p, double collision_radius,
                                        double sample_step) {
  return lookahead_point(path, world, p, collision_radius, path_progress(path, p), sample_step);
}

}  // namespace paf
