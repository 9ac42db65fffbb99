#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "paf/dynamics.hpp"

namespace paf {

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

// Axis-aligned box, lo < hi componentwise.
struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 center() const { return 0.5 * (lo + hi); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  // Signed distance to the box surface, negative inside.
  double sdf(const Vec3& p) const;
};

// Vertical cylinder spanning [z_lo, z_hi].
struct CylinderZ {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  double z_lo = 0.0;
  double z_hi = 1.0;
};

class Obstacle {
 public:
  using Shape = std::variant<Sphere, Aabb, CylinderZ>;

  explicit Obstacle(Shape shape);

  const Shape& shape() const { return shape_; }

  // Signed distance to the obstacle surface, negative inside.
  double distance(const Vec3& p) const;
  // Minimum unsigned distance between segment ab and the obstacle (0 when the
  // segment enters it). Evaluated by golden-section minimization of the
  // distance along the segment, which is convex for these primitives.
  double segment_distance(const Vec3& a, const Vec3& b) const;
  Aabb bounding_box() const;

 private:
  Shape shape_;
};

struct World {
  std::vector<Obstacle> obstacles;
  Aabb bounds;
  Aabb start_region;
  std::vector<Vec3> waypoints;  // final entry is the goal
  double goal_tolerance = 0.5;

  const Vec3& goal() const { return waypoints.back(); }

  // Euclidean distance from p to the nearest obstacle surface or bounds wall;
  // negative inside an obstacle or outside bounds.
  double clearance(const Vec3& p) const;
  bool is_collision(const Vec3& p, double collision_radius) const;
  // True iff the capsule of radius collision_radius around segment ab clears
  // every obstacle. Bounds are not checked: they are convex, so a capsule
  // with both end clearances >= radius stays inside.
  bool line_of_sight(const Vec3& a, const Vec3& b, double collision_radius) const;

  void validate() const;  // throws on broken invariants
};

void save_world(const World& world, std::ostream& os);
void save_world(const World& world, const std::filesystem::path& file);
World load_world(std::istream& is);
World load_world(const std::filesystem::path& file);

}  // namespace paf
