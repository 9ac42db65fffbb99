#include "paf/world.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

double Aabb::sdf(const Vec3& p) const {
  const Vec3 c = center();
  const Vec3 half = 0.5 * (hi - lo);
  const Vec3 d = (p - c).cwiseAbs() - half;
  const double outside = d.cwiseMax(0.0).norm();
  const double inside = std::min(d.maxCoeff(), 0.0);
  return outside + inside;
}

namespace {

double sphere_sdf(const Sphere& s, const Vec3& p) {
  return (p - s.center).norm() - s.radius;
}

double cylinder_sdf(const CylinderZ& c, const Vec3& p) {
  const double dr = (Eigen::Vector2d(p.x(), p.y()) - c.center).norm() - c.radius;
  const double dz = std::max(c.z_lo - p.z(), p.z() - c.z_hi);
  const double outside = Eigen::Vector2d(std::max(dr, 0.0), std::max(dz, 0.0)).norm();
  const double inside = std::min(std::max(dr, dz), 0.0);
  return outside + inside;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Golden-section minimization of the unsigned distance along the segment.
// dist(x, primitive) is convex in x for convex primitives, hence convex in t.
template <typename F>
double min_on_segment(const F& unsigned_dist, const Vec3& a, const Vec3& b) {
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double t1 = hi - kInvPhi * (hi - lo);
  double t2 = lo + kInvPhi * (hi - lo);
  double f1 = unsigned_dist(a + t1 * (b - a));
  double f2 = unsigned_dist(a + t2 * (b - a));
  for (int i = 0; i < 72 && hi - lo > 1e-13; ++i) {
    if (f1 <= f2) {
      hi = t2;
      t2 = t1;
      f2 = f1;
      t1 = hi - kInvPhi * (hi - lo);
      f1 = unsigned_dist(a + t1 * (b - a));
    } else {
      lo = t1;
      t1 = t2;
      f1 = f2;
      t2 = lo + kInvPhi * (hi - lo);
      f2 = unsigned_dist(a + t2 * (b - a));
    }
  }
  const double fm = unsigned_dist(a + 0.5 * (lo + hi) * (b - a));
  return std::min({f1, f2, fm, unsigned_dist(a), unsigned_dist(b)});
}

}  // namespace

Obstacle::Obstacle(Shape shape) : shape_(std::move(shape)) {
  if (const auto* s = std::get_if<Sphere>(&shape_)) {
    if (!(s->radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  } else if (const auto* b = std::get_if<Aabb>(&shape_)) {
    if (!((b->lo.array() < b->hi.array()).all())) {
      throw std::invalid_argument("box min must be below max componentwise");
    }
  } else if (const auto* c = std::get_if<CylinderZ>(&shape_)) {
    if (!(c->radius > 0.0)) throw std::invalid_argument("cylinder radius must be positive");
    if (!(c->z_lo < c->z_hi)) throw std::invalid_argument("cylinder z-range must be nonempty");
  }
}

double Obstacle::distance(const Vec3& p) const {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) return sphere_sdf(s, p);
        if constexpr (std::is_same_v<T, Aabb>) return s.sdf(p);
        if constexpr (std::is_same_v<T, CylinderZ>) return cylinder_sdf(s, p);
      },
      shape_);
}

double Obstacle::segment_distance(const Vec3& a, const Vec3& b) const {
  if (const auto* s = std::get_if<Sphere>(&shape_)) {
    return std::max(0.0, point_segment_distance(s->center, a, b) - s->radius);
  }
  const auto unsigned_dist = [this](const Vec3& p) { return std::max(0.0, distance(p)); };
  return min_on_segment(unsigned_dist, a, b);
}

Aabb Obstacle::bounding_box() const {
  return std::visit(
      [](const auto& s) -> Aabb {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return {s.center - Vec3::Constant(s.radius), s.center + Vec3::Constant(s.radius)};
        } else if constexpr (std::is_same_v<T, Aabb>) {
          return s;
        } else {
          return {Vec3(s.center.x() - s.radius, s.center.y() - s.radius, s.z_lo),
                  Vec3(s.center.x() + s.radius, s.center.y() + s.radius, s.z_hi)};
        }
      },
      shape_);
}

double World::clearance(const Vec3& p) const {
  // Distance to the bounds wall: positive inside, -(distance to box) outside.
  double best = -bounds.sdf(p);
  for (const auto& obs : obstacles) {
    best = std::min(best, obs.distance(p));
  }
  return best;
}

bool World::is_collision(const Vec3& p, double collision_radius) const {
  return clearance(p) < collision_radius;
}

bool World::line_of_sight(const Vec3& a, const Vec3& b, double collision_radius) const {
  const Vec3 seg_lo = a.cwiseMin(b).array() - collision_radius;
  const Vec3 seg_hi = a.cwiseMax(b).array() + collision_radius;
  for (const auto& obs : obstacles) {
    const Aabb box = obs.bounding_box();
    if ((seg_lo.array() > box.hi.array()).any() || (seg_hi.array() < box.lo.array()).any()) {
      continue;
    }
    if (obs.segment_distance(a, b) < collision_radius) return false;
  }
  return true;
}

void World::validate() const {
  if (waypoints.empty()) throw std::invalid_argument("world has no waypoints");
  if (!bounds.contains(start_region.lo) || !bounds.contains(start_region.hi)) {
    throw std::invalid_argument("start region outside bounds");
  }
  for (const auto& wp : waypoints) {
    if (!bounds.contains(wp)) throw std::invalid_argument("waypoint outside bounds");
  }
}

namespace {

void write_vec(std::ostream& os, const Vec3& v) {
  os << ' ' << fmt_f64(v.x()) << ' ' << fmt_f64(v.y()) << ' ' << fmt_f64(v.z());
}

Vec3 read_vec(std::istringstream& is, const std::string& line) {
  Vec3 v;
  if (!(is >> v.x() >> v.y() >> v.z())) {
    throw std::runtime_error("world file: malformed line: " + line);
  }
  return v;
}

}  // namespace

void save_world(const World& world, std::ostream& os) {
  os << "# paf world\n";
  os << "bounds";
  write_vec(os, world.bounds.lo);
  write_vec(os, world.bounds.hi);
  os << '\n';
  os << "start_region";
  write_vec(os, world.start_region.lo);
  write_vec(os, world.start_region.hi);
  os << '\n';
  os << "goal_tolerance " << fmt_f64(world.goal_tolerance) << '\n';
  for (const auto& obs : world.obstacles) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            os << "sphere";
            write_vec(os, s.center);
            os << ' ' << fmt_f64(s.radius) << '\n';
          } else if constexpr (std::is_same_v<T, Aabb>) {
            os << "box";
            write_vec(os, s.lo);
            write_vec(os, s.hi);
            os << '\n';
          } else {
            os << "cylinder " << fmt_f64(s.center.x()) << ' ' << fmt_f64(s.center.y()) << ' '
               << fmt_f64(s.radius) << ' ' << fmt_f64(s.z_lo) << ' ' << fmt_f64(s.z_hi) << '\n';
          }
        },
        obs.shape());
  }
  for (const auto& wp : world.waypoints) {
    os << "waypoint";
    write_vec(os, wp);
    os << '\n';
  }
}

void save_world(const World& world, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write world file: " + file.string());
  save_world(world, os);
}

World load_world(std::istream& is) {
  World world;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "bounds") {
      world.bounds.lo = read_vec(ls, line);
      world.bounds.hi = read_vec(ls, line);
    } else if (tag == "start_region") {
      world.start_region.lo = read_vec(ls, line);
      world.start_region.hi = read_vec(ls, line);
    } else if (tag == "goal_tolerance") {
      if (!(ls >> world.goal_tolerance)) throw std::runtime_error("bad goal_tolerance: " + line);
    } else if (tag == "sphere") {
      Sphere s;
      s.center = read_vec(ls, line);
      if (!(ls >> s.radius)) throw std::runtime_error("bad sphere: " + line);
      world.obstacles.emplace_back(s);
    } else if (tag == "box") {
      Aabb b;
      b.lo = read_vec(ls, line);
      b.hi = read_vec(ls, line);
      world.obstacles.emplace_back(b);
    } else if (tag == "cylinder") {
      CylinderZ c;
      if (!(ls >> c.center.x() >> c.center.y() >> c.radius >> c.z_lo >> c.z_hi)) {
        throw std::runtime_error("bad cylinder: " + line);
      }
      world.obstacles.emplace_back(c);
    } else if (tag == "waypoint") {
      world.waypoints.push_back(read_vec(ls, line));
    } else {
      throw std::runtime_error("world file: unknown tag '" + tag + "'");
    }
  }
  world.validate();
  return world;
}

World load_world(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open world file: " + file.string());
  return load_world(is);
}

}  // namespace paf
