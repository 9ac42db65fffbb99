#include "paf/depth_camera.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

Quat CameraIntrinsics::forward_mount() {
  Mat3 r;
  // columns: camera x, y, z axes expressed in the body frame
  r.col(0) = Vec3(0, -1, 0);
  r.col(1) = Vec3(0, 0, -1);
  r.col(2) = Vec3(1, 0, 0);
  return Quat(r);
}

double CameraIntrinsics::focal() const { return (width / 2.0) / std::tan(hfov / 2.0); }

void CameraIntrinsics::validate() const {
  if (width < 8 || height < 8) throw std::invalid_argument("camera: width/height must be >= 8");
  if (!(hfov > 0.0 && hfov < M_PI)) throw std::invalid_argument("camera: fov out of (0, pi)");
  if (!(max_range > 0.0)) throw std::invalid_argument("camera: max_range must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ray_sphere(const Sphere& s, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 > 0.0) return t0;
  const double t1 = -b + sq;
  if (t1 > 0.0) return 0.0;  // origin inside
  return kInf;
}

double ray_box(const Aabb& box, const Vec3& o, const Vec3& d) {
  double t_near = -kInf, t_far = kInf;
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < box.lo[i] || o[i] > box.hi[i]) return kInf;
      continue;
    }
    double t0 = (box.lo[i] - o[i]) / d[i];
    double t1 = (box.hi[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return kInf;
  }
  if (t_far < 0.0) return kInf;
  return t_near > 0.0 ? t_near : 0.0;
}

double ray_cylinder(const CylinderZ& cyl, const Vec3& o, const Vec3& d) {
  double best = kInf;
  // Lateral surface: 2-D quadratic in the xy-plane.
  const Eigen::Vector2d oc(o.x() - cyl.center.x(), o.y() - cyl.center.y());
  const Eigen::Vector2d dd(d.x(), d.y());
  const double a = dd.squaredNorm();
  if (a > 1e-300) {
    const double b = oc.dot(dd);
    const double c = oc.squaredNorm() - cyl.radius * cyl.radius;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > 0.0 && t < best) {
          const double z = o.z() + t * d.z();
          if (z >= cyl.z_lo && z <= cyl.z_hi) best = t;
        }
      }
    }
  }
  // Caps
  if (d.z() != 0.0) {
    for (double zc : {cyl.z_lo, cyl.z_hi}) {
      const double t = (zc - o.z()) / d.z();
      if (t > 0.0 && t < best) {
        const Eigen::Vector2d xy(o.x() + t * d.x() - cyl.center.x(),
                                 o.y() + t * d.y() - cyl.center.y());
        if (xy.squaredNorm() <= cyl.radius * cyl.radius) best = t;
      }
    }
  }
  // Origin inside the solid cylinder counts as an immediate hit.
  const bool inside_r = oc.squaredNorm() <= cyl.radius * cyl.radius;
  if (inside_r && o.z() >= cyl.z_lo && o.z() <= cyl.z_hi) return 0.0;
  return best;
}

}  // namespace

double ray_obstacle_hit(const Obstacle& obstacle, const Vec3& origin, const Vec3& dir) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) return ray_sphere(s, origin, dir);
        if constexpr (std::is_same_v<T, Aabb>) return ray_box(s, origin, dir);
        if constexpr (std::is_same_v<T, CylinderZ>) return ray_cylinder(s, origin, dir);
      },
      obstacle.shape());
}

DepthImage render_depth(const World& world, const Vec3& position, const Quat& orientation,
                        const CameraIntrinsics& intrinsics, int workers) {
  intrinsics.validate();
  if (std::abs(orientation.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("render_depth: orientation must be a unit quaternion");
  }
  DepthImage img;
  img.width = intrinsics.width;
  img.height = intrinsics.height;
  img.max_range = intrinsics.max_range;
  img.data.assign(static_cast<std::size_t>(img.width) * img.height, 0.0f);

  const double f = intrinsics.focal();
  const double cx = intrinsics.width / 2.0;
  const double cy = intrinsics.height / 2.0;
  const Mat3 world_from_camera =
      (orientation * intrinsics.body_from_camera).toRotationMatrix();

  parallel_for(static_cast<std::size_t>(img.height), workers,
               [&](std::size_t row_begin, std::size_t row_end, int) {
                 for (std::size_t y = row_begin; y < row_end; ++y) {
                   for (int x = 0; x < img.width; ++x) {
                     Vec3 d_cam((x + 0.5 - cx) / f, (static_cast<double>(y) + 0.5 - cy) / f, 1.0);
                     const double cam_z_per_len = 1.0 / d_cam.norm();
                     d_cam.normalize();
                     const Vec3 d_world = world_from_camera * d_cam;
                     double t_hit = kInf;
                     for (const auto& obs : world.obstacles) {
                       t_hit = std::min(t_hit, ray_obstacle_hit(obs, position, d_world));
                     }
                     double depth = intrinsics.max_range;
                     if (std::isfinite(t_hit)) {
                       depth = std::min(intrinsics.max_range, t_hit * cam_z_per_len);
                     }
                     img.data[y * img.width + x] = static_cast<float>(depth);
                   }
                 }
               });
  return img;
}

std::vector<float> normalize_depth(const DepthImage& img) {
  std::vector<float> out(img.data.size());
  const float inv = static_cast<float>(1.0 / img.max_range);
  for (std::size_t i = 0; i < img.data.size(); ++i) out[i] = img.data[i] * inv;
  return out;
}

DepthImage denormalize_depth(const std::vector<float>& values, const CameraIntrinsics& intr) {
  DepthImage img;
  img.width = intr.width;
  img.height = intr.height;
  img.max_range = intr.max_range;
  img.data.resize(values.size());
  const float r = static_cast<float>(intr.max_range);
  for (std::size_t i = 0; i < values.size(); ++i) img.data[i] = values[i] * r;
  return img;
}

void write_pgm16(const DepthImage& img, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write PGM: " + file.string());
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (float v : img.data) {
    const double q = std::clamp(v / img.max_range, 0.0, 1.0) * 65535.0;
    const auto u = static_cast<std::uint16_t>(std::lround(q));
    const unsigned char bytes[2] = {static_cast<unsigned char>(u >> 8),
                                    static_cast<unsigned char>(u & 0xff)};
    os.write(reinterpret_cast<const char*>(bytes), 2);
  }
}

void write_depth_blob(const DepthImage& img, std::ostream& os) {
  const std::uint32_t w = static_cast<std::uint32_t>(img.width);
  const std::uint32_t h = static_cast<std::uint32_t>(img.height);
  os.write(reinterpret_cast<const char*>(&w), 4);
  os.write(reinterpret_cast<const char*>(&h), 4);
  os.write(reinterpret_cast<const char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size() * sizeof(float)));
}

DepthImage read_depth_blob(std::istream& is, double max_range) {
  std::uint32_t w = 0, h = 0;
  is.read(reinterpret_cast<char*>(&w), 4);
  is.read(reinterpret_cast<char*>(&h), 4);
  if (!is) throw std::runtime_error("depth blob: truncated header");
  DepthImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.max_range = max_range;
  img.data.resize(static_cast<std::size_t>(w) * h);
  is.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!is) throw std::runtime_error("depth blob: truncated payload");
  return img;
}

}  // namespace paf
