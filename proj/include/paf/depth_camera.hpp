#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "paf/world.hpp"

namespace paf {

struct CameraIntrinsics {
  int width = 64;
  int height = 48;
  double hfov = 1.5707963267948966;  // horizontal field of view, rad
  double max_range = 10.0;           // m
  // Body-from-camera rotation. Default mounts the camera forward-looking with
  // zero pitch: camera z (optical axis) = body x, camera x = -body y (right),
  // camera y = -body z (down).
  Quat body_from_camera = forward_mount();

  static Quat forward_mount();
  double focal() const;  // pixels, square pixels assumed
  void validate() const;
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major, meters
  double max_range = 0.0;
  double timestamp = 0.0;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

// Casts one ray per pixel through the pinhole model; depth is the distance
// along the camera optical axis to the nearest primitive hit, clamped to
// max_range. Misses report max_range. Rows may be rendered in parallel.
DepthImage render_depth(const World& world, const Vec3& position, const Quat& orientation,
                        const CameraIntrinsics& intrinsics, int workers = 1);

// Nearest positive hit parameter along a unit-direction ray, or +inf.
double ray_obstacle_hit(const Obstacle& obstacle, const Vec3& origin, const Vec3& dir);

// Divides by max_range; values land in [0, 1].
std::vector<float> normalize_depth(const DepthImage& img);
DepthImage denormalize_depth(const std::vector<float>& values, const CameraIntrinsics& intr);

// 16-bit binary PGM, depth quantized over [0, max_range].
void write_pgm16(const DepthImage& img, const std::filesystem::path& file);

// Raw blob: u32 width, u32 height (little-endian), then row-major f32 depths.
void write_depth_blob(const DepthImage& img, std::ostream& os);
DepthImage read_depth_blob(std::istream& is, double max_range);

}  // namespace paf
