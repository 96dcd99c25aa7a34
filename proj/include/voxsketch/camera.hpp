#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>

#include "voxsketch/common.hpp"

namespace voxsketch {

struct GridFrame;

/// Perspective pinhole camera. Image y grows downward.
struct Camera {
  Vec3 eye{0.0, -4.0, 0.0};
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  double fov_deg = 45.0;  // vertical
  double aspect = 1.0;    // width / height

  /// Throws Error when eye == target, up is parallel to the view
  /// direction, or fov is outside (10, 120) degrees.
  void validate() const;

  Vec3 forward() const { return normalized(target - eye); }
  Vec3 right() const { return normalized(cross(forward(), up)); }
  Vec3 camera_up() const { return cross(right(), forward()); }
  double tan_half_fov() const;

  bool operator==(const Camera&) const = default;
};

/// Continuous pixel coordinates (pixel centers at +0.5) and view-axis depth.
struct Projection {
  double px = 0.0;
  double py = 0.0;
  double depth = 0.0;
};

Projection project(const Camera& cam, const Vec3& p, int width, int height);

/// World point at view-axis depth `depth` behind continuous pixel (px, py).
Vec3 unproject(const Camera& cam, double px, double py, double depth, int width, int height);

/// Direction through (px, py) scaled so that its forward component is 1.
Vec3 pixel_ray(const Camera& cam, double px, double py, int width, int height);

/// Orthographic projection onto the camera's image plane, using a view-plane
/// half-height in scene units.
Projection project_orthographic(const Camera& cam, const Vec3& p, double half_height, int width,
                                int height);

// --- viewpoint catalog -----------------------------------------------------

/// Discrete drawing viewpoint: 0-7 corner (3/4) views, 8-12 accidental views.
class ViewpointId {
 public:
  static constexpr int kCount = 13;
  static constexpr int kCornerCount = 8;

  explicit ViewpointId(int value);
  int value() const { return value_; }
  bool is_corner() const { return value_ < kCornerCount; }
  bool operator==(const ViewpointId&) const = default;

 private:
  int value_;
};

enum class ViewKind { Corner, Accidental };

struct ViewpointInfo {
  int id;
  std::string label;
  ViewKind kind;
  double azimuth_deg;
  double elevation_deg;
};

const std::array<ViewpointInfo, ViewpointId::kCount>& viewpoint_catalog();

/// Camera distance from the grid center, in grid half-extents.
inline constexpr double kCameraDistanceFactor = 4.0;
inline constexpr double kDefaultFovDeg = 45.0;

Camera viewpoint_camera(ViewpointId id, const GridFrame& frame);

/// Nearest catalog viewpoint to a camera orientation (angular distance of the
/// eye direction around the frame center).
ViewpointId nearest_viewpoint(const Camera& cam, const GridFrame& frame, bool corner_only);

enum class JitterKind { SingleView, Updater };

/// SingleView moves eye and target by a random vector in the disc of
/// `radius` orthogonal to the view direction; Updater moves both by a
/// random vector in the 3D ball of `radius`.
Camera jitter_camera(const Camera& cam, JitterKind kind, double radius, Rng& rng);

/// Depth range tangent to the frame's bounding sphere along the view axis.
/// Throws when the camera sits inside that sphere.
struct DepthRange {
  double near = 0.0;
  double far = 0.0;
};
DepthRange frustum_depth_range(const Camera& cam, const GridFrame& frame);

// --- camera files -----------------------------------------------------------

std::string format_camera(const Camera& cam);
Camera parse_camera(std::string_view text);
void write_camera(const std::string& path, const Camera& cam);
Camera read_camera(const std::string& path);

}  // namespace voxsketch
