#include "voxsketch/camera.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "voxsketch/grid.hpp"

namespace voxsketch {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

void Camera::validate() const {
  const Vec3 view = target - eye;
  if (norm(view) <= 0.0) throw Error("camera: eye coincides with target");
  if (norm(cross(normalized(view), normalized(up))) < 1e-9 || norm(up) <= 0.0)
    throw Error("camera: up vector is parallel to the view direction");
  if (!(fov_deg > 10.0 && fov_deg < 120.0)) throw Error("camera: fov outside (10, 120) degrees");
  if (!(aspect > 0.0)) throw Error("camera: aspect must be positive");
}

double Camera::tan_half_fov() const { return std::tan(0.5 * fov_deg * kDegToRad); }

Projection project(const Camera& cam, const Vec3& p, int width, int height) {
  const Vec3 f = cam.forward(), r = cam.right(), u = cam.camera_up();
  const Vec3 v = p - cam.eye;
  const double z = dot(v, f);
  const double t = cam.tan_half_fov();
  const double xn = dot(v, r) / (z * t * cam.aspect);
  const double yn = dot(v, u) / (z * t);
  return {0.5 * (xn + 1.0) * width, 0.5 * (1.0 - yn) * height, z};
}

Vec3 pixel_ray(const Camera& cam, double px, double py, int width, int height) {
  const double t = cam.tan_half_fov();
  const double xn = 2.0 * px / width - 1.0;
  const double yn = 1.0 - 2.0 * py / height;
  return cam.forward() + cam.right() * (xn * t * cam.aspect) + cam.camera_up() * (yn * t);
}

Vec3 unproject(const Camera& cam, double px, double py, double depth, int width, int height) {
  return cam.eye + pixel_ray(cam, px, py, width, height) * depth;
}

Projection project_orthographic(const Camera& cam, const Vec3& p, double half_height, int width,
                                int height) {
  const Vec3 v = p - cam.eye;
  const double xn = dot(v, cam.right()) / (half_height * cam.aspect);
  const double yn = dot(v, cam.camera_up()) / half_height;
  return {0.5 * (xn + 1.0) * width, 0.5 * (1.0 - yn) * height, dot(v, cam.forward())};
}

ViewpointId::ViewpointId(int value) : value_(value) {
  if (value < 0 || value >= kCount)
    throw Error("viewpoint id " + std::to_string(value) + " outside [0, 12]");
}

const std::array<ViewpointInfo, ViewpointId::kCount>& viewpoint_catalog() {
  static const std::array<ViewpointInfo, ViewpointId::kCount> catalog = {{
      {0, "corner-az45-el25", ViewKind::Corner, 45.0, 25.0},
      {1, "corner-az135-el25", ViewKind::Corner, 135.0, 25.0},
      {2, "corner-az225-el25", ViewKind::Corner, 225.0, 25.0},
      {3, "corner-az315-el25", ViewKind::Corner, 315.0, 25.0},
      {4, "corner-az45-el45", ViewKind::Corner, 45.0, 45.0},
      {5, "corner-az135-el45", ViewKind::Corner, 135.0, 45.0},
      {6, "corner-az225-el45", ViewKind::Corner, 225.0, 45.0},
      {7, "corner-az315-el45", ViewKind::Corner, 315.0, 45.0},
      {8, "front", ViewKind::Accidental, 270.0, 0.0},
      {9, "back", ViewKind::Accidental, 90.0, 0.0},
      {10, "left", ViewKind::Accidental, 180.0, 0.0},
      {11, "right", ViewKind::Accidental, 0.0, 0.0},
      {12, "top", ViewKind::Accidental, 0.0, 90.0},
  }};
  return catalog;
}

namespace {

Vec3 view_direction_from_center(const ViewpointInfo& info) {
  if (info.elevation_deg >= 90.0) return {0.0, 0.0, 1.0};
  const double a = info.azimuth_deg * kDegToRad, e = info.elevation_deg * kDegToRad;
  // Snap the axis-aligned views so their eyes lie exactly on the axes.
  const double ca = std::abs(std::cos(a)) < 1e-12 ? 0.0 : std::cos(a);
  const double sa = std::abs(std::sin(a)) < 1e-12 ? 0.0 : std::sin(a);
  return {std::cos(e) * ca, std::cos(e) * sa, std::sin(e)};
}

}  // namespace

Camera viewpoint_camera(ViewpointId id, const GridFrame& frame) {
  const ViewpointInfo& info = viewpoint_catalog()[id.value()];
  const Vec3 dir = view_direction_from_center(info);
  Camera cam;
  cam.target = frame.center;
  cam.eye = frame.center + dir * (kCameraDistanceFactor * frame.half_extent());
  cam.up = info.elevation_deg >= 90.0 ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0};
  cam.fov_deg = kDefaultFovDeg;
  cam.aspect = 1.0;
  return cam;
}

ViewpointId nearest_viewpoint(const Camera& cam, const GridFrame& frame, bool corner_only) {
  const Vec3 dir = normalized(cam.eye - frame.center);
  int best = 0;
  double best_dot = -2.0;
  const int limit = corner_only ? ViewpointId::kCornerCount : ViewpointId::kCount;
  for (int i = 0; i < limit; ++i) {
    const double d = dot(dir, view_direction_from_center(viewpoint_catalog()[i]));
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return ViewpointId(best);
}

Camera jitter_camera(const Camera& cam, JitterKind kind, double radius, Rng& rng) {
  if (radius <= 0.0) return cam;
  Vec3 offset;
  if (kind == JitterKind::SingleView) {
    const Vec3 r = cam.right(), u = cam.camera_up();
    double a, b;
    do {
      a = rng.uniform(-1.0, 1.0);
      b = rng.uniform(-1.0, 1.0);
    } while (a * a + b * b > 1.0);
    offset = (r * a + u * b) * radius;
    // Remove any residual component along the view axis.
    const Vec3 f = cam.forward();
    offset -= f * dot(offset, f);
  } else {
    double a, b, c;
    do {
      a = rng.uniform(-1.0, 1.0);
      b = rng.uniform(-1.0, 1.0);
      c = rng.uniform(-1.0, 1.0);
    } while (a * a + b * b + c * c > 1.0);
    offset = Vec3{a, b, c} * radius;
  }
  Camera out = cam;
  out.eye += offset;
  out.target += offset;
  return out;
}

DepthRange frustum_depth_range(const Camera& cam, const GridFrame& frame) {
  const double radius = frame.bounding_radius();
  if (norm(cam.eye - frame.center) <= radius)
    throw Error("camera inside the grid's bounding sphere: no valid near plane");
  const double center_depth = dot(frame.center - cam.eye, cam.forward());
  const DepthRange range{center_depth - radius, center_depth + radius};
  if (range.near <= 0.0) throw Error("grid bounding sphere crosses the camera plane");
  return range;
}

std::string format_camera(const Camera& cam) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "eye %.17g %.17g %.17g\ntarget %.17g %.17g %.17g\nup %.17g %.17g %.17g\n"
                "fov %.17g\naspect %.17g\n",
                cam.eye.x, cam.eye.y, cam.eye.z, cam.target.x, cam.target.y, cam.target.z,
                cam.up.x, cam.up.y, cam.up.z, cam.fov_deg, cam.aspect);
  return buf;
}

Camera parse_camera(std::string_view text) {
  std::istringstream in{std::string(text)};
  Camera cam;
  std::string key;
  int seen = 0;
  while (in >> key) {
    if (key == "eye") {
      in >> cam.eye.x >> cam.eye.y >> cam.eye.z;
      seen |= 1;
    } else if (key == "target") {
      in >> cam.target.x >> cam.target.y >> cam.target.z;
      seen |= 2;
    } else if (key == "up") {
      in >> cam.up.x >> cam.up.y >> cam.up.z;
      seen |= 4;
    } else if (key == "fov") {
      in >> cam.fov_deg;
      seen |= 8;
    } else if (key == "aspect") {
      in >> cam.aspect;
      seen |= 16;
    } else {
      throw Error("camera file: unknown key '" + key + "'");
    }
    if (!in) throw Error("camera file: malformed value for '" + key + "'");
  }
  if (seen != 31) throw Error("camera file: missing keys");
  cam.validate();
  return cam;
}

void write_camera(const std::string& path, const Camera& cam) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << format_camera(cam);
}

Camera read_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_camera(ss.str());
}

}  // namespace voxsketch
