#pragma once

#include <limits>
#include <vector>

#include "voxsketch/camera.hpp"
#include "voxsketch/grid.hpp"
#include "voxsketch/image.hpp"
#include "voxsketch/mesh.hpp"

namespace voxsketch {

inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

/// View-axis depth per pixel (+inf on background) and the flat normal of the
/// nearest face, oriented toward the camera (zero on background).
struct RenderMaps {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<Vec3> normal;

  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  const Vec3& normal_at(int x, int y) const { return normal[static_cast<std::size_t>(y) * width + x]; }
  bool hit(int x, int y) const { return depth_at(x, y) < kBackgroundDepth; }
};

/// Z-buffer rasterization sampled at pixel centers. Triangles reaching
/// behind the eye are skipped.
RenderMaps render_maps(const Mesh& mesh, const Camera& cam, int width, int height);

struct ContourConfig {
  double depth_threshold = 0.02;  // fraction of the depth range
  double normal_angle_deg = 25.0;
  int dilation_passes = 1;
};

/// Depth edges: a pixel is inked when linear extrapolation of inverse depth
/// from its own side misses a neighbor by more than the threshold (converted
/// to depth units), and it is the nearer of the two. This ignores smooth
/// depth ramps on slanted planes. Normal edges: the angle to the right or
/// lower neighbor exceeds the threshold. Each dilation pass grows strokes by
/// one pixel to the right and downward.
LineDrawing extract_contours(const RenderMaps& maps, double depth_range, const ContourConfig& cfg = {});

/// render_maps + extract_contours, with the depth range of the frame's
/// bounding sphere along the view axis.
LineDrawing draw_mesh(const Mesh& mesh, const Camera& cam, const GridFrame& frame, int width,
                      int height, const ContourConfig& cfg = {});

/// Flood fill of non-ink pixels from the image border; the mask is the
/// complement. Ink counts as ink where value >= 0.5.
Mask silhouette_mask(const LineDrawing& drawing);

Mask dilate(const Mask& mask, int radius);

/// Raycast of the 0.5 iso-surface of the trilinear occupancy field. `shade`
/// is Lambertian with a headlight and gradient normals; `hit` flags rays that
/// found the surface.
struct Preview {
  int width = 0;
  int height = 0;
  std::vector<float> shade;
  std::vector<std::uint8_t> hit;
};

Preview raycast_preview(const WorldGrid& grid, const Camera& cam, int width, int height,
                        float iso = kOccupancyThreshold);

/// Grayscale PNG: background white, surface in [20, 220].
std::string encode_preview_png(const Preview& preview);

}  // namespace voxsketch
