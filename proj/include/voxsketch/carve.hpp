#pragma once

#include <vector>

#include "voxsketch/camera.hpp"
#include "voxsketch/grid.hpp"
#include "voxsketch/image.hpp"

namespace voxsketch {

enum class ProjectionMode { Perspective, Orthographic };

struct CarveView {
  Mask mask;
  Camera camera;
};

struct CarveJob {
  std::vector<CarveView> views;
  ProjectionMode mode = ProjectionMode::Perspective;
  GridFrame frame;
  int resolution = 16;
  // Orthographic window half-height in world units; <= 0 uses the frame's
  // bounding radius so any view direction sees the whole cube.
  double ortho_half_height = 0.0;

  double resolved_half_height() const {
    return ortho_half_height > 0.0 ? ortho_half_height : frame.bounding_radius();
  }
};

/// Continuous pixel position of a world point under the job's projection.
Projection carve_project(const CarveJob& job, const Camera& cam, const Vec3& p, int width, int height);

/// Binary grid: a voxel stays occupied iff its center projects inside every
/// mask. Centers off-image or behind a camera are carved.
WorldGrid carve(const CarveJob& job);

/// Silhouette of a voxel grid: the union of the projected footprints
/// (convex hulls of the 8 projected corners) of its occupied voxels. Every
/// occupied voxel center lies inside, so carving with these masks never
/// removes a true voxel.
Mask exact_mask(const WorldGrid& grid, const Camera& cam, int width, int height, ProjectionMode mode,
                double ortho_half_height = 0.0);

/// Masks recovered from line drawings (filled outer contour, dilated by
/// `dilation` pixels to cover stroke thickness), then carve().
struct DrawingView {
  LineDrawing drawing;
  Camera camera;
};
WorldGrid carve_from_drawings(const std::vector<DrawingView>& views, ProjectionMode mode, const GridFrame& frame,
                              int resolution, int dilation = 1);

ProjectionMode parse_projection_mode(const std::string& text);

}  // namespace voxsketch
