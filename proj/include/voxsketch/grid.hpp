#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxsketch/camera.hpp"
#include "voxsketch/common.hpp"

namespace voxsketch {

/// Cubical world-space frame of a voxel grid.
struct GridFrame {
  Vec3 center{};
  double extent = 2.0;  // full side length

  double half_extent() const { return 0.5 * extent; }
  double voxel_size(int n) const { return extent / n; }
  double bounding_radius() const { return std::sqrt(3.0) * half_extent(); }
  Vec3 lo() const { return center - Vec3{half_extent(), half_extent(), half_extent()}; }
  Vec3 hi() const { return center + Vec3{half_extent(), half_extent(), half_extent()}; }

  /// Offset of voxel index i from the center along one axis. Exactly
  /// antisymmetric: offset(n, i) == -offset(n, n - 1 - i).
  double voxel_offset(int n, int i) const {
    return (static_cast<double>(2 * i + 1 - n) * 0.5) * voxel_size(n);
  }
  Vec3 voxel_center(int n, int i, int j, int k) const {
    return center + Vec3{voxel_offset(n, i), voxel_offset(n, j), voxel_offset(n, k)};
  }

  /// Frames agree to a relative tolerance (grid files store 32-bit floats).
  bool matches(const GridFrame& o, double rel_tol = 1e-6) const;

  bool operator==(const GridFrame&) const = default;
};

/// Frame whose extent is 120% of the largest side of the box [lo, hi].
GridFrame frame_for_bbox(const Vec3& lo, const Vec3& hi);

inline constexpr double kFrameMargin = 1.2;
inline constexpr float kOccupancyThreshold = 0.5f;

/// N^3 occupancy probabilities, x fastest.
class WorldGrid {
 public:
  WorldGrid() = default;
  WorldGrid(int n, GridFrame frame, float fill = 0.0f);

  int resolution() const { return n_; }
  const GridFrame& frame() const { return frame_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * n_ + j) * n_ + i;
  }
  float at(int i, int j, int k) const { return values_[index(i, j, k)]; }
  float& at(int i, int j, int k) { return values_[index(i, j, k)]; }
  bool in_range(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < n_ && j < n_ && k < n_;
  }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  /// Count of values >= threshold (ties occupied).
  std::size_t occupied_count(float threshold = kOccupancyThreshold) const;
  WorldGrid thresholded(float threshold = kOccupancyThreshold) const;

  /// Trilinear sample at continuous voxel coordinates (voxel centers at
  /// integers) with zero padding outside the lattice.
  double sample_zero_padded(double u, double v, double w) const;

  bool operator==(const WorldGrid&) const = default;

 private:
  int n_ = 0;
  GridFrame frame_{};
  std::vector<float> values_;
};

/// View-aligned lattice of D depth slices of H x W pixels, slice-major
/// (the layout of the network's output channels).
class FrustumGrid {
 public:
  FrustumGrid() = default;
  FrustumGrid(int depth, int height, int width, Camera camera, double near, double far,
              float fill = 0.0f);

  int depth() const { return d_; }
  int height() const { return h_; }
  int width() const { return w_; }
  const Camera& camera() const { return camera_; }
  double near() const { return near_; }
  double far() const { return far_; }
  double slice_spacing() const { return (far_ - near_) / d_; }
  double slice_depth(int s) const { return near_ + (s + 0.5) * slice_spacing(); }

  std::size_t index(int s, int y, int x) const {
    return (static_cast<std::size_t>(s) * h_ + y) * w_ + x;
  }
  float at(int s, int y, int x) const { return values_[index(s, y, x)]; }
  float& at(int s, int y, int x) { return values_[index(s, y, x)]; }

  /// World position of cell (s, y, x)'s center.
  Vec3 cell_center(int s, int y, int x) const;

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

 private:
  int d_ = 0, h_ = 0, w_ = 0;
  Camera camera_{};
  double near_ = 0.0, far_ = 1.0;
  std::vector<float> values_;
};

/// |{a>=t} & {b>=t}| / |{a>=t} | {b>=t}|, 1 when both sets are empty.
/// Throws on resolution or frame mismatch.
double iou(const WorldGrid& a, const WorldGrid& b, float threshold = kOccupancyThreshold);

/// Number of 6-connected components of cells flagged nonzero in an n^3 mask.
int count_components_6(std::span<const std::uint8_t> mask, int n);

/// Root-mean-square difference of two grids on the same lattice.
double rms_difference(const WorldGrid& a, const WorldGrid& b);

// --- VXG1 voxel grid files ---------------------------------------------------

std::string encode_vxg(const WorldGrid& grid);
WorldGrid decode_vxg(std::string_view bytes);
void write_vxg(const std::string& path, const WorldGrid& grid);
WorldGrid read_vxg(const std::string& path);

}  // namespace voxsketch
