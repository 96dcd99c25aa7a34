#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxsketch/common.hpp"
#include "voxsketch/grid.hpp"

namespace voxsketch {

using Triangle = std::array<std::uint32_t, 3>;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  void bounds(Vec3& lo, Vec3& hi) const;
};

struct MeshTopology {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;     // edges with one incident face
  std::size_t nonmanifold_edges = 0;  // edges with more than two
  long euler() const {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces);
  }
  bool watertight() const { return faces > 0 && boundary_edges == 0 && nonmanifold_edges == 0; }
};

/// Counts only referenced vertices.
MeshTopology mesh_topology(const Mesh& mesh);

/// Signed volume by the divergence theorem; positive for outward winding.
double mesh_volume(const Mesh& mesh);

/// Drops triangles with repeated indices or (near) zero area, and compacts
/// unreferenced vertices.
void remove_degenerate(Mesh& mesh);

/// Marching cubes over voxel centers with a virtual empty layer around the
/// grid, so every level set closes. Values >= iso are inside. Vertices are
/// shared through lattice edges; winding is outward.
Mesh marching_cubes(const WorldGrid& grid, float iso = kOccupancyThreshold);

struct BilateralConfig {
  int iterations = 2;
  double spatial_sigma_voxels = 1.0;
  double normal_sigma_deg = 30.0;
};

/// Feature-preserving smoothing: each vertex moves along its normal by a
/// weighted mean of neighbor offsets, weighted by a spatial Gaussian and a
/// Gaussian on the angle between normals. Neighbors are the two-ring.
void bilateral_filter(Mesh& mesh, double voxel_size, const BilateralConfig& cfg = {});

/// Marching cubes followed by the bilateral filter. Throws on an empty level set.
Mesh extract_mesh(const WorldGrid& grid, float iso = kOccupancyThreshold,
                  const BilateralConfig& cfg = {});

std::vector<Vec3> vertex_normals(const Mesh& mesh);

// --- primitive meshes -------------------------------------------------------------

Mesh make_box(const Vec3& lo, const Vec3& hi);
Mesh make_icosphere(const Vec3& center, double radius, int subdivisions);

// --- Wavefront OBJ ---------------------------------------------------------------

std::string format_obj(const Mesh& mesh);
/// Polygons are fan-triangulated; texture/normal indices are ignored.
Mesh parse_obj(std::string_view text);
void write_obj(const std::string& path, const Mesh& mesh);
Mesh read_obj(const std::string& path);

}  // namespace voxsketch
