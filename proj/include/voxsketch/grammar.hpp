#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxsketch/common.hpp"
#include "voxsketch/grid.hpp"

namespace voxsketch {

enum class PrimitiveKind { Cuboid, Cylinder };
enum class CsgOp { Union, Subtract };

/// Axis-aligned CSG primitive in normalized shape space. For cylinders the
/// two half-extents orthogonal to `axis` are the (equal) radius.
struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Cuboid;
  CsgOp op = CsgOp::Union;
  Vec3 center{0.5, 0.5, 0.5};
  Vec3 half_extents{0.25, 0.25, 0.25};
  int axis = 2;  // 0 = x, 1 = y, 2 = z; meaningful for cylinders only

  /// Closed point membership, evaluated on the offset p - center.
  bool contains_offset(const Vec3& d) const;
  bool contains(const Vec3& p) const { return contains_offset(p - center); }
  void validate() const;

  bool operator==(const PrimitiveSpec&) const = default;
};

struct GrammarConfig {
  int min_primitives = 2;
  int max_primitives = 8;
  double scale_min = 0.15;  // full primitive size per axis, fraction of the unit volume
  double scale_max = 0.6;
  double displacement = 0.1;  // tangential contact displacement bound
  double subtract_probability = 0.25;
  int subtract_from_index = 2;  // zero-based: subtracts allowed from the third primitive on
  double cylinder_probability = 0.3;
  int preview_resolution = 32;
  int check_resolution = 64;
  double min_occupancy = 0.005;
  double max_occupancy = 0.9;
  int max_attempts = 10000;

  void validate() const;
  /// Stable fingerprint of every field, as 16 hex digits.
  std::string hash() const;
  std::string to_string() const;
};

struct ShapeProgram {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<PrimitiveSpec> primitives;

  void validate() const;
  bool operator==(const ShapeProgram&) const = default;
};

/// Grows a connected random shape; deterministic in (seed, config). Draws
/// that realize empty, disconnected (alone or after symmetrization) or with
/// out-of-band occupancy are rejected and the attempt counter advanced.
ShapeProgram generate_program(std::uint64_t seed, const GrammarConfig& config);

/// Appends the z-mirror of each primitive right after it (skipping copies
/// that are their own mirror), so the realization is symmetric about z = 0.5.
ShapeProgram symmetrize(const ShapeProgram& program);

/// Bounding box of the union primitives.
void program_bbox(const ShapeProgram& program, Vec3& lo, Vec3& hi);
GridFrame program_frame(const ShapeProgram& program);

/// Binary realization in the program's 120% frame. Throws "empty realization".
WorldGrid realize(const ShapeProgram& program, int resolution);

/// Binary realization in an arbitrary frame; may be empty.
WorldGrid realize_in_frame(const ShapeProgram& program, const GridFrame& frame, int resolution);

std::string format_program(const ShapeProgram& program);
ShapeProgram parse_program(std::string_view text);
void write_program(const std::string& path, const ShapeProgram& program);
ShapeProgram read_program(const std::string& path);

}  // namespace voxsketch
