#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxsketch/camera.hpp"
#include "voxsketch/grammar.hpp"
#include "voxsketch/grid.hpp"
#include "voxsketch/image.hpp"
#include "voxsketch/mesh.hpp"
#include "voxsketch/render.hpp"

namespace voxsketch {

struct DatasetConfig {
  std::string preset = "toy";
  int shape_count = 500;
  int test_count = -1;  // < 0: derived from train_fraction
  double train_fraction = 0.9;
  int drawing_size = 64;
  int grid_resolution = 16;
  int frustum_slices = 16;
  int render_resolution = 64;  // realization meshed for drawings
  double single_jitter = 0.1;  // in grid half-extents
  double updater_jitter = 0.15;
  bool symmetric = true;
  std::uint64_t seed = 0;
  GrammarConfig grammar;
  ContourConfig contours;

  static DatasetConfig toy();
  static DatasetConfig full();

  void validate() const;
  int resolved_test_count(int usable_shapes) const;
  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
};

struct ViewRecord {
  int view = 0;
  Camera camera;
  std::string drawing;  // relative to the dataset root
};

struct SampleRecord {
  std::string shape_id;
  std::string source;      // "grammar" or "mesh"
  std::string shape_path;  // program or OBJ, relative to the root
  std::string grid_path;
  std::uint64_t seed = 0;
  std::vector<ViewRecord> views;
};

struct DatasetManifest {
  DatasetConfig config;
  std::string split;  // "train" or "test"
  std::string root;   // directory the relative paths resolve against
  std::vector<SampleRecord> samples;

  std::string resolve(const std::string& rel) const;
};

/// JSON lines: the first line holds the config snapshot and split, then one
/// record per shape.
void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

nlohmann::json camera_to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);

enum class DatasetSource { Grammar, MeshDirectory };

struct BuildResult {
  DatasetManifest train;
  DatasetManifest test;
  std::vector<std::string> errors;  // per-file failures that were skipped
};

/// Writes shapes/, grids/, drawings/, manifest.train, manifest.test (and
/// errors.txt when some inputs failed) under out_dir. Throws when no shape
/// is usable.
BuildResult build_dataset(DatasetSource source, const std::string& mesh_dir,
                          const DatasetConfig& config, const std::string& out_dir);

/// Binary occupancy by parity ray casting of voxel centers along +z, in the
/// mesh's 120% frame. Throws "open mesh" when the mesh has boundary edges.
WorldGrid voxelize_mesh(const Mesh& mesh, int resolution);
WorldGrid voxelize_mesh_in_frame(const Mesh& mesh, const GridFrame& frame, int resolution);

/// In-memory geometry of one shape: the mesh drawings are rendered from and
/// the ground-truth world grid.
struct ShapeAssets {
  std::string shape_id;
  Mesh mesh;
  WorldGrid grid;
};

ShapeAssets load_shape(const DatasetManifest& manifest, const SampleRecord& record);

/// Geometry of a grammar program: the render-resolution realization meshed,
/// and the grid-resolution realization in the same frame.
ShapeAssets grammar_assets(const std::string& id, const ShapeProgram& program, const DatasetConfig& config);

enum class PairKind { SingleView, Updater };

struct SamplePair {
  LineDrawing drawing;
  FrustumGrid target;  // binary
  Camera camera;
  int view = 0;
  std::string shape_id;
};

/// Viewpoint policy: corner views for single-view pairs, all 13 for the updater.
int sample_view(PairKind kind, Rng& rng);

/// Draws a viewpoint by policy (corner views for single-view, all 13 for the
/// updater), jitters the camera, renders the drawing and builds the target.
SamplePair make_pair(const ShapeAssets& shape, PairKind kind, const DatasetConfig& config, Rng& rng);

/// Pair for a fixed camera.
SamplePair make_pair_for_camera(const ShapeAssets& shape, int view, const Camera& camera,
                                const DatasetConfig& config);

/// World grid resampled into the camera's frustum and re-binarized.
FrustumGrid target_frustum(const WorldGrid& grid, const Camera& camera, const DatasetConfig& config);

/// Camera used for a stored view: corner views get the perpendicular jitter,
/// accidental views the 3D one.
Camera stored_view_camera(int view, const GridFrame& frame, const DatasetConfig& config, Rng& rng);

}  // namespace voxsketch
