#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "voxsketch/carve.hpp"
#include "voxsketch/dataset.hpp"
#include "voxsketch/fusion.hpp"

namespace voxsketch {

struct EvalConfig {
  int views = 1;
  int max_views = 4;  // compare: view counts 1..max_views
  int iterations = 5;
  std::uint64_t seed = 0;
  int max_shapes = -1;  // < 0: all shapes of the manifest
  int threads = 1;
  double concave_threshold = 0.93;  // visual_hull_iou below this: concave subset
  int hull_resolution = 64;
  nlohmann::json to_json() const;
};

struct EvalRow {
  std::string shape_id;
  std::string method;
  int views = 0;
  double iou = 0.0;
  double time_ms = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::set<std::string> concave;  // shape ids of the concave subset (compare only)
  nlohmann::json config;

  /// Mean and population standard deviation of IoU per (method, views),
  /// optionally restricted to a set of shapes.
  struct Aggregate {
    std::string method;
    int views;
    std::size_t count;
    double mean, stddev;
  };
  std::vector<Aggregate> aggregate(const std::set<std::string>* subset = nullptr) const;
  double mean_iou(const std::string& method, int views, const std::set<std::string>* subset = nullptr) const;
};

/// A test shape with its stored views decoded.
struct EvalShape {
  ShapeAssets assets;
  std::vector<ViewRecord> records;
  std::vector<LineDrawing> drawings;  // indexed by view id
};

std::vector<EvalShape> load_eval_shapes(const DatasetManifest& manifest, int max_shapes = -1);

/// First view drawn uniformly from the corner views, the rest uniformly
/// without replacement from the remaining viewpoints.
std::vector<int> select_views(int count, Rng& rng);

/// Per-shape fusion of `views` seeded random views, scored against ground truth.
EvalReport evaluate(const Model& model, const DatasetManifest& manifest, const EvalConfig& config);
EvalReport evaluate(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config);

/// Methods: "ours"; "carve-random" and "carve-orthogonal" from silhouettes
/// of the drawings; "-exact" variants from silhouettes of the true shape.
/// Random views are nested across view counts; orthogonal views are taken
/// in the order front, right, top, back. Also marks the concave subset.
EvalReport compare_carving(const Model& model, const DatasetManifest& manifest, const EvalConfig& config);
EvalReport compare_carving(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config);

inline constexpr int kOrthogonalViews[4] = {8, 11, 12, 9};

/// Silhouette of the shape's mesh (the ground-truth mask for a view).
Mask mesh_silhouette(const Mesh& mesh, const Camera& cam, int width, int height);

/// IoU between the mesh's voxelization at `resolution` and its visual hull
/// from exact orthographic silhouettes along the 13 viewpoint directions.
/// Shapes scoring low have hollows (or curvature) that carving cannot see.
double visual_hull_iou(const EvalShape& shape, int resolution = 64);

/// CSV with a `# config:` comment line. The timing column is optional so
/// reruns can be compared byte for byte.
std::string format_report_csv(const EvalReport& report, bool with_timing);
std::string format_aggregate_csv(const EvalReport& report, const std::set<std::string>* subset = nullptr);

struct TimingReport {
  std::vector<int> views;
  std::vector<double> median_ms;
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
  nlohmann::json config;
};

/// Median wall time of a full fuse() per view count 1..max_views.
TimingReport bench_timing(const Model& model, const EvalShape& shape, int max_views, int repetitions,
                          int iterations);
std::string format_timing_csv(const TimingReport& report);

/// Least squares line fit; r2 = 1 - SS_res / SS_tot.
void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept,
              double& r2);

struct ConvergenceRow {
  int views;
  int iteration;  // 0 = single-view prediction
  double mean_l2;  // NaN at iteration 0
  double mean_iou;
  std::size_t count;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  /// Per shape and view count: final l2 below the first.
  std::size_t settled = 0, traces = 0;
  nlohmann::json config;
  const ConvergenceRow& at(int views, int iteration) const;
};

ConvergenceReport convergence_report(const Model& model, const std::vector<EvalShape>& shapes,
                                     const std::vector<int>& view_counts, const EvalConfig& config);
std::string format_convergence_csv(const ConvergenceReport& report);

// --- robustness fixtures --------------------------------------------------------------------

/// Sinusoidal displacement of the strokes (amplitude in pixels).
LineDrawing perturb_wavy(const LineDrawing& d, double amplitude, double wavelength, Rng& rng);
/// Erases ink inside `holes` random discs centered on stroke pixels.
LineDrawing perturb_incomplete(const LineDrawing& d, int holes, double radius, Rng& rng);
/// Extends strokes along their local direction, so lines cross at corners.
LineDrawing perturb_overshot(const LineDrawing& d, int length);
/// Grows strokes by `radius` pixels.
LineDrawing perturb_thick(const LineDrawing& d, int radius);

/// Single-view IoU of each perturbation of view-0 drawings; rows use
/// methods "robust-clean", "robust-wavy", "robust-incomplete",
/// "robust-overshot", "robust-thick".
EvalReport robustness(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config);

}  // namespace voxsketch
