#pragma once

#include <vector>

#include "voxsketch/network.hpp"

namespace voxsketch {

struct ViewInput {
  LineDrawing drawing;
  Camera camera;
  int view = -1;  // catalog id when known
};

using ViewSet = std::vector<ViewInput>;

/// Per-sweep statistics. l2[k] is the RMS difference between the grids
/// after sweeps k and k-1 (sweep 0 = the single-view prediction); iou[k] is
/// filled when ground truth is supplied.
struct ConvergenceTrace {
  std::vector<double> l2;
  std::vector<double> iou;
  double initial_iou = -1.0;
};

struct FusionOptions {
  int iterations = 5;
  const WorldGrid* truth = nullptr;  // enables the IoU trace
};

struct FusionResult {
  WorldGrid grid;
  ConvergenceTrace trace;
};

/// Forward pass in the camera's frustum, resampled into an n^3 grid on
/// `frame`. Voxels outside the frustum are empty.
WorldGrid predict_single(const Model& model, const LineDrawing& drawing, const Camera& camera,
                         const GridFrame& frame, int resolution);

/// Single-view prediction from the first view, then `iterations` sweeps;
/// each sweep runs the updater once per view in order, replacing the world
/// grid after every view. Voxels outside a view's frustum keep their value.
FusionResult fuse(const Model& model, const ViewSet& views, const GridFrame& frame, int resolution,
                  const FusionOptions& options = {});

/// Sweeps starting from an existing grid (its frame and resolution are kept).
FusionResult fuse_from(const Model& model, const ViewSet& views, WorldGrid initial, const FusionOptions& options);

/// fuse() with a single view.
WorldGrid refine_single(const Model& model, const LineDrawing& drawing, const Camera& camera,
                        const GridFrame& frame, int resolution, int iterations);

}  // namespace voxsketch
