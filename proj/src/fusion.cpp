#include "voxsketch/fusion.hpp"

#include "voxsketch/resample.hpp"

namespace voxsketch {

WorldGrid predict_single(const Model& model, const LineDrawing& drawing, const Camera& camera,
                         const GridFrame& frame, int resolution) {
  if (!model.single) throw Error("predict_single: model has no single-view network");
  const FrustumGrid fr = predict_frustum(*model.single, drawing, camera, frame);
  return resample_frustum_to_world(fr, frame, resolution, 0.0f);
}

FusionResult fuse_from(const Model& model, const ViewSet& views, WorldGrid initial, const FusionOptions& options) {
  if (views.empty()) throw Error("fuse: no views");
  if (options.iterations < 0) throw Error("fuse: negative iteration count");
  if (options.iterations > 0 && !model.updater) throw Error("fuse: model has no updater network");
  FusionResult out;
  out.grid = std::move(initial);
  if (options.truth) out.trace.initial_iou = iou(out.grid, *options.truth);
  const GridFrame frame = out.grid.frame();
  const int d = model.slices();
  for (int it = 0; it < options.iterations; ++it) {
    const WorldGrid before = out.grid;
    for (const ViewInput& v : views) {
      const FrustumGrid injected = resample_world_to_frustum(out.grid, v.camera, d, d, d);
      const FrustumGrid fr = predict_frustum(*model.updater, v.drawing, v.camera, frame, &injected);
      out.grid = resample_frustum_to_world(fr, out.grid);
    }
    out.trace.l2.push_back(rms_difference(out.grid, before));
    if (options.truth) out.trace.iou.push_back(iou(out.grid, *options.truth));
  }
  return out;
}

FusionResult fuse(const Model& model, const ViewSet& views, const GridFrame& frame, int resolution,
                  const FusionOptions& options) {
  if (views.empty()) throw Error("fuse: no views");
  return fuse_from(model, views, predict_single(model, views.front().drawing, views.front().camera, frame, resolution),
                   options);
}

WorldGrid refine_single(const Model& model, const LineDrawing& drawing, const Camera& camera,
                        const GridFrame& frame, int resolution, int iterations) {
  FusionOptions opt;
  opt.iterations = iterations;
  return fuse(model, ViewSet{ViewInput{drawing, camera, -1}}, frame, resolution, opt).grid;
}

}  // namespace voxsketch
