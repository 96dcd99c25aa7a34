#include "voxsketch/resample.hpp"

#include <algorithm>
#include <optional>

namespace voxsketch {

namespace {

double lerp(double a, double b, double t) { return a + t * (b - a); }

/// Clamp-to-edge cell index and weight along one axis of length n.
inline void axis_cell(double u, int n, int& i0, double& t) {
  const double uc = std::clamp(u, 0.0, static_cast<double>(n - 1));
  i0 = std::min(static_cast<int>(uc), n - 2);
  t = uc - i0;
}

template <typename Get>
double trilinear(Get&& get, double u, double v, double w, int nu, int nv, int nw) {
  int i, j, k;
  double tu, tv, tw;
  axis_cell(u, nu, i, tu);
  axis_cell(v, nv, j, tv);
  axis_cell(w, nw, k, tw);
  const double c00 = lerp(get(i, j, k), get(i + 1, j, k), tu);
  const double c10 = lerp(get(i, j + 1, k), get(i + 1, j + 1, k), tu);
  const double c01 = lerp(get(i, j, k + 1), get(i + 1, j, k + 1), tu);
  const double c11 = lerp(get(i, j + 1, k + 1), get(i + 1, j + 1, k + 1), tu);
  return lerp(lerp(c00, c10, tv), lerp(c01, c11, tv), tw);
}

float unit_clamp(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

WorldGrid frustum_to_world_impl(const FrustumGrid& fr, const GridFrame& frame, int n,
                                const WorldGrid* background, float fill) {
  WorldGrid out(n, frame, fill);
  const Camera& cam = fr.camera();
  const int D = fr.depth(), H = fr.height(), W = fr.width();
  auto get = [&](int x, int y, int s) -> double { return fr.at(s, y, x); };
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 p = frame.voxel_center(n, i, j, k);
        const Projection pr = project(cam, p, W, H);
        const bool inside = pr.depth >= fr.near() && pr.depth <= fr.far() && pr.px >= 0.0 &&
                            pr.px <= W && pr.py >= 0.0 && pr.py <= H;
        if (!inside) {
          if (background) out.at(i, j, k) = background->at(i, j, k);
          continue;
        }
        const double s = (pr.depth - fr.near()) / fr.slice_spacing() - 0.5;
        out.at(i, j, k) = unit_clamp(trilinear(get, pr.px - 0.5, pr.py - 0.5, s, W, H, D));
      }
  return out;
}

}  // namespace

FrustumGrid make_frustum(const Camera& cam, const GridFrame& frame, int depth, int height,
                         int width) {
  cam.validate();
  const DepthRange range = frustum_depth_range(cam, frame);
  return FrustumGrid(depth, height, width, cam, range.near, range.far, 0.0f);
}

FrustumGrid resample_world_to_frustum(const WorldGrid& world, const Camera& cam, int depth,
                                      int height, int width) {
  const GridFrame& frame = world.frame();
  FrustumGrid out = make_frustum(cam, frame, depth, height, width);
  const int n = world.resolution();
  const double s = frame.voxel_size(n);
  const Vec3 lo = frame.lo(), hi = frame.hi();
  auto get = [&](int i, int j, int k) -> double { return world.at(i, j, k); };
  for (int sl = 0; sl < depth; ++sl)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const Vec3 p = out.cell_center(sl, y, x);
        if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z)
          continue;
        const double u = (p.x - lo.x) / s - 0.5, v = (p.y - lo.y) / s - 0.5,
                     w = (p.z - lo.z) / s - 0.5;
        out.at(sl, y, x) = unit_clamp(trilinear(get, u, v, w, n, n, n));
      }
  return out;
}

WorldGrid resample_frustum_to_world(const FrustumGrid& frustum, const GridFrame& frame,
                                    int resolution, float fill) {
  return frustum_to_world_impl(frustum, frame, resolution, nullptr, fill);
}

WorldGrid resample_frustum_to_world(const FrustumGrid& frustum, const WorldGrid& background) {
  return frustum_to_world_impl(frustum, background.frame(), background.resolution(), &background,
                               0.0f);
}

}  // namespace voxsketch
