#include "voxsketch/carve.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "voxsketch/render.hpp"

namespace voxsketch {

Projection carve_project(const CarveJob& job, const Camera& cam, const Vec3& p, int width, int height) {
  if (job.mode == ProjectionMode::Orthographic)
    return project_orthographic(cam, p, job.resolved_half_height(), width, height);
  return project(cam, p, width, height);
}

WorldGrid carve(const CarveJob& job) {
  if (job.views.empty()) throw Error("carve: no views");
  for (const CarveView& v : job.views) {
    v.camera.validate();
    if (v.mask.width <= 0 || v.mask.height <= 0) throw Error("carve: empty mask");
  }
  const int n = job.resolution;
  WorldGrid out(n, job.frame, 0.0f);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 c = job.frame.voxel_center(n, i, j, k);
        bool keep = true;
        for (const CarveView& v : job.views) {
          const Projection pr = carve_project(job, v.camera, c, v.mask.width, v.mask.height);
          if (job.mode == ProjectionMode::Perspective && !(pr.depth > 0.0)) {
            keep = false;
            break;
          }
          const double fx = std::floor(pr.px), fy = std::floor(pr.py);
          if (!(fx >= 0.0 && fy >= 0.0 && fx < v.mask.width && fy < v.mask.height) ||
              !v.mask.data[static_cast<std::size_t>(fy) * v.mask.width + static_cast<std::size_t>(fx)]) {
            keep = false;
            break;
          }
        }
        out.at(i, j, k) = keep ? 1.0f : 0.0f;
      }
  return out;
}

namespace {

struct P2 {
  double x, y;
};

double cross(const P2& o, const P2& a, const P2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

/// Counter-clockwise hull (monotone chain).
std::vector<P2> convex_hull(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<P2> h(2 * pts.size());
  std::size_t k = 0;
  for (const P2& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    const P2& p = pts[i];
    while (k >= t && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  h.resize(k > 1 ? k - 1 : k);
  return h;
}

}  // namespace

Mask exact_mask(const WorldGrid& grid, const Camera& cam, int width, int height, ProjectionMode mode,
                double ortho_half_height) {
  cam.validate();
  CarveJob job;
  job.mode = mode;
  job.frame = grid.frame();
  job.ortho_half_height = ortho_half_height;
  Mask mask(width, height);
  const int n = grid.resolution();
  const double hv = 0.5 * grid.frame().voxel_size(n);
  std::vector<P2> corners(8);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (grid.at(i, j, k) < kOccupancyThreshold) continue;
        const Vec3 c = grid.frame().voxel_center(n, i, j, k);
        for (int q = 0; q < 8; ++q) {
          const Vec3 p = c + Vec3{(q & 1) ? hv : -hv, (q & 2) ? hv : -hv, (q & 4) ? hv : -hv};
          const Projection pr = carve_project(job, cam, p, width, height);
          corners[q] = {pr.px, pr.py};
        }
        const std::vector<P2> hull = convex_hull(corners);
        double x0 = hull[0].x, x1 = x0, y0 = hull[0].y, y1 = y0;
        for (const P2& p : hull) {
          x0 = std::min(x0, p.x);
          x1 = std::max(x1, p.x);
          y0 = std::min(y0, p.y);
          y1 = std::max(y1, p.y);
        }
        const int px0 = std::max(0, static_cast<int>(std::floor(x0 - 0.5)));
        const int px1 = std::min(width - 1, static_cast<int>(std::ceil(x1 - 0.5)));
        const int py0 = std::max(0, static_cast<int>(std::floor(y0 - 0.5)));
        const int py1 = std::min(height - 1, static_cast<int>(std::ceil(y1 - 0.5)));
        for (int y = py0; y <= py1; ++y)
          for (int x = px0; x <= px1; ++x) {
            const P2 s{x + 0.5, y + 0.5};
            bool inside = true;
            for (std::size_t e = 0; e < hull.size() && inside; ++e)
              inside = cross(hull[e], hull[(e + 1) % hull.size()], s) >= 0.0;
            if (inside) mask.data[static_cast<std::size_t>(y) * width + x] = 1;
          }
      }
  return mask;
}

WorldGrid carve_from_drawings(const std::vector<DrawingView>& views, ProjectionMode mode, const GridFrame& frame,
                              int resolution, int dilation) {
  if (views.empty()) throw Error("carve: no drawings");
  CarveJob job;
  job.mode = mode;
  job.frame = frame;
  job.resolution = resolution;
  for (const DrawingView& v : views) job.views.push_back({dilate(silhouette_mask(v.drawing), dilation), v.camera});
  return carve(job);
}

ProjectionMode parse_projection_mode(const std::string& text) {
  if (text == "perspective") return ProjectionMode::Perspective;
  if (text == "orthographic") return ProjectionMode::Orthographic;
  throw Error("unknown projection mode '" + text + "' (expected perspective or orthographic)");
}

}  // namespace voxsketch
