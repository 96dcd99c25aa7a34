#include "voxsketch/render.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "voxsketch/resample.hpp"

namespace voxsketch {

RenderMaps render_maps(const Mesh& mesh, const Camera& cam, int width, int height) {
  cam.validate();
  if (width <= 0 || height <= 0) throw Error("render_maps: empty canvas");
  RenderMaps maps;
  maps.width = width;
  maps.height = height;
  maps.depth.assign(static_cast<std::size_t>(width) * height, kBackgroundDepth);
  maps.normal.assign(maps.depth.size(), Vec3{});

  const Vec3 f = cam.forward(), r = cam.right(), u = cam.camera_up();
  const double t = cam.tan_half_fov();
  struct Screen {
    double x, y, z;
  };
  std::vector<Screen> screen(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 v = mesh.vertices[i] - cam.eye;
    const double z = dot(v, f);
    screen[i] = {0.5 * (dot(v, r) / (z * t * cam.aspect) + 1.0) * width,
                 0.5 * (1.0 - dot(v, u) / (z * t)) * height, z};
  }

  for (const Triangle& tri : mesh.triangles) {
    const Screen& a = screen[tri[0]];
    const Screen& b = screen[tri[1]];
    const Screen& c = screen[tri[2]];
    if (a.z <= 1e-9 || b.z <= 1e-9 || c.z <= 1e-9) continue;
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (std::abs(area) < 1e-18) continue;
    const Vec3& p0 = mesh.vertices[tri[0]];
    Vec3 n = normalized(cross(mesh.vertices[tri[1]] - p0, mesh.vertices[tri[2]] - p0));
    if (dot(n, cam.eye - p0) < 0.0) n = -n;

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
    const double inv_area = 1.0 / area;
    const double tol = -1e-9;
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) * inv_area;
        const double w1 = ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < tol || w1 < tol || w2 < tol) continue;
        const double depth = 1.0 / (w0 / a.z + w1 / b.z + w2 / c.z);
        const std::size_t idx = static_cast<std::size_t>(y) * width + x;
        if (depth < maps.depth[idx]) {
          maps.depth[idx] = depth;
          maps.normal[idx] = n;
        }
      }
    }
  }
  return maps;
}

LineDrawing extract_contours(const RenderMaps& maps, double depth_range, const ContourConfig& cfg) {
  const int W = maps.width, H = maps.height;
  if (maps.depth.size() != static_cast<std::size_t>(W) * H || maps.normal.size() != maps.depth.size())
    throw Error("extract_contours: depth and normal maps differ in size");
  if (!(depth_range > 0.0)) throw Error("extract_contours: depth range must be positive");
  const double depth_thr = cfg.depth_threshold * depth_range;
  const double cos_thr = std::cos(cfg.normal_angle_deg * M_PI / 180.0);

  auto inv = [&](int x, int y) {
    const double d = maps.depth_at(x, y);
    return d < kBackgroundDepth ? 1.0 / d : 0.0;
  };
  auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < W && y < H; };

  LineDrawing out(W, H);
  static constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!maps.hit(x, y)) continue;
      const double q = inv(x, y);
      const double z = maps.depth_at(x, y);
      bool edge = false;
      for (const auto& d : kDirs) {
        const int nx = x + d[0], ny = y + d[1];
        if (!inside(nx, ny)) continue;
        const int bx = x - d[0], by = y - d[1];
        const double pred = inside(bx, by) && maps.hit(bx, by) ? 2.0 * q - inv(bx, by) : q;
        if ((pred - inv(nx, ny)) * z * z > depth_thr) {
          edge = true;
          break;
        }
      }
      if (!edge) {
        static constexpr int kForward[2][2] = {{1, 0}, {0, 1}};
        for (const auto& d : kForward) {
          const int nx = x + d[0], ny = y + d[1];
          if (!inside(nx, ny) || !maps.hit(nx, ny)) continue;
          if (dot(maps.normal_at(x, y), maps.normal_at(nx, ny)) < cos_thr) {
            edge = true;
            break;
          }
        }
      }
      if (edge) out.at(x, y) = 1.0f;
    }

  for (int pass = 0; pass < cfg.dilation_passes; ++pass) {
    LineDrawing grown = out;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float v = out.at(x, y);
        if (x > 0) v = std::max(v, out.at(x - 1, y));
        if (y > 0) v = std::max(v, out.at(x, y - 1));
        if (x > 0 && y > 0) v = std::max(v, out.at(x - 1, y - 1));
        grown.at(x, y) = v;
      }
    out = std::move(grown);
  }
  return out;
}

LineDrawing draw_mesh(const Mesh& mesh, const Camera& cam, const GridFrame& frame, int width,
                      int height, const ContourConfig& cfg) {
  const DepthRange range = frustum_depth_range(cam, frame);
  return extract_contours(render_maps(mesh, cam, width, height), range.far - range.near, cfg);
}

Mask silhouette_mask(const LineDrawing& drawing) {
  const int W = drawing.width, H = drawing.height;
  Mask exterior(W, H);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (drawing.at(x, y) < 0.5f && !exterior.at(x, y)) {
      exterior.at(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < W; ++x) {
    seed(x, 0);
    seed(x, H - 1);
  }
  for (int y = 0; y < H; ++y) {
    seed(0, y);
    seed(W - 1, y);
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < W) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < H) seed(x, y + 1);
  }
  Mask mask(W, H);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = exterior.data[i] ? 0 : 1;
  return mask;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  Mask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (out.in_range(x + dx, y + dy)) out.at(x + dx, y + dy) = 1;
    }
  return out;
}

Preview raycast_preview(const WorldGrid& grid, const Camera& cam, int width, int height, float iso) {
  cam.validate();
  Preview pv;
  pv.width = width;
  pv.height = height;
  pv.shade.assign(static_cast<std::size_t>(width) * height, 0.0f);
  pv.hit.assign(pv.shade.size(), 0);
  if (grid.occupied_count(iso) == 0) return pv;

  const int n = grid.resolution();
  const GridFrame& frame = grid.frame();
  const double s = frame.voxel_size(n);
  const Vec3 lo = frame.lo();
  // The zero-padded field is supported on the cube grown by half a voxel.
  const Vec3 box_lo = lo - Vec3{0.5 * s, 0.5 * s, 0.5 * s};
  const Vec3 box_hi = frame.hi() + Vec3{0.5 * s, 0.5 * s, 0.5 * s};
  auto field = [&](const Vec3& p) {
    return grid.sample_zero_padded((p.x - lo.x) / s - 0.5, (p.y - lo.y) / s - 0.5, (p.z - lo.z) / s - 0.5);
  };
  const double step = 0.2 * s;

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 d = normalized(pixel_ray(cam, x + 0.5, y + 0.5, width, height));
      double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
          if (cam.eye[a] < box_lo[a] || cam.eye[a] > box_hi[a]) miss = true;
          continue;
        }
        double ta = (box_lo[a] - cam.eye[a]) / d[a], tb = (box_hi[a] - cam.eye[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (miss || t0 >= t1) continue;
      double prev_t = t0;
      if (field(cam.eye + d * t0) >= iso) {
        // Ray starts inside the surface (only when the eye is in the grid).
        pv.hit[static_cast<std::size_t>(y) * width + x] = 1;
        pv.shade[static_cast<std::size_t>(y) * width + x] = 1.0f;
        continue;
      }
      for (double t = t0 + step; t <= t1 + step; t += step) {
        const double v = field(cam.eye + d * t);
        if (v >= iso) {
          double a = prev_t, b = t;
          for (int it = 0; it < 8; ++it) {
            const double m = 0.5 * (a + b);
            (field(cam.eye + d * m) >= iso ? b : a) = m;
          }
          const Vec3 p = cam.eye + d * b;
          const double h = 0.5 * s;
          const Vec3 g{field(p + Vec3{h, 0, 0}) - field(p - Vec3{h, 0, 0}),
                       field(p + Vec3{0, h, 0}) - field(p - Vec3{0, h, 0}),
                       field(p + Vec3{0, 0, h}) - field(p - Vec3{0, 0, h})};
          double shade = 1.0;
          if (norm(g) > 1e-12) shade = 0.15 + 0.85 * std::max(0.0, dot(normalized(-g), -d));
          const std::size_t idx = static_cast<std::size_t>(y) * width + x;
          pv.hit[idx] = 1;
          pv.shade[idx] = static_cast<float>(shade);
          break;
        }
        prev_t = t;
      }
    }
  return pv;
}

std::string encode_preview_png(const Preview& pv) {
  std::vector<std::uint8_t> gray(pv.shade.size(), 255);
  for (std::size_t i = 0; i < gray.size(); ++i)
    if (pv.hit[i]) gray[i] = static_cast<std::uint8_t>(std::lround(20.0 + 200.0 * std::clamp(pv.shade[i], 0.0f, 1.0f)));
  return encode_png_gray(pv.width, pv.height, gray);
}

}  // namespace voxsketch
