#include "voxsketch/grid.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxsketch {

bool GridFrame::matches(const GridFrame& o, double rel_tol) const {
  const double scale = std::max({std::abs(extent), std::abs(o.extent), 1e-12});
  return std::abs(extent - o.extent) <= rel_tol * scale &&
         norm(center - o.center) <= rel_tol * std::max(scale, norm(center));
}

GridFrame frame_for_bbox(const Vec3& lo, const Vec3& hi) {
  const double side = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(side > 0.0)) throw Error("frame_for_bbox: degenerate bounding box");
  return GridFrame{(lo + hi) * 0.5, kFrameMargin * side};
}

WorldGrid::WorldGrid(int n, GridFrame frame, float fill) : n_(n), frame_(frame) {
  if (n <= 0) throw Error("world grid resolution must be positive");
  if (!(frame.extent > 0.0)) throw Error("world grid extent must be positive");
  values_.assign(static_cast<std::size_t>(n) * n * n, fill);
}

std::size_t WorldGrid::occupied_count(float threshold) const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [&](float v) { return v >= threshold; }));
}

WorldGrid WorldGrid::thresholded(float threshold) const {
  WorldGrid out = *this;
  for (float& v : out.values_) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

double WorldGrid::sample_zero_padded(double u, double v, double w) const {
  const int i0 = static_cast<int>(std::floor(u));
  const int j0 = static_cast<int>(std::floor(v));
  const int k0 = static_cast<int>(std::floor(w));
  if (i0 < -1 || j0 < -1 || k0 < -1 || i0 >= n_ || j0 >= n_ || k0 >= n_) return 0.0;
  const double fu = u - i0, fv = v - j0, fw = w - k0;
  auto get = [&](int i, int j, int k) -> double { return in_range(i, j, k) ? at(i, j, k) : 0.0; };
  double acc = 0.0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const double wgt = (di ? fu : 1.0 - fu) * (dj ? fv : 1.0 - fv) * (dk ? fw : 1.0 - fw);
        if (wgt != 0.0) acc += wgt * get(i0 + di, j0 + dj, k0 + dk);
      }
  return acc;
}

FrustumGrid::FrustumGrid(int depth, int height, int width, Camera camera, double near, double far,
                         float fill)
    : d_(depth), h_(height), w_(width), camera_(camera), near_(near), far_(far) {
  if (depth < 4 || height < 4 || width < 4) throw Error("frustum grid dimensions must be >= 4");
  if (!(near < far) || !(near > 0.0)) throw Error("frustum grid requires 0 < near < far");
  camera_.validate();
  values_.assign(static_cast<std::size_t>(d_) * h_ * w_, fill);
}

Vec3 FrustumGrid::cell_center(int s, int y, int x) const {
  return unproject(camera_, x + 0.5, y + 0.5, slice_depth(s), w_, h_);
}

double iou(const WorldGrid& a, const WorldGrid& b, float threshold) {
  if (a.resolution() != b.resolution()) throw Error("iou: grid resolution mismatch");
  if (!a.frame().matches(b.frame())) throw Error("iou: grid frame mismatch");
  std::size_t inter = 0, uni = 0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const bool oa = va[i] >= threshold, ob = vb[i] >= threshold;
    inter += (oa && ob);
    uni += (oa || ob);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

int count_components_6(std::span<const std::uint8_t> mask, int n) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  int components = 0;
  const std::size_t nn = static_cast<std::size_t>(n);
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      const std::size_t i = c % nn, j = (c / nn) % nn, k = c / (nn * nn);
      auto visit = [&](std::size_t q) {
        if (mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      };
      if (i > 0) visit(c - 1);
      if (i + 1 < nn) visit(c + 1);
      if (j > 0) visit(c - nn);
      if (j + 1 < nn) visit(c + nn);
      if (k > 0) visit(c - nn * nn);
      if (k + 1 < nn) visit(c + nn * nn);
    }
  }
  return components;
}

double rms_difference(const WorldGrid& a, const WorldGrid& b) {
  if (a.size() != b.size()) throw Error("rms_difference: grid size mismatch");
  double acc = 0.0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    acc += d * d;
  }
  return va.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(va.size()));
}

// --- VXG1 ---------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw Error("VXG1: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += 4;
  return v;
}
float get_f32(std::string_view bytes, std::size_t& pos) {
  return std::bit_cast<float>(get_u32(bytes, pos));
}

}  // namespace

std::string encode_vxg(const WorldGrid& grid) {
  std::string out = "VXG1";
  out.reserve(4 + 12 + 16 + grid.size() * 4);
  const auto n = static_cast<std::uint32_t>(grid.resolution());
  put_u32(out, n);
  put_u32(out, n);
  put_u32(out, n);
  put_f32(out, static_cast<float>(grid.frame().center.x));
  put_f32(out, static_cast<float>(grid.frame().center.y));
  put_f32(out, static_cast<float>(grid.frame().center.z));
  put_f32(out, static_cast<float>(grid.frame().extent));
  for (float v : grid.values()) put_f32(out, v);
  return out;
}

WorldGrid decode_vxg(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "VXG1") throw Error("VXG1: bad magic");
  std::size_t pos = 4;
  const std::uint32_t nx = get_u32(bytes, pos), ny = get_u32(bytes, pos), nz = get_u32(bytes, pos);
  if (nx != ny || ny != nz || nx == 0 || nx > 1024)
    throw Error("VXG1: only cubical grids up to 1024^3 are supported");
  GridFrame frame;
  frame.center.x = get_f32(bytes, pos);
  frame.center.y = get_f32(bytes, pos);
  frame.center.z = get_f32(bytes, pos);
  frame.extent = get_f32(bytes, pos);
  WorldGrid grid(static_cast<int>(nx), frame);
  if (bytes.size() != pos + grid.size() * 4) throw Error("VXG1: payload size mismatch");
  for (float& v : grid.values()) {
    v = get_f32(bytes, pos);
    if (!(v >= 0.0f && v <= 1.0f)) throw Error("VXG1: value outside [0, 1]");
  }
  return grid;
}

void write_vxg(const std::string& path, const WorldGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::string bytes = encode_vxg(grid);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

WorldGrid read_vxg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_vxg(ss.str());
}

}  // namespace voxsketch
