#include "voxsketch/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mc_tables.inc"

namespace voxsketch {

void Mesh::bounds(Vec3& lo, Vec3& hi) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  lo = {inf, inf, inf};
  hi = {-inf, -inf, -inf};
  for (const Vec3& v : vertices)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
}

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

MeshTopology mesh_topology(const Mesh& mesh) {
  MeshTopology t;
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(mesh.triangles.size() * 2);
  std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
  for (const Triangle& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      ++edges[edge_key(tri[e], tri[(e + 1) % 3])];
      used[tri[e]] = 1;
    }
  }
  t.faces = mesh.triangles.size();
  t.edges = edges.size();
  t.vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  for (const auto& [key, count] : edges) {
    if (count == 1) ++t.boundary_edges;
    if (count > 2) ++t.nonmanifold_edges;
  }
  return t;
}

double mesh_volume(const Mesh& mesh) {
  double v = 0.0;
  for (const Triangle& t : mesh.triangles)
    v += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
  return v / 6.0;
}

void remove_degenerate(Mesh& mesh) {
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  const double scale = std::max(norm(hi - lo), 1e-300);
  const double min_area2 = 1e-24 * scale * scale * scale * scale;
  std::vector<Triangle> kept;
  kept.reserve(mesh.triangles.size());
  for (const Triangle& t : mesh.triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    const Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                         mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    if (dot(n, n) <= min_area2) continue;
    kept.push_back(t);
  }
  std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
  std::vector<Vec3> verts;
  for (Triangle& t : kept)
    for (auto& idx : t) {
      if (remap[idx] < 0) {
        remap[idx] = static_cast<std::int64_t>(verts.size());
        verts.push_back(mesh.vertices[idx]);
      }
      idx = static_cast<std::uint32_t>(remap[idx]);
    }
  mesh.vertices = std::move(verts);
  mesh.triangles = std::move(kept);
}

Mesh marching_cubes(const WorldGrid& grid, float iso) {
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                       {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  const int n = grid.resolution();
  const GridFrame& frame = grid.frame();
  // Lattice of voxel centers padded by one empty layer: indices -1..n.
  const int m = n + 2;
  auto value = [&](int i, int j, int k) -> float {
    return grid.in_range(i, j, k) ? grid.at(i, j, k) : 0.0f;
  };
  auto position = [&](int i, int j, int k) {
    return frame.center +
           Vec3{frame.voxel_offset(n, i), frame.voxel_offset(n, j), frame.voxel_offset(n, k)};
  };
  std::vector<std::int32_t> edge_vertex(static_cast<std::size_t>(m) * m * m * 3, -1);
  Mesh mesh;

  for (int k = -1; k < n; ++k)
    for (int j = -1; j < n; ++j)
      for (int i = -1; i < n; ++i) {
        float vals[8];
        int index = 0;
        for (int c = 0; c < 8; ++c) {
          vals[c] = value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (vals[c] < iso) index |= 1 << c;
        }
        const int mask = mc::kEdgeTable[index];
        if (mask == 0) continue;
        std::int32_t local[12];
        for (int e = 0; e < 12; ++e) {
          if (!(mask & (1 << e))) continue;
          const int* c0 = kCorner[kEdge[e][0]];
          const int* c1 = kCorner[kEdge[e][1]];
          // Edge key: lower endpoint plus axis.
          int lo[3] = {i + std::min(c0[0], c1[0]), j + std::min(c0[1], c1[1]),
                       k + std::min(c0[2], c1[2])};
          const int axis = c0[0] != c1[0] ? 0 : (c0[1] != c1[1] ? 1 : 2);
          const std::size_t key =
              ((static_cast<std::size_t>(lo[2] + 1) * m + (lo[1] + 1)) * m + (lo[0] + 1)) * 3 +
              axis;
          if (edge_vertex[key] < 0) {
            const float a = vals[kEdge[e][0]], b = vals[kEdge[e][1]];
            double t = (static_cast<double>(iso) - a) / (static_cast<double>(b) - a);
            t = std::clamp(t, 1e-3, 1.0 - 1e-3);
            const Vec3 p0 = position(i + c0[0], j + c0[1], k + c0[2]);
            const Vec3 p1 = position(i + c1[0], j + c1[1], k + c1[2]);
            edge_vertex[key] = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(p0 + (p1 - p0) * t);
          }
          local[e] = edge_vertex[key];
        }
        for (int t = 0; mc::kTriTable[index][t] != -1; t += 3) {
          mesh.triangles.push_back({static_cast<std::uint32_t>(local[mc::kTriTable[index][t]]),
                                    static_cast<std::uint32_t>(local[mc::kTriTable[index][t + 1]]),
                                    static_cast<std::uint32_t>(local[mc::kTriTable[index][t + 2]])});
        }
      }
  remove_degenerate(mesh);
  return mesh;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size());
  for (const Triangle& t : mesh.triangles) {
    const Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                         mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (auto idx : t) normals[idx] += n;
  }
  for (Vec3& n : normals) n = normalized(n);
  return normals;
}

void bilateral_filter(Mesh& mesh, double voxel_size, const BilateralConfig& cfg) {
  if (cfg.iterations <= 0 || mesh.empty()) return;
  const std::size_t nv = mesh.vertices.size();
  std::vector<std::vector<std::uint32_t>> ring1(nv);
  for (const Triangle& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      ring1[t[e]].push_back(t[(e + 1) % 3]);
      ring1[t[e]].push_back(t[(e + 2) % 3]);
    }
  std::vector<std::vector<std::uint32_t>> ring2(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<std::uint32_t> r = ring1[v];
    for (auto q : ring1[v]) r.insert(r.end(), ring1[q].begin(), ring1[q].end());
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    r.erase(std::remove(r.begin(), r.end(), static_cast<std::uint32_t>(v)), r.end());
    ring2[v] = std::move(r);
  }
  const double ss = cfg.spatial_sigma_voxels * voxel_size;
  const double sn = cfg.normal_sigma_deg * M_PI / 180.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::vector<Vec3> normals = vertex_normals(mesh);
    std::vector<Vec3> moved = mesh.vertices;
    for (std::size_t v = 0; v < nv; ++v) {
      const Vec3& p = mesh.vertices[v];
      const Vec3& n = normals[v];
      double sum = 0.0, wsum = 0.0;
      for (auto q : ring2[v]) {
        const Vec3 d = mesh.vertices[q] - p;
        const double dist2 = dot(d, d);
        if (dist2 > 4.0 * ss * ss) continue;
        const double angle = std::acos(std::clamp(dot(n, normals[q]), -1.0, 1.0));
        const double w = std::exp(-dist2 / (2.0 * ss * ss)) * std::exp(-angle * angle / (2.0 * sn * sn));
        sum += w * dot(n, d);
        wsum += w;
      }
      if (wsum > 0.0) moved[v] = p + n * (sum / wsum);
    }
    mesh.vertices = std::move(moved);
  }
}

Mesh extract_mesh(const WorldGrid& grid, float iso, const BilateralConfig& cfg) {
  if (grid.occupied_count(iso) == 0) throw Error("extract_mesh: empty level set");
  Mesh mesh = marching_cubes(grid, iso);
  bilateral_filter(mesh, grid.frame().voxel_size(grid.resolution()), cfg);
  remove_degenerate(mesh);
  return mesh;
}

// --- primitive meshes ----------------------------------------------------------------

Mesh make_box(const Vec3& lo, const Vec3& hi) {
  Mesh m;
  for (int c = 0; c < 8; ++c)
    m.vertices.push_back({c & 1 ? hi.x : lo.x, c & 2 ? hi.y : lo.y, c & 4 ? hi.z : lo.z});
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

Mesh make_icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p = normalized(p);
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::uint64_t, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = edge_key(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(normalized((v[a] + v[b]) * 0.5));
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    for (const Triangle& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]),
                 c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  Mesh m;
  for (const Vec3& p : v) m.vertices.push_back(center + p * radius);
  m.triangles = std::move(f);
  return m;
}

// --- OBJ -------------------------------------------------------------------------------

std::string format_obj(const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  char buf[160];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const Triangle& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

Mesh parse_obj(std::string_view text) {
  Mesh mesh;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw Error("obj: bad vertex on line " + std::to_string(lineno));
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        long i = 0;
        try {
          i = std::stol(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw Error("obj: bad face index on line " + std::to_string(lineno));
        }
        if (i < 0) i = static_cast<long>(mesh.vertices.size()) + i + 1;
        if (i < 1 || i > static_cast<long>(mesh.vertices.size()))
          throw Error("obj: face index out of range on line " + std::to_string(lineno));
        idx.push_back(static_cast<std::uint32_t>(i - 1));
      }
      if (idx.size() < 3) throw Error("obj: face with fewer than 3 vertices on line " + std::to_string(lineno));
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << format_obj(mesh);
}

Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

}  // namespace voxsketch
