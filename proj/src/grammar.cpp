#include "voxsketch/grammar.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace voxsketch {

namespace {

/// Coordinates are kept on a dyadic lattice so mirroring (1 - z) and the
/// offset arithmetic in realize() are exact.
double quantize(double v) { return std::round(v * 65536.0) / 65536.0; }

const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }

}  // namespace

bool PrimitiveSpec::contains_offset(const Vec3& d) const {
  if (kind == PrimitiveKind::Cuboid)
    return std::abs(d.x) <= half_extents.x && std::abs(d.y) <= half_extents.y &&
           std::abs(d.z) <= half_extents.z;
  if (std::abs(d[axis]) > half_extents[axis]) return false;
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  const double ru = d[u] / half_extents[u], rv = d[v] / half_extents[v];
  return ru * ru + rv * rv <= 1.0;
}

void PrimitiveSpec::validate() const {
  if (!(half_extents.x > 0.0 && half_extents.y > 0.0 && half_extents.z > 0.0))
    throw Error("primitive half-extents must be strictly positive");
  if (axis < 0 || axis > 2) throw Error("primitive axis must be 0, 1 or 2");
  if (kind == PrimitiveKind::Cylinder) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    if (half_extents[u] != half_extents[v]) throw Error("cylinder radii must be equal");
  }
  for (int a = 0; a < 3; ++a)
    if (center[a] + half_extents[a] < 0.0 || center[a] - half_extents[a] > 1.0)
      throw Error("primitive does not intersect the unit working volume");
}

void GrammarConfig::validate() const {
  if (min_primitives < 1) throw Error("grammar: min_primitives must be >= 1");
  if (max_primitives < min_primitives) throw Error("grammar: max_primitives < min_primitives");
  if (!(scale_min > 0.0 && scale_max > scale_min)) throw Error("grammar: bad scale range");
  if (!(displacement >= 0.0)) throw Error("grammar: displacement must be >= 0");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(subtract_probability) || !prob(cylinder_probability))
    throw Error("grammar: probabilities must lie in [0, 1]");
  if (preview_resolution < 8 || check_resolution < 8) throw Error("grammar: resolution < 8");
  if (!(min_occupancy >= 0.0 && max_occupancy > min_occupancy && max_occupancy <= 1.0))
    throw Error("grammar: bad occupancy band");
  if (max_attempts < 1) throw Error("grammar: max_attempts must be >= 1");
}

std::string GrammarConfig::to_string() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "primitives=%d..%d scale=%.17g..%.17g displacement=%.17g subtract=%.17g@%d "
                "cylinder=%.17g preview=%d check=%d occupancy=%.17g..%.17g attempts=%d",
                min_primitives, max_primitives, scale_min, scale_max, displacement,
                subtract_probability, subtract_from_index, cylinder_probability,
                preview_resolution, check_resolution, min_occupancy, max_occupancy, max_attempts);
  return buf;
}

std::string GrammarConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(to_string()));
  return buf;
}

void ShapeProgram::validate() const {
  if (primitives.empty()) throw Error("shape program has no primitives");
  if (primitives.front().op != CsgOp::Union) throw Error("first primitive must be a union");
  for (const auto& p : primitives) p.validate();
}

void program_bbox(const ShapeProgram& program, Vec3& lo, Vec3& hi) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  lo = {inf, inf, inf};
  hi = {-inf, -inf, -inf};
  for (const auto& p : program.primitives) {
    if (p.op != CsgOp::Union) continue;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p.center[a] - p.half_extents[a]);
      hi[a] = std::max(hi[a], p.center[a] + p.half_extents[a]);
    }
  }
}

GridFrame program_frame(const ShapeProgram& program) {
  Vec3 lo, hi;
  program_bbox(program, lo, hi);
  return frame_for_bbox(lo, hi);
}

WorldGrid realize_in_frame(const ShapeProgram& program, const GridFrame& frame, int resolution) {
  if (resolution < 8) throw Error("realize: resolution must be >= 8");
  WorldGrid grid(resolution, frame, 0.0f);
  const int n = resolution;
  std::vector<double> offsets(n);
  for (int i = 0; i < n; ++i) offsets[i] = frame.voxel_offset(n, i);
  const double s = frame.voxel_size(n);

  for (const auto& prim : program.primitives) {
    // Frame-relative primitive position; voxel offset d = rel + offset is
    // then sign-symmetric under mirroring.
    const Vec3 rel = frame.center - prim.center;
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      const double c = (prim.center[a] - frame.center[a]) / s + 0.5 * n - 0.5;
      const double r = prim.half_extents[a] / s;
      lo[a] = std::max(0, static_cast<int>(std::floor(c - r)) - 1);
      hi[a] = std::min(n - 1, static_cast<int>(std::ceil(c + r)) + 1);
    }
    const float value = prim.op == CsgOp::Union ? 1.0f : 0.0f;
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const Vec3 d{rel.x + offsets[i], rel.y + offsets[j], rel.z + offsets[k]};
          if (prim.contains_offset(d)) grid.at(i, j, k) = value;
        }
  }
  return grid;
}

WorldGrid realize(const ShapeProgram& program, int resolution) {
  program.validate();
  WorldGrid grid = realize_in_frame(program, program_frame(program), resolution);
  if (grid.occupied_count() == 0) throw Error("empty realization");
  return grid;
}

ShapeProgram symmetrize(const ShapeProgram& program) {
  ShapeProgram out;
  out.seed = program.seed;
  out.config_hash = program.config_hash;
  for (const auto& p : program.primitives) {
    out.primitives.push_back(p);
    PrimitiveSpec m = p;
    m.center.z = 1.0 - p.center.z;
    if (!(m == p)) out.primitives.push_back(m);
  }
  return out;
}

namespace {

struct Facet {
  int i, j, k;
  int axis;
  int sign;
};

std::vector<Facet> exposed_facets(const WorldGrid& g) {
  std::vector<Facet> facets;
  const int n = g.resolution();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (g.at(i, j, k) < 0.5f) continue;
        for (int a = 0; a < 3; ++a)
          for (int sgn = -1; sgn <= 1; sgn += 2) {
            int q[3] = {i, j, k};
            q[a] += sgn;
            if (!g.in_range(q[0], q[1], q[2]) || g.at(q[0], q[1], q[2]) < 0.5f)
              facets.push_back({i, j, k, a, sgn});
          }
      }
  return facets;
}

PrimitiveSpec random_primitive_shape(const GrammarConfig& cfg, Rng& rng) {
  PrimitiveSpec p;
  const bool cylinder = rng.bernoulli(cfg.cylinder_probability);
  p.kind = cylinder ? PrimitiveKind::Cylinder : PrimitiveKind::Cuboid;
  p.axis = static_cast<int>(rng.uniform_int(0, 2));
  for (int a = 0; a < 3; ++a) p.half_extents[a] = 0.5 * rng.uniform(cfg.scale_min, cfg.scale_max);
  if (cylinder) {
    const int u = (p.axis + 1) % 3, v = (p.axis + 2) % 3;
    p.half_extents[v] = p.half_extents[u];
  } else {
    p.axis = 2;
  }
  for (int a = 0; a < 3; ++a) p.half_extents[a] = quantize(p.half_extents[a]);
  return p;
}

ShapeProgram draw_program(std::uint64_t seed, const GrammarConfig& cfg, Rng& rng) {
  ShapeProgram prog;
  prog.seed = seed;
  prog.config_hash = cfg.hash();
  const int count = static_cast<int>(rng.uniform_int(cfg.min_primitives, cfg.max_primitives));

  PrimitiveSpec first = random_primitive_shape(cfg, rng);
  first.op = CsgOp::Union;
  first.center = {0.5, 0.5, 0.5};
  prog.primitives.push_back(first);

  const GridFrame preview_frame{{0.5, 0.5, 0.5}, 1.0};
  const int pn = cfg.preview_resolution;
  const double pvox = preview_frame.voxel_size(pn);
  for (int idx = 1; idx < count; ++idx) {
    const WorldGrid preview = realize_in_frame(prog, preview_frame, pn);
    const std::vector<Facet> facets = exposed_facets(preview);
    if (facets.empty()) break;
    const Facet& f = facets[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(facets.size()) - 1))];
    const Vec3 q = preview_frame.voxel_center(pn, f.i, f.j, f.k);

    PrimitiveSpec p = random_primitive_shape(cfg, rng);
    p.op = (idx >= cfg.subtract_from_index && rng.bernoulli(cfg.subtract_probability))
               ? CsgOp::Subtract
               : CsgOp::Union;
    // Sit the primitive on the facet, sunk slightly below it so the facet's
    // voxel center lies strictly inside: contact is an overlap, never a gap.
    const double embed = rng.uniform(0.25, 0.75) * pvox;
    Vec3 c = q;
    c[f.axis] = q[f.axis] + f.sign * (p.half_extents[f.axis] - embed);
    Vec3 disp{};
    for (int a = 0; a < 3; ++a) {
      if (a == f.axis) continue;
      const double bound = std::min(cfg.displacement, 0.5 * p.half_extents[a]);
      disp[a] = rng.uniform(-bound, bound);
    }
    for (int a = 0; a < 3; ++a) p.center[a] = quantize(c[a] + disp[a]);
    if (!p.contains(q)) {
      for (int a = 0; a < 3; ++a) p.center[a] = quantize(c[a]);
    }
    prog.primitives.push_back(p);
  }
  return prog;
}

bool acceptable(const ShapeProgram& prog, const GrammarConfig& cfg) {
  for (const ShapeProgram& candidate : {prog, symmetrize(prog)}) {
    const WorldGrid g = realize_in_frame(candidate, program_frame(candidate), cfg.check_resolution);
    const std::size_t occupied = g.occupied_count();
    if (occupied == 0) return false;
    const double frac = static_cast<double>(occupied) / static_cast<double>(g.size());
    if (frac <= cfg.min_occupancy || frac >= cfg.max_occupancy) return false;
    std::vector<std::uint8_t> mask(g.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = g.values()[i] >= 0.5f;
    if (count_components_6(mask, g.resolution()) != 1) return false;
  }
  return true;
}

}  // namespace

ShapeProgram generate_program(std::uint64_t seed, const GrammarConfig& config) {
  config.validate();
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    ShapeProgram prog = draw_program(seed, config, rng);
    if (static_cast<int>(prog.primitives.size()) < config.min_primitives) continue;
    if (acceptable(prog, config)) return prog;
  }
  throw Error("generate_program: no acceptable shape within max_attempts");
}

// --- text format ---------------------------------------------------------------

std::string format_program(const ShapeProgram& program) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "# voxsketch-program v1 seed %" PRIu64 " config %s\n",
                program.seed, program.config_hash.empty() ? "-" : program.config_hash.c_str());
  out += buf;
  for (const auto& p : program.primitives) {
    std::snprintf(buf, sizeof buf, "%s %s %s %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  p.op == CsgOp::Union ? "union" : "subtract",
                  p.kind == PrimitiveKind::Cuboid ? "cuboid" : "cylinder",
                  p.kind == PrimitiveKind::Cuboid ? "-" : axis_name(p.axis), p.center.x,
                  p.center.y, p.center.z, p.half_extents.x, p.half_extents.y, p.half_extents.z);
    out += buf;
  }
  return out;
}

ShapeProgram parse_program(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  ShapeProgram prog;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, tag, version, seed_key, config_key;
      ls >> hash >> tag >> version >> seed_key >> prog.seed >> config_key >> prog.config_hash;
      if (tag != "voxsketch-program" || seed_key != "seed" || config_key != "config" || !ls)
        throw Error("program: malformed header");
      if (prog.config_hash == "-") prog.config_hash.clear();
      header = true;
      continue;
    }
    std::string op, kind, axis;
    PrimitiveSpec p;
    ls >> op >> kind >> axis >> p.center.x >> p.center.y >> p.center.z >> p.half_extents.x >>
        p.half_extents.y >> p.half_extents.z;
    if (!ls) throw Error("program: malformed record on line " + std::to_string(lineno));
    if (op == "union") p.op = CsgOp::Union;
    else if (op == "subtract") p.op = CsgOp::Subtract;
    else throw Error("program: unknown op '" + op + "'");
    if (kind == "cuboid") {
      p.kind = PrimitiveKind::Cuboid;
      p.axis = 2;
    } else if (kind == "cylinder") {
      p.kind = PrimitiveKind::Cylinder;
      if (axis == "x") p.axis = 0;
      else if (axis == "y") p.axis = 1;
      else if (axis == "z") p.axis = 2;
      else throw Error("program: bad cylinder axis '" + axis + "'");
    } else {
      throw Error("program: unknown primitive '" + kind + "'");
    }
    prog.primitives.push_back(p);
  }
  if (!header) throw Error("program: missing header line");
  prog.validate();
  return prog;
}

void write_program(const std::string& path, const ShapeProgram& program) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << format_program(program);
}

ShapeProgram read_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

}  // namespace voxsketch
