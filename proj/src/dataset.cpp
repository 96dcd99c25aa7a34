#include "voxsketch/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "voxsketch/resample.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace voxsketch {

DatasetConfig DatasetConfig::toy() { return DatasetConfig{}; }

DatasetConfig DatasetConfig::full() {
  DatasetConfig c;
  c.preset = "full";
  c.shape_count = 20000;
  c.test_count = 50;
  c.drawing_size = 256;
  c.grid_resolution = 64;
  c.frustum_slices = 64;
  c.render_resolution = 64;
  return c;
}

void DatasetConfig::validate() const {
  if (shape_count < 1) throw Error("dataset: shape_count must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw Error("dataset: train_fraction outside (0, 1]");
  if (drawing_size < 16 || grid_resolution < 8 || frustum_slices < 4 || render_resolution < 8)
    throw Error("dataset: resolutions too small");
  if (single_jitter < 0.0 || updater_jitter < 0.0) throw Error("dataset: negative jitter");
  grammar.validate();
}

int DatasetConfig::resolved_test_count(int usable) const {
  const int t = test_count >= 0 ? test_count
                                : static_cast<int>(std::lround(usable * (1.0 - train_fraction)));
  return std::clamp(t, 0, usable);
}

json DatasetConfig::to_json() const {
  return {{"preset", preset},
          {"shape_count", shape_count},
          {"test_count", test_count},
          {"train_fraction", train_fraction},
          {"drawing_size", drawing_size},
          {"grid_resolution", grid_resolution},
          {"frustum_slices", frustum_slices},
          {"render_resolution", render_resolution},
          {"single_jitter", single_jitter},
          {"updater_jitter", updater_jitter},
          {"symmetric", symmetric},
          {"seed", seed},
          {"grammar",
           {{"min_primitives", grammar.min_primitives},
            {"max_primitives", grammar.max_primitives},
            {"scale_min", grammar.scale_min},
            {"scale_max", grammar.scale_max},
            {"displacement", grammar.displacement},
            {"subtract_probability", grammar.subtract_probability},
            {"subtract_from_index", grammar.subtract_from_index},
            {"cylinder_probability", grammar.cylinder_probability},
            {"preview_resolution", grammar.preview_resolution},
            {"check_resolution", grammar.check_resolution},
            {"min_occupancy", grammar.min_occupancy},
            {"max_occupancy", grammar.max_occupancy},
            {"max_attempts", grammar.max_attempts},
            {"hash", grammar.hash()}}},
          {"contours",
           {{"depth_threshold", contours.depth_threshold},
            {"normal_angle_deg", contours.normal_angle_deg},
            {"dilation_passes", contours.dilation_passes}}}};
}

DatasetConfig DatasetConfig::from_json(const json& j) {
  DatasetConfig c;
  c.preset = j.value("preset", c.preset);
  c.shape_count = j.value("shape_count", c.shape_count);
  c.test_count = j.value("test_count", c.test_count);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.drawing_size = j.value("drawing_size", c.drawing_size);
  c.grid_resolution = j.value("grid_resolution", c.grid_resolution);
  c.frustum_slices = j.value("frustum_slices", c.frustum_slices);
  c.render_resolution = j.value("render_resolution", c.render_resolution);
  c.single_jitter = j.value("single_jitter", c.single_jitter);
  c.updater_jitter = j.value("updater_jitter", c.updater_jitter);
  c.symmetric = j.value("symmetric", c.symmetric);
  c.seed = j.value("seed", c.seed);
  if (j.contains("grammar")) {
    const json& g = j["grammar"];
    GrammarConfig& gc = c.grammar;
    gc.min_primitives = g.value("min_primitives", gc.min_primitives);
    gc.max_primitives = g.value("max_primitives", gc.max_primitives);
    gc.scale_min = g.value("scale_min", gc.scale_min);
    gc.scale_max = g.value("scale_max", gc.scale_max);
    gc.displacement = g.value("displacement", gc.displacement);
    gc.subtract_probability = g.value("subtract_probability", gc.subtract_probability);
    gc.subtract_from_index = g.value("subtract_from_index", gc.subtract_from_index);
    gc.cylinder_probability = g.value("cylinder_probability", gc.cylinder_probability);
    gc.preview_resolution = g.value("preview_resolution", gc.preview_resolution);
    gc.check_resolution = g.value("check_resolution", gc.check_resolution);
    gc.min_occupancy = g.value("min_occupancy", gc.min_occupancy);
    gc.max_occupancy = g.value("max_occupancy", gc.max_occupancy);
    gc.max_attempts = g.value("max_attempts", gc.max_attempts);
  }
  if (j.contains("contours")) {
    const json& k = j["contours"];
    c.contours.depth_threshold = k.value("depth_threshold", c.contours.depth_threshold);
    c.contours.normal_angle_deg = k.value("normal_angle_deg", c.contours.normal_angle_deg);
    c.contours.dilation_passes = k.value("dilation_passes", c.contours.dilation_passes);
  }
  c.validate();
  return c;
}

std::string DatasetManifest::resolve(const std::string& rel) const {
  if (rel.empty() || fs::path(rel).is_absolute() || root.empty()) return rel;
  return (fs::path(root) / rel).string();
}

json camera_to_json(const Camera& c) {
  return {{"eye", {c.eye.x, c.eye.y, c.eye.z}},
          {"target", {c.target.x, c.target.y, c.target.z}},
          {"up", {c.up.x, c.up.y, c.up.z}},
          {"fov", c.fov_deg},
          {"aspect", c.aspect}};
}

Camera camera_from_json(const json& j) {
  auto vec = [&](const char* key) {
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw Error(std::string("camera: bad '") + key + "'");
    return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  };
  Camera c;
  c.eye = vec("eye");
  c.target = vec("target");
  c.up = vec("up");
  c.fov_deg = j.at("fov").get<double>();
  c.aspect = j.at("aspect").get<double>();
  c.validate();
  return c;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << json{{"config", m.config.to_json()}, {"split", m.split}}.dump() << '\n';
  for (const SampleRecord& r : m.samples) {
    json views = json::array();
    for (const ViewRecord& v : r.views)
      views.push_back({{"view", v.view}, {"camera", camera_to_json(v.camera)}, {"drawing", v.drawing}});
    out << json{{"shape_id", r.shape_id}, {"source", r.source}, {"shape", r.shape_path},
                {"grid", r.grid_path},    {"seed", r.seed},     {"views", views}}
               .dump()
        << '\n';
  }
  if (!out) throw Error("short write to " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read manifest " + path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (lineno == 1) {
        m.config = DatasetConfig::from_json(j.at("config"));
        m.split = j.at("split").get<std::string>();
        continue;
      }
      SampleRecord r;
      r.shape_id = j.at("shape_id").get<std::string>();
      r.source = j.at("source").get<std::string>();
      r.shape_path = j.at("shape").get<std::string>();
      r.grid_path = j.at("grid").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      for (const json& v : j.at("views")) {
        ViewRecord vr;
        vr.view = ViewpointId(v.at("view").get<int>()).value();
        vr.camera = camera_from_json(v.at("camera"));
        vr.drawing = v.at("drawing").get<std::string>();
        r.views.push_back(std::move(vr));
      }
      m.samples.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (lineno == 0) throw Error("empty manifest " + path);
  return m;
}

// --- voxelization ------------------------------------------------------------------------

WorldGrid voxelize_mesh_in_frame(const Mesh& mesh, const GridFrame& frame, int n) {
  const MeshTopology topo = mesh_topology(mesh);
  if (topo.faces == 0 || topo.boundary_edges != 0) throw Error("open mesh");
  WorldGrid grid(n, frame, 0.0f);
  const double s = frame.voxel_size(n);
  const Vec3 lo = frame.lo();
  // Rays through voxel-center columns, nudged by irrational fractions of a
  // voxel so they never graze an edge or vertex of an axis-aligned mesh.
  const double ex = 1e-4 * std::sqrt(2.0) * s, ey = 1e-4 * std::sqrt(3.0) * s;
  auto col_x = [&](int i) { return frame.center.x + frame.voxel_offset(n, i) + ex; };
  auto col_y = [&](int j) { return frame.center.y + frame.voxel_offset(n, j) + ey; };
  std::vector<std::vector<double>> hits(static_cast<std::size_t>(n) * n);

  for (const Triangle& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (area == 0.0) continue;  // parallel to the rays
    const double minx = std::min({a.x, b.x, c.x}), maxx = std::max({a.x, b.x, c.x});
    const double miny = std::min({a.y, b.y, c.y}), maxy = std::max({a.y, b.y, c.y});
    const int i0 = std::max(0, static_cast<int>(std::floor((minx - lo.x) / s - 0.5)));
    const int i1 = std::min(n - 1, static_cast<int>(std::ceil((maxx - lo.x) / s - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((miny - lo.y) / s - 0.5)));
    const int j1 = std::min(n - 1, static_cast<int>(std::ceil((maxy - lo.y) / s - 0.5)));
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const double px = col_x(i), py = col_y(j);
        const double w0 = ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) / area;
        const double w1 = ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        hits[static_cast<std::size_t>(j) * n + i].push_back(w0 * a.z + w1 * b.z + w2 * c.z);
      }
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      std::vector<double>& z = hits[static_cast<std::size_t>(j) * n + i];
      if (z.size() < 2) continue;
      std::sort(z.begin(), z.end());
      for (std::size_t p = 0; p + 1 < z.size(); p += 2)
        for (int k = 0; k < n; ++k) {
          const double zc = frame.center.z + frame.voxel_offset(n, k);
          if (zc >= z[p] && zc <= z[p + 1]) grid.at(i, j, k) = 1.0f;
        }
    }
  return grid;
}

WorldGrid voxelize_mesh(const Mesh& mesh, int resolution) {
  if (mesh.empty()) throw Error("open mesh");
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  return voxelize_mesh_in_frame(mesh, frame_for_bbox(lo, hi), resolution);
}

// --- pairs -------------------------------------------------------------------------------

ShapeAssets grammar_assets(const std::string& id, const ShapeProgram& program, const DatasetConfig& cfg) {
  ShapeAssets a;
  a.shape_id = id;
  const GridFrame frame = program_frame(program);
  a.mesh = extract_mesh(realize_in_frame(program, frame, cfg.render_resolution));
  a.grid = realize_in_frame(program, frame, cfg.grid_resolution);
  if (a.grid.occupied_count() == 0) throw Error("empty realization");
  return a;
}

FrustumGrid target_frustum(const WorldGrid& grid, const Camera& camera, const DatasetConfig& cfg) {
  const int px = cfg.grid_resolution;
  FrustumGrid f = resample_world_to_frustum(grid, camera, cfg.frustum_slices, px, px);
  for (float& v : f.values()) v = v >= kOccupancyThreshold ? 1.0f : 0.0f;
  return f;
}

SamplePair make_pair_for_camera(const ShapeAssets& shape, int view, const Camera& camera,
                                const DatasetConfig& cfg) {
  SamplePair p;
  p.view = view;
  p.camera = camera;
  p.shape_id = shape.shape_id;
  p.drawing = draw_mesh(shape.mesh, camera, shape.grid.frame(), cfg.drawing_size, cfg.drawing_size, cfg.contours);
  p.target = target_frustum(shape.grid, camera, cfg);
  return p;
}

int sample_view(PairKind kind, Rng& rng) {
  const int count = kind == PairKind::SingleView ? ViewpointId::kCornerCount : ViewpointId::kCount;
  return static_cast<int>(rng.uniform_int(0, count - 1));
}

SamplePair make_pair(const ShapeAssets& shape, PairKind kind, const DatasetConfig& cfg, Rng& rng) {
  const GridFrame& frame = shape.grid.frame();
  const bool single = kind == PairKind::SingleView;
  const int view = sample_view(kind, rng);
  const Camera base = viewpoint_camera(ViewpointId(view), frame);
  const Camera cam = single ? jitter_camera(base, JitterKind::SingleView, cfg.single_jitter * frame.half_extent(), rng)
                            : jitter_camera(base, JitterKind::Updater, cfg.updater_jitter * frame.half_extent(), rng);
  return make_pair_for_camera(shape, view, cam, cfg);
}

Camera stored_view_camera(int view, const GridFrame& frame, const DatasetConfig& cfg, Rng& rng) {
  const ViewpointId id(view);
  const Camera base = viewpoint_camera(id, frame);
  if (id.is_corner()) return jitter_camera(base, JitterKind::SingleView, cfg.single_jitter * frame.half_extent(), rng);
  return jitter_camera(base, JitterKind::Updater, cfg.updater_jitter * frame.half_extent(), rng);
}

ShapeAssets load_shape(const DatasetManifest& m, const SampleRecord& r) {
  ShapeAssets a;
  a.shape_id = r.shape_id;
  a.grid = read_vxg(m.resolve(r.grid_path));
  if (r.source == "grammar") {
    const ShapeProgram prog = read_program(m.resolve(r.shape_path));
    a.mesh = extract_mesh(realize_in_frame(prog, program_frame(prog), m.config.render_resolution));
  } else {
    a.mesh = read_obj(m.resolve(r.shape_path));
  }
  return a;
}

// --- build -------------------------------------------------------------------------------

namespace {

std::string shape_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05d", index);
  return buf;
}

std::string drawing_name(const std::string& id, int view) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "drawings/%s_v%02d.png", id.c_str(), view);
  return buf;
}

SampleRecord emit_views(const ShapeAssets& shape, SampleRecord rec, const DatasetConfig& cfg,
                        const fs::path& out) {
  write_vxg((out / rec.grid_path).string(), shape.grid);
  for (int v = 0; v < ViewpointId::kCount; ++v) {
    Rng rng(mix_seed(rec.seed, 1000 + v));
    ViewRecord vr;
    vr.view = v;
    vr.camera = stored_view_camera(v, shape.grid.frame(), cfg, rng);
    vr.drawing = drawing_name(rec.shape_id, v);
    const LineDrawing d = draw_mesh(shape.mesh, vr.camera, shape.grid.frame(), cfg.drawing_size,
                                    cfg.drawing_size, cfg.contours);
    write_file((out / vr.drawing).string(), encode_drawing_png(d));
    rec.views.push_back(std::move(vr));
  }
  return rec;
}

}  // namespace

BuildResult build_dataset(DatasetSource source, const std::string& mesh_dir, const DatasetConfig& cfg,
                          const std::string& out_dir) {
  cfg.validate();
  const fs::path out(out_dir);
  for (const char* sub : {"shapes", "grids", "drawings"}) fs::create_directories(out / sub);
  BuildResult result;
  std::vector<SampleRecord> records;

  if (source == DatasetSource::Grammar) {
    for (int k = 0; k < cfg.shape_count; ++k) {
      SampleRecord rec;
      rec.shape_id = shape_name(k);
      rec.source = "grammar";
      rec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
      rec.shape_path = "shapes/" + rec.shape_id + ".prog";
      rec.grid_path = "grids/" + rec.shape_id + ".vxg";
      ShapeProgram prog = generate_program(rec.seed, cfg.grammar);
      if (cfg.symmetric) prog = symmetrize(prog);
      write_program((out / rec.shape_path).string(), prog);
      records.push_back(emit_views(grammar_assets(rec.shape_id, prog, cfg), std::move(rec), cfg, out));
    }
  } else {
    if (!fs::is_directory(mesh_dir)) throw Error("mesh directory not found: " + mesh_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(mesh_dir))
      if (e.is_regular_file() && e.path().extension() == ".obj") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    int index = 0;
    for (const fs::path& f : files) {
      try {
        ShapeAssets shape;
        shape.mesh = read_obj(f.string());
        shape.grid = voxelize_mesh(shape.mesh, cfg.grid_resolution);
        if (shape.grid.occupied_count() == 0) throw Error("voxelizes to an empty grid");
        SampleRecord rec;
        rec.shape_id = shape_name(index);
        shape.shape_id = rec.shape_id;
        rec.source = "mesh";
        rec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(index));
        rec.shape_path = "shapes/" + rec.shape_id + ".obj";
        rec.grid_path = "grids/" + rec.shape_id + ".vxg";
        write_obj((out / rec.shape_path).string(), shape.mesh);
        records.push_back(emit_views(shape, std::move(rec), cfg, out));
        ++index;
      } catch (const Error& e) {
        result.errors.push_back(f.filename().string() + ": " + e.what());
      }
    }
  }
  if (records.empty()) throw Error("dataset: no usable shapes");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, 0x5b17));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(split_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  const int test_count = cfg.resolved_test_count(static_cast<int>(records.size()));
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + test_count);
  std::vector<std::size_t> train_idx(order.begin() + test_count, order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  for (DatasetManifest* m : {&result.train, &result.test}) {
    m->config = cfg;
    m->root = out.string();
  }
  result.train.split = "train";
  result.test.split = "test";
  for (std::size_t i : train_idx) result.train.samples.push_back(records[i]);
  for (std::size_t i : test_idx) result.test.samples.push_back(records[i]);
  write_manifest((out / "manifest.train").string(), result.train);
  write_manifest((out / "manifest.test").string(), result.test);
  if (!result.errors.empty()) {
    std::ofstream err(out / "errors.txt");
    for (const auto& e : result.errors) err << e << '\n';
  }
  return result;
}

}  // namespace voxsketch
