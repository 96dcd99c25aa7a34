// Runs the eleven primary acceptance criteria and prints one PASS/FAIL line
// each. Trained toy weights and the toy dataset are cached under --cache so
// reruns skip training; the cached training time still counts against the
// generalization budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>

#include "../support/gradcheck.hpp"
#include "CLI11.hpp"
#include "voxsketch/carve.hpp"
#include "voxsketch/harness.hpp"
#include "voxsketch/mesh.hpp"
#include "voxsketch/resample.hpp"
#include "voxsketch/service.hpp"
// After Eigen: resolv.h defines _res as a macro.
#include "httplib.h"

using namespace voxsketch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  double extra_seconds = 0.0;  // work done in earlier runs (cached training)
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- shared toy assets ---------------------------------------------------------------------

constexpr std::uint64_t kDatasetSeed = 0;
constexpr long kSingleIterations = 20000;
constexpr long kUpdaterIterations = 20000;
// Bumped whenever updater training changes so stale cached weights are retrained.
constexpr const char* kUpdaterSources = "any-view";

struct ToyAssets {
  DatasetManifest train, test;
  Model model;
  double dataset_seconds = 0, single_seconds = 0, updater_seconds = 0;
  bool single_cached = false, updater_cached = false;
};

double read_seconds(const fs::path& p) {
  if (!fs::exists(p)) return -1;
  return std::stod(read_file(p.string()));
}

/// Builds (or reuses) the 450/50 toy dataset and trains (or reuses) both networks.
ToyAssets& toy_assets(const fs::path& cache) {
  static std::unique_ptr<ToyAssets> assets;
  if (assets) return *assets;
  assets = std::make_unique<ToyAssets>();
  ToyAssets& a = *assets;
  fs::create_directories(cache);
  const fs::path ds = cache / "dataset";
  DatasetConfig dc = DatasetConfig::toy();
  dc.shape_count = 500;
  dc.test_count = 50;
  dc.seed = kDatasetSeed;
  bool reuse = fs::exists(ds / "manifest.test") && fs::exists(cache / "dataset.seconds");
  if (reuse) {
    a.train = read_manifest((ds / "manifest.train").string());
    reuse = a.train.config.to_json() == dc.to_json();
  }
  if (!reuse) {
    std::printf("  building toy dataset in %s\n", ds.string().c_str());
    std::fflush(stdout);
    fs::remove_all(ds);
    fs::remove(cache / "single.vxck");
    fs::remove(cache / "model.vxck");
    const auto t0 = Clock::now();
    build_dataset(DatasetSource::Grammar, "", dc, ds.string());
    write_file((cache / "dataset.seconds").string(), std::to_string(seconds_since(t0)));
    a.train = read_manifest((ds / "manifest.train").string());
  }
  a.test = read_manifest((ds / "manifest.test").string());
  a.dataset_seconds = read_seconds(cache / "dataset.seconds");

  auto progress = [](const char* what, long total) {
    return [what, total, t0 = Clock::now()](long it, double loss) {
      if ((it + 1) % 1000 == 0) {
        std::printf("  %s %ld/%ld loss %.4f (%.0f s)\n", what, it + 1, total, loss, seconds_since(t0));
        std::fflush(stdout);
      }
      return true;
    };
  };

  const fs::path single_path = cache / "single.vxck", model_path = cache / "model.vxck";
  std::shared_ptr<Network> single;
  if (fs::exists(single_path)) {
    Checkpoint ck = load_checkpoint(single_path.string());
    if (ck.single && ck.metadata["iteration"] == std::to_string(kSingleIterations) &&
        ck.metadata.count("train_seconds")) {
      single = ck.single;
      a.single_seconds = std::stod(ck.metadata["train_seconds"]);
    }
  }
  if (!single) {
    fs::remove(model_path);
    single = std::make_shared<Network>(nn::toy_spec(false));
    single->initialize(1);
    TrainingConfig cfg = TrainingConfig::toy();
    cfg.iterations = kSingleIterations;
    const auto t0 = Clock::now();
    train_single_view(a.train, *single, cfg, progress("single-view", cfg.iterations));
    a.single_seconds = seconds_since(t0);
    save_checkpoint(single_path.string(), Checkpoint{single, nullptr,
                                                     {{"iteration", std::to_string(kSingleIterations)},
                                                      {"train_seconds", std::to_string(a.single_seconds)}}});
  } else {
    a.single_cached = true;
  }

  std::shared_ptr<Network> updater;
  if (fs::exists(model_path)) {
    Checkpoint ck = load_checkpoint(model_path.string());
    if (ck.updater && ck.metadata["updater_iteration"] == std::to_string(kUpdaterIterations) &&
        ck.metadata["updater_sources"] == kUpdaterSources &&
        ck.metadata.count("updater_train_seconds")) {
      updater = ck.updater;
      a.updater_seconds = std::stod(ck.metadata["updater_train_seconds"]);
      a.updater_cached = true;
    }
  }
  if (!updater) {
    updater = std::make_shared<Network>(nn::toy_spec(true));
    updater->initialize(2);
    TrainingConfig cfg = TrainingConfig::toy();
    cfg.iterations = kUpdaterIterations;
    cfg.seed = 1;
    const auto t0 = Clock::now();
    train_updater(a.train, single, *updater, cfg, progress("updater", cfg.iterations));
    a.updater_seconds = seconds_since(t0);
    save_checkpoint(model_path.string(),
                    Checkpoint{single, updater,
                               {{"iteration", std::to_string(kSingleIterations)},
                                {"updater_iteration", std::to_string(kUpdaterIterations)},
                                {"updater_sources", kUpdaterSources},
                                {"train_seconds", std::to_string(a.single_seconds)},
                                {"updater_train_seconds", std::to_string(a.updater_seconds)}}});
  }
  a.model = Model{single, updater};
  return a;
}

std::vector<EvalShape>& test_shapes(const fs::path& cache) {
  static std::unique_ptr<std::vector<EvalShape>> shapes;
  if (!shapes) shapes = std::make_unique<std::vector<EvalShape>>(load_eval_shapes(toy_assets(cache).test));
  return *shapes;
}

// --- independent oracles --------------------------------------------------------------------

double oracle_iou(const WorldGrid& a, const WorldGrid& b) {
  const int n = a.resolution();
  long both = 0, either = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const bool x = a.at(i, j, k) >= 0.5f, y = b.at(i, j, k) >= 0.5f;
        both += x && y;
        either += x || y;
      }
  return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

/// 6-connected components of the occupied voxels by explicit-stack flood fill.
int oracle_components(const WorldGrid& g) {
  const int n = g.resolution();
  std::vector<char> seen(g.size(), 0);
  auto idx = [n](int i, int j, int k) { return (static_cast<std::size_t>(k) * n + j) * n + i; };
  int comps = 0;
  std::vector<std::array<int, 3>> stack;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (seen[idx(i, j, k)] || g.at(i, j, k) < 0.5f) continue;
        ++comps;
        stack.push_back({i, j, k});
        seen[idx(i, j, k)] = 1;
        while (!stack.empty()) {
          const auto [x, y, z] = stack.back();
          stack.pop_back();
          const int nb[6][3] = {{x + 1, y, z}, {x - 1, y, z}, {x, y + 1, z}, {x, y - 1, z}, {x, y, z + 1}, {x, y, z - 1}};
          for (const auto& q : nb) {
            if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= n || q[1] >= n || q[2] >= n) continue;
            const std::size_t id = idx(q[0], q[1], q[2]);
            if (seen[id] || g.at(q[0], q[1], q[2]) < 0.5f) continue;
            seen[id] = 1;
            stack.push_back({q[0], q[1], q[2]});
          }
        }
      }
  return comps;
}

bool superset(const WorldGrid& carved, const WorldGrid& truth) {
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth.values()[i] >= 0.5f && carved.values()[i] < 0.5f) return false;
  return true;
}

// --- criteria -------------------------------------------------------------------------------

Outcome iou_oracle() {
  Rng rng(2024);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    WorldGrid a(8, GridFrame{}), b(8, GridFrame{});
    const double pa = t % 50 == 0 ? 0.0 : rng.uniform(), pb = t % 70 == 0 ? 0.0 : rng.uniform();
    for (float& v : a.values()) v = rng.bernoulli(pa) ? static_cast<float>(rng.uniform(0.5, 1.0)) : 0.0f;
    for (float& v : b.values()) v = rng.bernoulli(pb) ? static_cast<float>(rng.uniform(0.5, 1.0)) : 0.0f;
    // Exact threshold ties and sub-threshold noise.
    a.values()[t % 512] = 0.5f;
    b.values()[(t * 7) % 512] = 0.4999f;
    if (iou(a, b) != oracle_iou(a, b)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d/1000 pairs differ from exhaustive count", mismatches)};
}

Outcome resampling() {
  double worst = 0.0;
  long const_cells = 0, const_bad = 0;
  for (int field = 0; field < 3; ++field) {
    Rng rng(10 + field);
    const double a = rng.uniform(0.5, 1.5), b = rng.uniform(0.5, 1.5), c = rng.uniform(0.5, 1.5);
    const double ph = rng.uniform(0, 6.28);
    const GridFrame frame{{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}, 1.0 + rng.uniform()};
    WorldGrid w(16, frame);
    for (int k = 0; k < 16; ++k)
      for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) {
          const Vec3 p = (frame.voxel_center(16, i, j, k) - frame.center) * (1.0 / frame.half_extent());
          w.at(i, j, k) = static_cast<float>(0.5 + 0.25 * std::sin(a * p.x + ph) * std::cos(b * p.y) +
                                             0.2 * std::sin(c * p.z + 1.0));
        }
    for (int v = 0; v < ViewpointId::kCount; ++v) {
      const Camera cam = viewpoint_camera(ViewpointId(v), frame);
      const WorldGrid back = resample_frustum_to_world(resample_world_to_frustum(w, cam, 32, 64, 64), w);
      double err = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) err += std::abs(back.values()[i] - w.values()[i]);
      worst = std::max(worst, err / w.size());
      // Constant frustum field comes back unchanged wherever the frustum covers a voxel.
      FrustumGrid fr = make_frustum(cam, frame, 16, 16, 16);
      for (float& x : fr.values()) x = 0.375f;
      const WorldGrid cw = resample_frustum_to_world(fr, frame, 16, 0.0f);
      for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
          for (int i = 0; i < 16; ++i) {
            const Projection p = project(cam, frame.voxel_center(16, i, j, k), 16, 16);
            if (p.px < 0 || p.px > 16 || p.py < 0 || p.py > 16) continue;
            ++const_cells;
            const_bad += cw.at(i, j, k) != 0.375f;
          }
    }
  }
  return {worst < 0.05 && const_bad == 0 && const_cells > 0,
          fmt("worst mean |error| %.4f over 3 fields x 13 views (< 0.05); constant field altered in %ld of %ld "
              "covered voxels",
              worst, const_bad, const_cells)};
}

Outcome grammar_invariants() {
  const GrammarConfig cfg = DatasetConfig::toy().grammar;
  const int n = cfg.check_resolution;
  int asym = 0, multi = 0, occ_bad = 0;
  double occ_lo = 1, occ_hi = 0;
  for (int s = 0; s < 1000; ++s) {
    const WorldGrid g = realize(symmetrize(generate_program(mix_seed(kDatasetSeed, s), cfg)), n);
    bool sym = true;
    long occ = 0;
    for (int k = 0; k < n && sym; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const bool x = g.at(i, j, k) >= 0.5f;
          if (x != (g.at(i, j, n - 1 - k) >= 0.5f)) sym = false;
          occ += x;
        }
    asym += !sym;
    multi += oracle_components(g) != 1;
    const double f = static_cast<double>(g.occupied_count()) / g.size();
    occ_lo = std::min(occ_lo, f);
    occ_hi = std::max(occ_hi, f);
    occ_bad += !(f > 0.005 && f < 0.9);
  }
  return {asym == 0 && multi == 0 && occ_bad == 0,
          fmt("1000 shapes at %d^3: %d asymmetric, %d not one component, %d occupancy out of range "
              "(observed %.4f..%.4f)",
              n, asym, multi, occ_bad, occ_lo, occ_hi)};
}

Outcome carving_exactness(const fs::path& cache) {
  // Cuboid, window equal to the frame so pixel columns align with voxel columns.
  WorldGrid box(16, GridFrame{}, 0.0f);
  for (int k = 2; k <= 7; ++k)
    for (int j = 5; j <= 12; ++j)
      for (int i = 3; i <= 10; ++i) box.at(i, j, k) = 1.0f;
  CarveJob cj;
  cj.mode = ProjectionMode::Orthographic;
  cj.ortho_half_height = box.frame().half_extent();
  for (int v : {8, 11, 12}) {
    const Camera cam = viewpoint_camera(ViewpointId(v), box.frame());
    cj.views.push_back({exact_mask(box, cam, 64, 64, ProjectionMode::Orthographic, cj.ortho_half_height), cam});
  }
  const double cuboid_iou = oracle_iou(carve(cj), box);

  int non_monotone = 0, not_superset = 0, fixtures = 0;
  for (const EvalShape& s : test_shapes(cache)) {
    const WorldGrid& truth = s.assets.grid;
    for (int order = 0; order < 2; ++order) {
      std::vector<int> ids;
      if (order == 0) {
        Rng rng(mix_seed(5, fixtures));
        ids = select_views(4, rng);
      } else {
        ids.assign(kOrthogonalViews, kOrthogonalViews + 4);
      }
      CarveJob job;
      job.frame = truth.frame();
      job.resolution = truth.resolution();
      double prev = -1.0;
      for (int v : ids) {
        const Camera& cam = s.records[v].camera;
        job.views.push_back({exact_mask(truth, cam, 64, 64, ProjectionMode::Perspective), cam});
        const WorldGrid carved = carve(job);
        const double q = oracle_iou(carved, truth);
        not_superset += !superset(carved, truth);
        non_monotone += q < prev;
        prev = q;
      }
      ++fixtures;
    }
  }
  return {cuboid_iou == 1.0 && non_monotone == 0 && not_superset == 0,
          fmt("cuboid IoU %.6f; %zu shapes x 2 view orders x 4 views: %d IoU decreases, %d superset violations",
              cuboid_iou, test_shapes(cache).size(), non_monotone, not_superset)};
}

Outcome gradients() {
  std::string detail;
  bool ok = true;
  for (const auto& c : gradcheck::all_gradient_checks(10)) {
    ok = ok && c.worst < 1e-3;
    detail += fmt("%s %.1e, ", c.layer.c_str(), c.worst);
  }
  detail.resize(detail.size() - 2);
  return {ok, "worst relative error over 10 seeds: " + detail};
}

Outcome overfit() {
  const DatasetConfig dc = DatasetConfig::toy();
  std::vector<ShapeAssets> shapes;
  std::vector<TrainingExample> single_ex;
  for (int i = 0; i < 8; ++i) {
    shapes.push_back(grammar_assets("o" + std::to_string(i), symmetrize(generate_program(mix_seed(77, i), dc.grammar)), dc));
    Rng rng(mix_seed(78, i));
    const SamplePair p = make_pair(shapes.back(), PairKind::SingleView, dc, rng);
    TrainingExample e;
    e.drawing = p.drawing;
    e.target = p.target;
    single_ex.push_back(std::move(e));
  }
  auto fit = [](Network& net, const std::vector<TrainingExample>& ex, long& used) {
    FixedExampleSource src(ex);
    TrainingConfig cfg = TrainingConfig::toy();
    cfg.iterations = 2000;
    double acc = 0.0;
    used = 0;
    train(net, src, cfg, [&](long it, double) {
      used = it + 1;
      if (used % 50 != 0) return true;
      acc = voxel_accuracy(net, ex);
      return acc < 0.99;
    });
    return voxel_accuracy(net, ex);
  };
  auto single = std::make_shared<Network>(nn::toy_spec(false));
  single->initialize(1);
  long single_its = 0;
  const double single_acc = fit(*single, single_ex, single_its);

  // Two-view samples: the single-view prediction from one corner injected
  // into the frustum of a second view.
  std::vector<TrainingExample> upd_ex;
  for (int i = 0; i < 8; ++i) {
    Rng rng(mix_seed(79, i));
    const int source = static_cast<int>(rng.uniform_int(0, 7));
    int target = static_cast<int>(rng.uniform_int(0, 11));
    if (target >= source) ++target;
    const GridFrame& frame = shapes[i].grid.frame();
    const Camera sc = stored_view_camera(source, frame, dc, rng), tc = stored_view_camera(target, frame, dc, rng);
    upd_ex.push_back(updater_example(shapes[i], target, tc, source, sc, *single, dc));
  }
  Network updater(nn::toy_spec(true));
  updater.initialize(2);
  long upd_its = 0;
  const double upd_acc = fit(updater, upd_ex, upd_its);
  return {single_acc >= 0.99 && upd_acc >= 0.99,
          fmt("single-view %.2f%% after %ld iterations, updater %.2f%% after %ld (need 99%% within 2000)",
              100 * single_acc, single_its, 100 * upd_acc, upd_its)};
}

Outcome generalization(const fs::path& cache) {
  ToyAssets& a = toy_assets(cache);
  const std::vector<EvalShape>& shapes = test_shapes(cache);
  EvalConfig single_cfg;
  single_cfg.views = 1;
  single_cfg.iterations = 0;
  const EvalReport single = evaluate(a.model, shapes, single_cfg);
  EvalConfig cmp_cfg;
  cmp_cfg.max_views = 3;
  cmp_cfg.iterations = 5;
  const EvalReport cmp = compare_carving(a.model, shapes, cmp_cfg);
  write_file((cache / "compare.csv").string(), format_report_csv(cmp, false));
  const double ours1 = single.mean_iou("ours", 1);
  const double carve1 = cmp.mean_iou("carve-random", 1);
  const double carve1_exact = cmp.mean_iou("carve-random-exact", 1);
  bool concave_ok = false;
  std::string concave = "concave subset empty";
  if (!cmp.concave.empty()) {
    const double ours3 = cmp.mean_iou("ours", 3, &cmp.concave), carve3 = cmp.mean_iou("carve-random", 3, &cmp.concave);
    const double carve3_exact = cmp.mean_iou("carve-random-exact", 3, &cmp.concave);
    concave_ok = ours3 > carve3;
    concave = fmt("concave subset (%zu shapes) 3 views: fused %.3f vs carving %.3f (exact masks %.3f)",
                  cmp.concave.size(), ours3, carve3, carve3_exact);
  }
  Outcome o;
  o.pass = shapes.size() == 50 && ours1 >= 0.55 && ours1 > carve1 && concave_ok;
  o.detail = fmt("%zu test shapes; 1 view: ours %.3f (>= 0.55) vs carving %.3f (exact masks %.3f); ", shapes.size(),
                 ours1, carve1, carve1_exact) +
             concave;
  o.extra_seconds = a.dataset_seconds + a.single_seconds + a.updater_seconds;
  o.detail += fmt("; dataset %.0f s + single-view training %.0f s%s + updater training %.0f s%s", a.dataset_seconds,
                  a.single_seconds, a.single_cached ? " (cached)" : "", a.updater_seconds,
                  a.updater_cached ? " (cached)" : "");
  return o;
}

Outcome convergence(const fs::path& cache) {
  ToyAssets& a = toy_assets(cache);
  EvalConfig cfg;
  cfg.iterations = 5;
  const ConvergenceReport r = convergence_report(a.model, test_shapes(cache), {2, 3, 4}, cfg);
  write_file((cache / "convergence.csv").string(), format_convergence_csv(r));
  bool ok = true;
  std::string detail;
  for (int k : {2, 3, 4}) {
    const double l1 = r.at(k, 1).mean_l2, l5 = r.at(k, 5).mean_l2;
    const double iou1 = r.at(k, 1).mean_iou;
    double worst_drop = 0.0;
    for (int t = 1; t <= 5; ++t) worst_drop = std::max(worst_drop, iou1 - r.at(k, t).mean_iou);
    ok = ok && l5 < 0.25 * l1 && worst_drop <= 0.05;
    detail += fmt("%d views: L2 %.4f -> %.4f (ratio %.3f), IoU %.3f, worst drop %.3f; ", k, l1, l5, l5 / l1, iou1,
                  worst_drop);
  }
  detail += fmt("final L2 below first on %zu/%zu traces", r.settled, r.traces);
  return {ok, detail};
}

Outcome timing(const fs::path& cache) {
  ToyAssets& a = toy_assets(cache);
  const TimingReport t = bench_timing(a.model, test_shapes(cache).front(), 4, 7, 5);
  write_file((cache / "timing.csv").string(), format_timing_csv(t));
  std::string ms;
  for (double m : t.median_ms) ms += fmt("%.1f ", m);
  return {t.r2 >= 0.95, fmt("medians %sms, slope %.1f ms/view, R^2 %.4f (>= 0.95)", ms.c_str(), t.slope, t.r2)};
}

Outcome meshing() {
  struct Case {
    const char* name;
    std::function<bool(double, double, double)> inside;
  };
  const Case cases[] = {
      {"cuboid", [](double x, double y, double z) { return x >= 6 && x < 26 && y >= 8 && y < 22 && z >= 5 && z < 27; }},
      {"sphere", [](double x, double y, double z) {
         const double c = 15.5;
         return (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c) <= 121.0;
       }}};
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    WorldGrid g(32, GridFrame{});
    long voxels = 0;
    for (int k = 0; k < 32; ++k)
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
          if (c.inside(i, j, k)) {
            g.at(i, j, k) = 1.0f;
            ++voxels;
          }
    const Mesh m = extract_mesh(g);
    // Edge incidence counted here rather than through the library topology helper.
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    std::set<std::uint32_t> verts;
    for (const Triangle& t : m.triangles)
      for (int e = 0; e < 3; ++e) {
        edges[{std::min(t[e], t[(e + 1) % 3]), std::max(t[e], t[(e + 1) % 3])}]++;
        verts.insert(t[e]);
      }
    long boundary = 0, nonmanifold = 0;
    for (const auto& [key, n] : edges) {
      boundary += n == 1;
      nonmanifold += n > 2;
    }
    const long euler = static_cast<long>(verts.size()) - static_cast<long>(edges.size()) +
                       static_cast<long>(m.triangles.size());
    double vol = 0.0;
    for (const Triangle& t : m.triangles) {
      const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &d = m.vertices[t[2]];
      vol += (a.x * (b.y * d.z - b.z * d.y) - a.y * (b.x * d.z - b.z * d.x) + a.z * (b.x * d.y - b.y * d.x)) / 6.0;
    }
    const double vs = g.frame().voxel_size(32);
    const double expect = voxels * vs * vs * vs;
    const double rel = std::abs(vol - expect) / expect;
    ok = ok && boundary == 0 && nonmanifold == 0 && euler == 2 && rel < 0.10;
    detail += fmt("%s: %ld boundary, %ld non-manifold edges, Euler %ld, volume off by %.2f%%; ", c.name, boundary,
                  nonmanifold, euler, 100 * rel);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome replay(const fs::path& cache) {
  ToyAssets& a = toy_assets(cache);
  const std::vector<EvalShape>& shapes = test_shapes(cache);
  ServiceConfig sc;
  HttpService service(a.model, sc);
  const int port = service.bind_any_port("127.0.0.1");
  std::thread th([&] { service.listen_after_bind(); });
  service.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120);

  int checked = 0, mismatched = 0, http_errors = 0;
  // Sequences include a re-submission that replaces an earlier view.
  const std::vector<std::vector<int>> sequences = {{0, 10}, {3, 12, 9, 5}, {6, 8, 6}, {1, 11, 4, 10, 1}};
  for (std::size_t q = 0; q < sequences.size(); ++q) {
    const EvalShape& s = shapes[q * 7 % shapes.size()];
    auto created = client.Post("/sessions");
    if (!created || created->status != 201) {
      ++http_errors;
      continue;
    }
    const std::string id = nlohmann::json::parse(created->body).at("id").get<std::string>();
    ViewSet offline;
    for (int v : sequences[q]) {
      auto r = client.Post("/sessions/" + id + "/drawings?view=" + std::to_string(v),
                           encode_drawing_png(s.drawings[v]), "image/png");
      if (!r || r->status != 200) {
        ++http_errors;
        continue;
      }
      const ViewInput in{decode_drawing_png(encode_drawing_png(s.drawings[v])),
                         viewpoint_camera(ViewpointId(v), sc.frame), v};
      auto it = std::find_if(offline.begin(), offline.end(), [&](const ViewInput& x) { return x.view == v; });
      if (it != offline.end())
        *it = in;
      else
        offline.push_back(in);
      WorldGrid expect;
      if (offline.size() == 1) {
        expect = predict_single(a.model, offline[0].drawing, offline[0].camera, sc.frame, a.model.slices());
      } else {
        FusionOptions opt;
        opt.iterations = sc.iterations;
        expect = fuse(a.model, offline, sc.frame, a.model.slices(), opt).grid;
      }
      auto got = client.Get("/sessions/" + id + "/prediction?format=voxels");
      if (!got || got->status != 200) {
        ++http_errors;
        continue;
      }
      ++checked;
      mismatched += got->body != encode_vxg(expect);
    }
    client.Delete("/sessions/" + id);
  }
  service.stop();
  th.join();
  return {checked > 0 && mismatched == 0 && http_errors == 0,
          fmt("%d predictions compared byte for byte, %d differ, %d request failures", checked, mismatched,
              http_errors)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primary acceptance criteria"};
  std::string cache = "acceptance_cache";
  std::vector<int> only;
  app.add_option("--cache", cache, "Directory for the toy dataset and trained weights");
  app.add_option("criteria", only, "Subset of criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  const fs::path cache_dir(cache);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "IoU oracle", 5, iou_oracle},
      {2, "resampling round trip", 10, resampling},
      {3, "grammar invariants", 120, grammar_invariants},
      {4, "carving exactness", 120, [&] { return carving_exactness(cache_dir); }},
      {5, "gradient checks", 120, gradients},
      {6, "overfit floor", 900, overfit},
      {7, "toy generalization", 7200, [&] { return generalization(cache_dir); }},
      {8, "convergence", 1800, [&] { return convergence(cache_dir); }},
      {9, "timing linearity", 600, [&] { return timing(cache_dir); }},
      {10, "meshing", 60, meshing},
      {11, "replay equivalence", 300, [&] { return replay(cache_dir); }},
  };

  // Shared toy assets are prepared up front so their cost is charged to
  // criterion 7 (through the recorded training times) and not to whichever
  // criterion happens to ask first.
  bool needs_assets = false;
  for (int id : {4, 7, 8, 9, 11})
    needs_assets = needs_assets || only.empty() || std::count(only.begin(), only.end(), id);
  if (needs_assets) {
    try {
      toy_assets(cache_dir);
      test_shapes(cache_dir);
    } catch (const std::exception& e) {
      std::printf("FAIL  toy assets could not be prepared: %s\n", e.what());
      return 1;
    }
  }

  int failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !std::count(only.begin(), only.end(), c.id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double t = seconds_since(t0) + o.extra_seconds;
    const bool in_time = t <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %2d %-22s %s [%.1f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), t,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
