#include "voxsketch/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "voxsketch/render.hpp"

namespace voxsketch {

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(threads, static_cast<int>(n)); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

ViewSet view_set(const EvalShape& s, const std::vector<int>& ids, std::size_t count) {
  ViewSet out;
  for (std::size_t i = 0; i < count; ++i) {
    const int v = ids[i];
    out.push_back({s.drawings[v], s.records[v].camera, v});
  }
  return out;
}

std::string config_line(const nlohmann::json& config) { return "# config: " + config.dump() + "\n"; }

nlohmann::json model_json(const Model& model) {
  nlohmann::json j;
  j["single"] = model.single ? nlohmann::json::parse(nn::spec_to_json(model.single->spec())) : nlohmann::json();
  j["updater"] = model.updater ? nlohmann::json::parse(nn::spec_to_json(model.updater->spec())) : nlohmann::json();
  return j;
}

nlohmann::json snapshot(const char* op, const Model* model, const DatasetConfig* data, const EvalConfig& cfg,
                        std::size_t shapes) {
  nlohmann::json j;
  j["operation"] = op;
  j["eval"] = cfg.to_json();
  j["shapes"] = shapes;
  if (data) j["dataset"] = data->to_json();
  if (model) j["model"] = model_json(*model);
  return j;
}

}  // namespace

nlohmann::json EvalConfig::to_json() const {
  return {{"views", views},         {"max_views", max_views}, {"iterations", iterations},
          {"seed", seed},           {"max_shapes", max_shapes}, {"concave_threshold", concave_threshold},
          {"hull_resolution", hull_resolution}};
}

std::vector<EvalReport::Aggregate> EvalReport::aggregate(const std::set<std::string>* subset) const {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  std::vector<std::pair<std::string, int>> order;
  for (const EvalRow& r : rows) {
    if (subset && !subset->count(r.shape_id)) continue;
    const auto key = std::make_pair(r.method, r.views);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r.iou);
  }
  std::vector<Aggregate> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    for (double x : v) var += (x - mean) * (x - mean);
    out.push_back({key.first, key.second, v.size(), mean, std::sqrt(var / v.size())});
  }
  return out;
}

double EvalReport::mean_iou(const std::string& method, int views, const std::set<std::string>* subset) const {
  for (const Aggregate& a : aggregate(subset))
    if (a.method == method && a.views == views) return a.mean;
  throw Error("report has no rows for " + method + " with " + std::to_string(views) + " views");
}

std::vector<EvalShape> load_eval_shapes(const DatasetManifest& manifest, int max_shapes) {
  const std::size_t n = max_shapes < 0 ? manifest.samples.size()
                                       : std::min(manifest.samples.size(), static_cast<std::size_t>(max_shapes));
  if (n == 0) throw Error("evaluation: manifest has no shapes");
  std::vector<EvalShape> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SampleRecord& rec = manifest.samples[i];
    EvalShape& s = out[i];
    s.assets = load_shape(manifest, rec);
    s.records.resize(ViewpointId::kCount);
    s.drawings.resize(ViewpointId::kCount);
    std::vector<bool> seen(ViewpointId::kCount, false);
    for (const ViewRecord& v : rec.views) {
      if (v.view < 0 || v.view >= ViewpointId::kCount) throw Error("evaluation: bad view id in " + rec.shape_id);
      s.records[v.view] = v;
      s.drawings[v.view] = decode_drawing_png(read_file(manifest.resolve(v.drawing)));
      seen[v.view] = true;
    }
    for (int v = 0; v < ViewpointId::kCount; ++v)
      if (!seen[v]) throw Error("evaluation: shape " + rec.shape_id + " lacks view " + std::to_string(v));
  }
  return out;
}

std::vector<int> select_views(int count, Rng& rng) {
  if (count < 1 || count > ViewpointId::kCount) throw Error("view count must lie in [1, 13]");
  std::vector<int> rest;
  const int first = static_cast<int>(rng.uniform_int(0, 7));
  for (int v = 0; v < ViewpointId::kCount; ++v)
    if (v != first) rest.push_back(v);
  std::vector<int> out{first};
  for (int i = 1; i < count; ++i) {
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(rest.size()) - 1));
    out.push_back(rest[k]);
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

EvalReport evaluate(const Model& model, const DatasetManifest& manifest, const EvalConfig& config) {
  EvalReport r = evaluate(model, load_eval_shapes(manifest, config.max_shapes), config);
  r.config["dataset"] = manifest.config.to_json();
  return r;
}

EvalReport evaluate(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config) {
  if (shapes.empty()) throw Error("evaluation: no shapes");
  EvalReport report;
  report.config = snapshot("evaluate", &model, nullptr, config, shapes.size());
  report.rows.resize(shapes.size());
  parallel_for(shapes.size(), config.threads, [&](std::size_t i) {
    const EvalShape& s = shapes[i];
    Rng rng(mix_seed(config.seed, i));
    const std::vector<int> ids = select_views(config.views, rng);
    const WorldGrid& truth = s.assets.grid;
    FusionOptions opt;
    opt.iterations = config.iterations;
    const auto t0 = std::chrono::steady_clock::now();
    const FusionResult fr = fuse(model, view_set(s, ids, ids.size()), truth.frame(), truth.resolution(), opt);
    report.rows[i] = {s.assets.shape_id, "ours", config.views, iou(fr.grid, truth), elapsed_ms(t0)};
  });
  return report;
}

Mask mesh_silhouette(const Mesh& mesh, const Camera& cam, int width, int height) {
  const RenderMaps maps = render_maps(mesh, cam, width, height);
  Mask m(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) m.data[static_cast<std::size_t>(y) * width + x] = maps.hit(x, y);
  return m;
}

double visual_hull_iou(const EvalShape& shape, int resolution) {
  const GridFrame& frame = shape.assets.grid.frame();
  const WorldGrid solid = voxelize_mesh_in_frame(shape.assets.mesh, frame, resolution);
  CarveJob job;
  job.mode = ProjectionMode::Orthographic;
  job.frame = frame;
  job.resolution = resolution;
  for (int v = 0; v < ViewpointId::kCount; ++v) {
    const Camera cam = viewpoint_camera(ViewpointId(v), frame);
    job.views.push_back(
        {exact_mask(solid, cam, 4 * resolution, 4 * resolution, ProjectionMode::Orthographic), cam});
  }
  return iou(carve(job), solid);
}

EvalReport compare_carving(const Model& model, const DatasetManifest& manifest, const EvalConfig& config) {
  EvalReport r = compare_carving(model, load_eval_shapes(manifest, config.max_shapes), config);
  r.config["dataset"] = manifest.config.to_json();
  return r;
}

EvalReport compare_carving(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config) {
  if (shapes.empty()) throw Error("comparison: no shapes");
  if (config.max_views < 1 || config.max_views > 4) throw Error("comparison: view counts must lie in [1, 4]");
  const int K = config.max_views;
  EvalReport report;
  report.config = snapshot("compare", &model, nullptr, config, shapes.size());
  std::vector<std::vector<EvalRow>> per_shape(shapes.size());
  std::vector<char> concave(shapes.size(), 0);
  parallel_for(shapes.size(), config.threads, [&](std::size_t i) {
    const EvalShape& s = shapes[i];
    const WorldGrid& truth = s.assets.grid;
    const GridFrame& frame = truth.frame();
    const int n = truth.resolution();
    const int size = s.drawings[0].width;
    Rng rng(mix_seed(config.seed, i));
    const std::vector<int> random_ids = select_views(K, rng);
    const std::vector<int> ortho_ids(kOrthogonalViews, kOrthogonalViews + K);
    auto& rows = per_shape[i];
    auto carve_views = [&](const std::vector<int>& ids, int k, bool exact) {
      if (!exact) {
        std::vector<DrawingView> dv;
        for (int j = 0; j < k; ++j) dv.push_back({s.drawings[ids[j]], s.records[ids[j]].camera});
        return carve_from_drawings(dv, ProjectionMode::Perspective, frame, n);
      }
      CarveJob job;
      job.frame = frame;
      job.resolution = n;
      for (int j = 0; j < k; ++j) {
        const Camera& cam = s.records[ids[j]].camera;
        job.views.push_back({mesh_silhouette(s.assets.mesh, cam, size, size), cam});
      }
      return carve(job);
    };
    for (int k = 1; k <= K; ++k) {
      FusionOptions opt;
      opt.iterations = config.iterations;
      auto t0 = std::chrono::steady_clock::now();
      const FusionResult fr = fuse(model, view_set(s, random_ids, k), frame, n, opt);
      rows.push_back({s.assets.shape_id, "ours", k, iou(fr.grid, truth), elapsed_ms(t0)});
      for (bool exact : {false, true}) {
        const std::string suffix = exact ? "-exact" : "";
        t0 = std::chrono::steady_clock::now();
        const WorldGrid a = carve_views(random_ids, k, exact);
        rows.push_back({s.assets.shape_id, "carve-random" + suffix, k, iou(a, truth), elapsed_ms(t0)});
        t0 = std::chrono::steady_clock::now();
        const WorldGrid b = carve_views(ortho_ids, k, exact);
        rows.push_back({s.assets.shape_id, "carve-orthogonal" + suffix, k, iou(b, truth), elapsed_ms(t0)});
      }
    }
    concave[i] = visual_hull_iou(s, config.hull_resolution) < config.concave_threshold;
  });
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    report.rows.insert(report.rows.end(), per_shape[i].begin(), per_shape[i].end());
    if (concave[i]) report.concave.insert(shapes[i].assets.shape_id);
  }
  return report;
}

std::string format_report_csv(const EvalReport& report, bool with_timing) {
  std::string out = config_line(report.config);
  out += with_timing ? "shape_id,method,views,iou,time_ms\n" : "shape_id,method,views,iou\n";
  char buf[256];
  for (const EvalRow& r : report.rows) {
    if (with_timing)
      std::snprintf(buf, sizeof buf, "%s,%s,%d,%.6f,%.3f\n", r.shape_id.c_str(), r.method.c_str(), r.views, r.iou,
                    r.time_ms);
    else
      std::snprintf(buf, sizeof buf, "%s,%s,%d,%.6f\n", r.shape_id.c_str(), r.method.c_str(), r.views, r.iou);
    out += buf;
  }
  return out;
}

std::string format_aggregate_csv(const EvalReport& report, const std::set<std::string>* subset) {
  std::string out = config_line(report.config) + "method,views,count,mean_iou,std_iou\n";
  char buf[256];
  for (const auto& a : report.aggregate(subset)) {
    std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.6f,%.6f\n", a.method.c_str(), a.views, a.count, a.mean, a.stddev);
    out += buf;
  }
  return out;
}

void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept,
              double& r2) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_line: x values are all equal");
  slope = sxy / sxx;
  intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (slope * x[i] + intercept);
    ss_res += e * e;
  }
  r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
}

TimingReport bench_timing(const Model& model, const EvalShape& shape, int max_views, int repetitions,
                          int iterations) {
  if (repetitions < 1) throw Error("bench: repetitions must be positive");
  if (max_views < 2 || max_views > ViewpointId::kCount) throw Error("bench: max views must lie in [2, 13]");
  Rng rng(0);
  const std::vector<int> ids = select_views(max_views, rng);
  const WorldGrid& truth = shape.assets.grid;
  FusionOptions opt;
  opt.iterations = iterations;
  TimingReport rep;
  fuse(model, view_set(shape, ids, 1), truth.frame(), truth.resolution(), opt);  // warm-up
  for (int k = 1; k <= max_views; ++k) {
    const ViewSet vs = view_set(shape, ids, k);
    std::vector<double> times;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      fuse(model, vs, truth.frame(), truth.resolution(), opt);
      times.push_back(elapsed_ms(t0));
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size() / 2;
    rep.views.push_back(k);
    rep.median_ms.push_back(times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]));
  }
  const std::vector<double> x(rep.views.begin(), rep.views.end());
  fit_line(x, rep.median_ms, rep.slope, rep.intercept, rep.r2);
  rep.config = {{"operation", "bench"},
                {"max_views", max_views},
                {"repetitions", repetitions},
                {"iterations", iterations},
                {"shape", shape.assets.shape_id},
                {"model", model_json(model)}};
  return rep;
}

std::string format_timing_csv(const TimingReport& report) {
  std::string out = config_line(report.config) + "views,median_ms\n";
  char buf[128];
  for (std::size_t i = 0; i < report.views.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.3f\n", report.views[i], report.median_ms[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "# fit: slope_ms=%.4f intercept_ms=%.4f r2=%.6f\n", report.slope, report.intercept,
                report.r2);
  return out + buf;
}

const ConvergenceRow& ConvergenceReport::at(int views, int iteration) const {
  for (const ConvergenceRow& r : rows)
    if (r.views == views && r.iteration == iteration) return r;
  throw Error("convergence report has no row for " + std::to_string(views) + " views, iteration " +
              std::to_string(iteration));
}

ConvergenceReport convergence_report(const Model& model, const std::vector<EvalShape>& shapes,
                                     const std::vector<int>& view_counts, const EvalConfig& config) {
  if (shapes.empty()) throw Error("convergence: no shapes");
  if (config.iterations < 0 || config.iterations > 10) throw Error("convergence: iterations must lie in [0, 10]");
  const int T = config.iterations;
  ConvergenceReport rep;
  rep.config = snapshot("converge", &model, nullptr, config, shapes.size());
  rep.config["view_counts"] = view_counts;
  for (int k : view_counts) {
    std::vector<FusionResult> results(shapes.size());
    parallel_for(shapes.size(), config.threads, [&](std::size_t i) {
      const EvalShape& s = shapes[i];
      Rng rng(mix_seed(config.seed, i * 16 + static_cast<std::uint64_t>(k)));
      const std::vector<int> ids = select_views(k, rng);
      FusionOptions opt;
      opt.iterations = T;
      opt.truth = &s.assets.grid;
      results[i] = fuse(model, view_set(s, ids, ids.size()), s.assets.grid.frame(), s.assets.grid.resolution(), opt);
      results[i].grid = WorldGrid();  // keep only the trace
    });
    for (int t = 0; t <= T; ++t) {
      double l2 = 0.0, q = 0.0;
      for (const FusionResult& r : results) {
        q += t == 0 ? r.trace.initial_iou : r.trace.iou[t - 1];
        if (t > 0) l2 += r.trace.l2[t - 1];
      }
      const double n = static_cast<double>(results.size());
      rep.rows.push_back({k, t, t == 0 ? std::numeric_limits<double>::quiet_NaN() : l2 / n, q / n, results.size()});
    }
    for (const FusionResult& r : results)
      if (T >= 2) {
        ++rep.traces;
        rep.settled += r.trace.l2.back() < r.trace.l2.front();
      }
  }
  return rep;
}

std::string format_convergence_csv(const ConvergenceReport& report) {
  std::string out = config_line(report.config) + "views,iteration,mean_l2,mean_iou,count\n";
  char buf[160];
  for (const ConvergenceRow& r : report.rows) {
    if (std::isnan(r.mean_l2))
      std::snprintf(buf, sizeof buf, "%d,%d,,%.6f,%zu\n", r.views, r.iteration, r.mean_iou, r.count);
    else
      std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6f,%zu\n", r.views, r.iteration, r.mean_l2, r.mean_iou, r.count);
    out += buf;
  }
  return out;
}

// --- robustness ------------------------------------------------------------------------------

LineDrawing perturb_wavy(const LineDrawing& d, double amplitude, double wavelength, Rng& rng) {
  const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
  const double k = 2.0 * M_PI / wavelength;
  LineDrawing out(d.width, d.height);
  auto ink = [&](int x, int y) { return d.in_range(x, y) ? d.at(x, y) : 0.0f; };
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const double sx = x - amplitude * std::sin(k * y + p1), sy = y - amplitude * std::sin(k * x + p2);
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double tx = sx - x0, ty = sy - y0;
      const double v = (1 - tx) * (1 - ty) * ink(x0, y0) + tx * (1 - ty) * ink(x0 + 1, y0) +
                       (1 - tx) * ty * ink(x0, y0 + 1) + tx * ty * ink(x0 + 1, y0 + 1);
      out.at(x, y) = static_cast<float>(v);
    }
  return out;
}

LineDrawing perturb_incomplete(const LineDrawing& d, int holes, double radius, Rng& rng) {
  std::vector<std::pair<int, int>> ink;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      if (d.at(x, y) >= 0.5f) ink.emplace_back(x, y);
  LineDrawing out = d;
  if (ink.empty()) return out;
  const int r = static_cast<int>(std::ceil(radius));
  for (int h = 0; h < holes; ++h) {
    const auto [cx, cy] = ink[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ink.size()) - 1))];
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x)
        if (out.in_range(x, y) && (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) out.at(x, y) = 0.0f;
  }
  return out;
}

LineDrawing perturb_overshot(const LineDrawing& d, int length) {
  const int w = d.width, h = d.height;
  auto ink = [&](int x, int y) { return d.in_range(x, y) ? static_cast<double>(d.at(x, y)) : 0.0; };
  std::vector<double> gx(static_cast<std::size_t>(w) * h), gy(gx.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx[static_cast<std::size_t>(y) * w + x] = 0.5 * (ink(x + 1, y) - ink(x - 1, y));
      gy[static_cast<std::size_t>(y) * w + x] = 0.5 * (ink(x, y + 1) - ink(x, y - 1));
    }
  LineDrawing out = d;
  const int win = 3;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (d.at(x, y) < 0.5f) continue;
      // Structure tensor over a 7x7 window; strokes run across the dominant gradient.
      double jxx = 0.0, jxy = 0.0, jyy = 0.0;
      for (int v = std::max(0, y - win); v <= std::min(h - 1, y + win); ++v)
        for (int u = std::max(0, x - win); u <= std::min(w - 1, x + win); ++u) {
          const double a = gx[static_cast<std::size_t>(v) * w + u], b = gy[static_cast<std::size_t>(v) * w + u];
          jxx += a * a;
          jxy += a * b;
          jyy += b * b;
        }
      const double theta = 0.5 * std::atan2(2.0 * jxy, jxx - jyy) + 0.5 * M_PI;
      const double dx = std::cos(theta), dy = std::sin(theta);
      for (int t = 1; t <= length; ++t)
        for (int sgn : {-1, 1}) {
          const int px = static_cast<int>(std::lround(x + sgn * t * dx)), py = static_cast<int>(std::lround(y + sgn * t * dy));
          if (out.in_range(px, py)) out.at(px, py) = std::max(out.at(px, py), d.at(x, y));
        }
    }
  return out;
}

LineDrawing perturb_thick(const LineDrawing& d, int radius) {
  LineDrawing out(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      float m = 0.0f;
      for (int v = y - radius; v <= y + radius; ++v)
        for (int u = x - radius; u <= x + radius; ++u)
          if (d.in_range(u, v)) m = std::max(m, d.at(u, v));
      out.at(x, y) = m;
    }
  return out;
}

EvalReport robustness(const Model& model, const std::vector<EvalShape>& shapes, const EvalConfig& config) {
  if (shapes.empty()) throw Error("robustness: no shapes");
  EvalReport report;
  report.config = snapshot("robustness", &model, nullptr, config, shapes.size());
  report.config["variants"] = {{"wavy", {{"amplitude_px", 1.5}, {"wavelength_px", 16}}},
                               {"incomplete", {{"holes", 6}, {"radius_px", 3}}},
                               {"overshot", {{"length_px", 3}}},
                               {"thick", {{"radius_px", 1}}}};
  std::vector<std::vector<EvalRow>> per_shape(shapes.size());
  parallel_for(shapes.size(), config.threads, [&](std::size_t i) {
    const EvalShape& s = shapes[i];
    Rng rng(mix_seed(config.seed, i));
    const int view = static_cast<int>(rng.uniform_int(0, 7));
    const LineDrawing& clean = s.drawings[view];
    const std::vector<std::pair<std::string, LineDrawing>> variants = {
        {"clean", clean},
        {"wavy", perturb_wavy(clean, 1.5, 16.0, rng)},
        {"incomplete", perturb_incomplete(clean, 6, 3.0, rng)},
        {"overshot", perturb_overshot(clean, 3)},
        {"thick", perturb_thick(clean, 1)}};
    FusionOptions opt;
    opt.iterations = config.iterations;
    const WorldGrid& truth = s.assets.grid;
    for (const auto& [name, drawing] : variants) {
      const auto t0 = std::chrono::steady_clock::now();
      const FusionResult fr =
          fuse(model, {ViewInput{drawing, s.records[view].camera, view}}, truth.frame(), truth.resolution(), opt);
      per_shape[i].push_back({s.assets.shape_id, "robust-" + name, 1, iou(fr.grid, truth), elapsed_ms(t0)});
    }
  });
  for (auto& rows : per_shape) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  return report;
}

}  // namespace voxsketch
