#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "voxsketch/carve.hpp"
#include "voxsketch/harness.hpp"
#include "voxsketch/image.hpp"
#include "voxsketch/mesh.hpp"
#include "voxsketch/service.hpp"

using namespace voxsketch;
namespace fs = std::filesystem;

namespace {

struct ViewArg {
  std::string path;
  int view;
};

// "drawing.png:ID"
ViewArg parse_view_arg(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw Error("expected DRAWING.png:VIEW, got '" + text + "'");
  ViewArg a{text.substr(0, colon), 0};
  try {
    std::size_t used = 0;
    a.view = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw Error("bad viewpoint id in '" + text + "'");
  }
  ViewpointId{a.view};  // range check
  return a;
}

LineDrawing load_drawing(const std::string& path) { return decode_drawing_png(read_file(path)); }

/// Accepts a dataset directory or a manifest file.
DatasetManifest open_manifest(const std::string& path, const std::string& split) {
  if (fs::is_directory(path)) return read_manifest((fs::path(path) / ("manifest." + split)).string());
  return read_manifest(path);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_file(out, text);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_grid_or_mesh(const std::string& out, const WorldGrid& grid) {
  if (ends_with(out, ".obj"))
    write_obj(out, extract_mesh(grid));
  else
    write_vxg(out, grid);
}

HttpService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel reconstruction from line drawings"};
  app.require_subcommand(1);

  // dataset build
  auto* dataset = app.add_subcommand("dataset", "Synthetic dataset generation");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Build drawings, grids and manifests");
  std::string source = "grammar", mesh_dir, data_out;
  int count = -1, test_count = -1;
  std::uint64_t seed = 0;
  bool full = false, toy = false;
  build->add_option("--source", source, "grammar | mesh-dir")->check(CLI::IsMember({"grammar", "mesh-dir"}));
  build->add_option("--mesh-dir", mesh_dir, "Directory of OBJ files for --source mesh-dir");
  build->add_option("--count", count, "Number of shapes");
  build->add_option("--test-count", test_count, "Held-out shapes (default: 10%)");
  build->add_flag("--toy", toy, "Toy scale (default)");
  build->add_flag("--full", full, "Full scale");
  build->add_option("--seed", seed);
  build->add_option("--out", data_out)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the single-view or updater network");
  std::string stage = "single", data, weights, out, loss_csv, single_weights;
  long iterations = -1, checkpoint_every = 0;
  int batch = 8;
  train_cmd->add_option("stage", stage, "single | updater")->check(CLI::IsMember({"single", "updater"}));
  train_cmd->add_option("--data", data, "Dataset directory or training manifest")->required();
  train_cmd->add_option("--single", single_weights, "Trained single-view checkpoint (updater stage)");
  train_cmd->add_flag("--toy", toy);
  train_cmd->add_flag("--full", full);
  train_cmd->add_option("--iterations", iterations);
  train_cmd->add_option("--batch", batch);
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--checkpoint-every", checkpoint_every);
  train_cmd->add_option("--loss-csv", loss_csv);
  train_cmd->add_option("--out", out)->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Reconstruct a grid from one or more drawings");
  std::string drawing, trace, truth;
  int view = 0, fuse_iterations = 5;
  std::vector<std::string> more;
  predict->add_option("--weights", weights)->required();
  predict->add_option("--drawing", drawing)->required();
  predict->add_option("--view", view)->required();
  predict->add_option("--more", more, "Further drawings as D.png:ID");
  predict->add_option("--iterations", fuse_iterations);
  predict->add_option("--out", out, "grid.vxg or mesh.obj")->required();
  predict->add_option("--trace", trace, "Convergence trace CSV");
  predict->add_option("--truth", truth, "Ground-truth grid for IoU in the trace");

  // carve
  auto* carve_cmd = app.add_subcommand("carve", "Silhouette carving baseline");
  std::string mode = "perspective";
  std::vector<std::string> inputs;
  int resolution = 16;
  carve_cmd->add_option("--mode", mode)->check(CLI::IsMember({"perspective", "orthographic"}));
  carve_cmd->add_option("--inputs", inputs, "Drawings as D.png:ID")->required();
  carve_cmd->add_option("--resolution", resolution);
  carve_cmd->add_option("--out", out)->required();

  // evaluation family
  EvalConfig ec;
  std::vector<int> view_counts = {2, 3, 4};
  int repetitions = 5;
  bool timing = false;
  auto add_eval_common = [&](CLI::App* c) {
    c->add_option("--weights", weights)->required();
    c->add_option("--data", data, "Dataset directory or test manifest")->required();
    c->add_option("--seed", ec.seed);
    c->add_option("--max-shapes", ec.max_shapes);
    c->add_option("--threads", ec.threads);
    c->add_option("--out", out, "CSV path (default: stdout)");
  };
  auto* eval = app.add_subcommand("eval", "Per-shape IoU of fused predictions");
  add_eval_common(eval);
  eval->add_option("--views", ec.views);
  eval->add_option("--iterations", ec.iterations);
  eval->add_flag("--timing", timing, "Include wall time per row");
  auto* compare = app.add_subcommand("compare", "Ours against silhouette carving, 1..N views");
  add_eval_common(compare);
  compare->add_option("--max-views", ec.max_views);
  compare->add_option("--iterations", ec.iterations);
  compare->add_option("--concave-threshold", ec.concave_threshold);
  compare->add_flag("--timing", timing);
  auto* bench = app.add_subcommand("bench", "Inference time against view count");
  add_eval_common(bench);
  bench->add_option("--max-views", ec.max_views);
  bench->add_option("--repetitions", repetitions);
  bench->add_option("--iterations", ec.iterations);
  auto* converge = app.add_subcommand("converge", "Inter-iteration distance and IoU per sweep");
  add_eval_common(converge);
  converge->add_option("--views", view_counts);
  int converge_iterations = 10;
  converge->add_option("--iterations", converge_iterations);
  auto* robust = app.add_subcommand("robust", "Single-view IoU under perturbed strokes");
  add_eval_common(robust);

  // serve
  auto* serve = app.add_subcommand("serve", "Session API over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceConfig sc;
  serve->add_option("--weights", weights)->required();
  serve->add_flag("--toy", toy);
  serve->add_flag("--full", full);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--max-sessions", sc.max_sessions);
  serve->add_option("--iterations", sc.iterations);
  serve->add_flag("--incremental", sc.incremental, "One sweep per new drawing instead of a full re-fusion");

  CLI11_PARSE(app, argc, argv);
  if (toy && full) {
    std::cerr << "error: --toy and --full are exclusive\n";
    return 2;
  }

  try {
    if (build->parsed()) {
      DatasetConfig cfg = full ? DatasetConfig::full() : DatasetConfig::toy();
      if (count > 0) cfg.shape_count = count;
      cfg.test_count = test_count;
      cfg.seed = seed;
      const BuildResult r = build_dataset(source == "grammar" ? DatasetSource::Grammar : DatasetSource::MeshDirectory,
                                          mesh_dir, cfg, data_out);
      std::printf("train %zu, test %zu, skipped %zu\n", r.train.samples.size(), r.test.samples.size(),
                  r.errors.size());
      for (const auto& e : r.errors) std::fprintf(stderr, "skipped: %s\n", e.c_str());
    } else if (train_cmd->parsed()) {
      TrainingConfig cfg = full ? TrainingConfig::full() : TrainingConfig::toy();
      if (iterations > 0) cfg.iterations = iterations;
      cfg.batch_size = batch;
      cfg.seed = seed;
      cfg.checkpoint_every = checkpoint_every;
      cfg.loss_csv_path = loss_csv;
      cfg.diagnostic_path = out + ".diverged";
      cfg.log_every = std::max<long>(1, std::min<long>(cfg.log_every, cfg.iterations / 20));
      const DatasetManifest manifest = open_manifest(data, "train");
      const std::string preset = full ? "full" : "toy";
      auto report = [&](long it, double loss) {
        if ((it + 1) % cfg.log_every == 0) std::fprintf(stderr, "iteration %ld loss %.5f\n", it + 1, loss);
        return true;
      };
      if (stage == "single") {
        cfg.checkpoint_path = out;
        Network net(nn::preset_spec(preset, false));
        net.initialize(seed);
        const TrainingResult r = train_single_view(manifest, net, cfg, report);
        std::printf("trained %ld iterations, final loss %.5f\n", r.iterations, r.final_loss);
      } else {
        if (single_weights.empty()) throw Error("updater training needs --single");
        Checkpoint ck = load_checkpoint(single_weights);
        if (!ck.single) throw Error(single_weights + " holds no single-view network");
        cfg.checkpoint_path = out + ".updater";
        auto updater = std::make_shared<Network>(nn::preset_spec(preset, true));
        updater->initialize(seed + 1);
        const TrainingResult r = train_updater(manifest, ck.single, *updater, cfg, report);
        ck.updater = updater;
        ck.metadata["updater_iterations"] = std::to_string(r.iterations);
        save_checkpoint(out, ck);
        fs::remove(cfg.checkpoint_path);
        std::printf("trained %ld iterations, final loss %.5f\n", r.iterations, r.final_loss);
      }
    } else if (predict->parsed()) {
      const Model model = load_model(weights);
      FusionOptions opt;
      opt.iterations = fuse_iterations;
      // With a ground-truth grid, predict in its frame so the two align.
      WorldGrid truth_grid;
      GridFrame frame{};
      int res = model.slices();
      if (!truth.empty()) {
        truth_grid = read_vxg(truth);
        opt.truth = &truth_grid;
        frame = truth_grid.frame();
        res = truth_grid.resolution();
      }
      ViewSet views;
      std::vector<ViewArg> args = {{drawing, view}};
      for (const auto& m : more) args.push_back(parse_view_arg(m));
      for (const auto& a : args)
        views.push_back({load_drawing(a.path), viewpoint_camera(ViewpointId(a.view), frame), a.view});
      const FusionResult r = fuse(model, views, frame, res, opt);
      write_grid_or_mesh(out, r.grid);
      if (!trace.empty()) {
        std::string csv = "iteration,l2,iou\n";
        char buf[96];
        std::snprintf(buf, sizeof buf, "0,,%s\n", opt.truth ? std::to_string(r.trace.initial_iou).c_str() : "");
        csv += buf;
        for (std::size_t i = 0; i < r.trace.l2.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%zu,%.6g,%s\n", i + 1, r.trace.l2[i],
                        opt.truth ? std::to_string(r.trace.iou[i]).c_str() : "");
          csv += buf;
        }
        write_file(trace, csv);
      }
    } else if (carve_cmd->parsed()) {
      std::vector<DrawingView> views;
      for (const auto& s : inputs) {
        const ViewArg a = parse_view_arg(s);
        views.push_back({load_drawing(a.path), viewpoint_camera(ViewpointId(a.view), GridFrame{})});
      }
      write_grid_or_mesh(out, carve_from_drawings(views, parse_projection_mode(mode), GridFrame{}, resolution));
    } else if (eval->parsed()) {
      const EvalReport r = evaluate(load_model(weights), open_manifest(data, "test"), ec);
      emit(out, format_report_csv(r, timing));
      std::fputs(format_aggregate_csv(r).c_str(), stderr);
    } else if (compare->parsed()) {
      const EvalReport r = compare_carving(load_model(weights), open_manifest(data, "test"), ec);
      emit(out, format_report_csv(r, timing));
      std::fputs(format_aggregate_csv(r).c_str(), stderr);
      std::fprintf(stderr, "# concave subset: %zu shapes\n", r.concave.size());
      if (!r.concave.empty()) std::fputs(format_aggregate_csv(r, &r.concave).c_str(), stderr);
    } else if (bench->parsed()) {
      const DatasetManifest m = open_manifest(data, "test");
      const std::vector<EvalShape> shapes = load_eval_shapes(m, 1);
      emit(out, format_timing_csv(bench_timing(load_model(weights), shapes.front(), ec.max_views, repetitions,
                                               ec.iterations)));
    } else if (converge->parsed()) {
      const DatasetManifest m = open_manifest(data, "test");
      ec.iterations = converge_iterations;
      emit(out, format_convergence_csv(
                    convergence_report(load_model(weights), load_eval_shapes(m, ec.max_shapes), view_counts, ec)));
    } else if (robust->parsed()) {
      const DatasetManifest m = open_manifest(data, "test");
      const EvalReport r = robustness(load_model(weights), load_eval_shapes(m, ec.max_shapes), ec);
      emit(out, format_report_csv(r, false));
      std::fputs(format_aggregate_csv(r).c_str(), stderr);
    } else if (serve->parsed()) {
      const Model model = load_model(weights);
      const std::string preset = full ? "full" : "toy";
      if (!(model.single->spec() == nn::preset_spec(preset, false)))
        throw Error(weights + " does not hold a " + preset + " network");
      HttpService service(model, sc);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "listening on http://%s:%d\n", host.c_str(), port);
      if (!service.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
