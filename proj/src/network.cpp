#include "voxsketch/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "voxsketch/render.hpp"
#include "voxsketch/resample.hpp"

namespace voxsketch {

namespace nn {

int NetworkSpec::encoder_input_channels(int i) const {
  if (i == 0) return input_channels;
  const int extra = (updater && i == inject_after + 1) ? slices : 0;
  return encoder_channels[i - 1] + extra;
}

int NetworkSpec::decoder_input_channels(int j) const {
  if (j == 0) return encoder_channels.back();
  const int s = skip_sources[j - 1];
  return decoder_channels[j - 1] + (s >= 0 ? encoder_channels[s] : 0);
}

void NetworkSpec::validate() const {
  auto fail = [&](const std::string& what) { throw Error("network spec '" + name + "': " + what); };
  const int L = static_cast<int>(encoder_channels.size()), M = static_cast<int>(decoder_channels.size());
  if (L == 0 || M == 0) fail("encoder and decoder need at least one layer");
  if (input_channels < 1) fail("input channels must be positive");
  for (int c : encoder_channels)
    if (c < 1) fail("encoder channel counts must be positive");
  for (int c : decoder_channels)
    if (c < 1) fail("decoder channel counts must be positive");
  if (slices < 1) fail("slices must be positive");
  int r = input_resolution;
  for (int i = 0; i < L; ++i) {
    if (r < 2 || r % 2 != 0)
      fail("resolution " + std::to_string(r) + " entering encoder layer " + std::to_string(i) + " is not halvable");
    r /= 2;
  }
  const long out = static_cast<long>(r) << M;
  if (out != slices)
    fail("decoder output resolution " + std::to_string(out) + " differs from slice count " + std::to_string(slices));
  if (decoder_channels.back() != 2 * slices) fail("final decoder layer must have 2 channels per slice");
  if (static_cast<int>(skip_sources.size()) != M - 1)
    fail("expected " + std::to_string(M - 1) + " skip entries, got " + std::to_string(skip_sources.size()));
  for (int j = 0; j + 1 < M; ++j) {
    const int s = skip_sources[j];
    if (s < -1 || s >= L) fail("skip source " + std::to_string(s) + " out of range");
    if (s >= 0 && encoder_resolution(s) != decoder_resolution(j))
      fail("skip from encoder layer " + std::to_string(s) + " (resolution " + std::to_string(encoder_resolution(s)) +
           ") to decoder layer " + std::to_string(j) + " (resolution " + std::to_string(decoder_resolution(j)) + ")");
  }
  if (decoder_dropout < 0 || decoder_dropout > M - 1) fail("dropout layer count out of range");
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) fail("leaky slope must lie in [0, 1)");
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) fail("dropout rate must lie in [0, 1)");
  if (updater) {
    if (inject_after < 0 || inject_after > L - 2) fail("injection layer out of range");
    if (encoder_resolution(inject_after) != slices)
      fail("injection resolution " + std::to_string(encoder_resolution(inject_after)) +
           " differs from slice count " + std::to_string(slices));
  }
}

namespace {

NetworkSpec make_spec(std::string name, int input, std::vector<int> enc, std::vector<int> dec, int slices,
                      bool updater) {
  NetworkSpec s;
  s.name = std::move(name);
  s.input_resolution = input;
  s.encoder_channels = std::move(enc);
  s.decoder_channels = std::move(dec);
  s.slices = slices;
  s.updater = updater;
  // Every non-final decoder output is joined with the encoder output of the
  // same resolution.
  const int L = static_cast<int>(s.encoder_channels.size());
  for (int j = 0; j + 1 < static_cast<int>(s.decoder_channels.size()); ++j) {
    int src = -1;
    for (int i = 0; i < L; ++i)
      if (s.encoder_resolution(i) == s.decoder_resolution(j)) src = i;
    s.skip_sources.push_back(src);
  }
  s.validate();
  return s;
}

}  // namespace

NetworkSpec toy_spec(bool updater) {
  return make_spec(updater ? "toy-updater" : "toy-single", 64, {16, 32, 64, 128, 128, 128}, {128, 128, 64, 32}, 16,
                   updater);
}

NetworkSpec full_spec(bool updater) {
  return make_spec(updater ? "full-updater" : "full-single", 256, {64, 128, 256, 512, 512, 512, 512, 512},
                   {512, 512, 512, 512, 256, 128}, 64, updater);
}

NetworkSpec preset_spec(const std::string& preset, bool updater) {
  if (preset == "toy") return toy_spec(updater);
  if (preset == "full") return full_spec(updater);
  throw Error("unknown network preset '" + preset + "'");
}

namespace {

nlohmann::json spec_json(const NetworkSpec& s) {
  return {{"name", s.name},
          {"input_resolution", s.input_resolution},
          {"input_channels", s.input_channels},
          {"encoder_channels", s.encoder_channels},
          {"decoder_channels", s.decoder_channels},
          {"skip_sources", s.skip_sources},
          {"decoder_dropout", s.decoder_dropout},
          {"slices", s.slices},
          {"updater", s.updater},
          {"inject_after", s.inject_after},
          {"leaky_slope", s.leaky_slope},
          {"dropout_rate", s.dropout_rate}};
}

NetworkSpec spec_from(const nlohmann::json& j) {
  NetworkSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.input_resolution = j.at("input_resolution").get<int>();
    s.input_channels = j.at("input_channels").get<int>();
    s.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    s.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
    s.skip_sources = j.at("skip_sources").get<std::vector<int>>();
    s.decoder_dropout = j.at("decoder_dropout").get<int>();
    s.slices = j.at("slices").get<int>();
    s.updater = j.at("updater").get<bool>();
    s.inject_after = j.at("inject_after").get<int>();
    s.leaky_slope = j.at("leaky_slope").get<float>();
    s.dropout_rate = j.at("dropout_rate").get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("network spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return spec_json(spec).dump(); }

NetworkSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("network spec: ") + e.what());
  }
}

}  // namespace nn

// --- conversions ------------------------------------------------------------------------

void drawing_into_tensor(const LineDrawing& drawing, nn::Tensor<float>& x, int batch) {
  if (x.c != 1 || drawing.width != x.w || drawing.height != x.h)
    throw Error("drawing " + std::to_string(drawing.width) + "x" + std::to_string(drawing.height) +
                " does not match network input " + std::to_string(x.w) + "x" + std::to_string(x.h));
  std::copy(drawing.data.begin(), drawing.data.end(), x.data.begin() + x.index(batch, 0, 0, 0));
}

void frustum_into_tensor(const FrustumGrid& frustum, nn::Tensor<float>& x, int batch) {
  if (frustum.depth() != x.c || frustum.height() != x.h || frustum.width() != x.w)
    throw Error("frustum " + std::to_string(frustum.depth()) + "x" + std::to_string(frustum.height()) + "x" +
                std::to_string(frustum.width()) + " does not match tensor " + x.shape_string());
  auto v = frustum.values();
  std::copy(v.begin(), v.end(), x.data.begin() + x.index(batch, 0, 0, 0));
}

void tensor_into_frustum(const nn::Tensor<float>& probs, int batch, FrustumGrid& frustum) {
  if (frustum.depth() != probs.c || frustum.height() != probs.h || frustum.width() != probs.w)
    throw Error("tensor " + probs.shape_string() + " does not match frustum");
  auto v = frustum.values();
  std::copy_n(probs.data.begin() + probs.index(batch, 0, 0, 0), v.size(), v.begin());
}

FrustumGrid predict_frustum(const Network& net, const LineDrawing& drawing, const Camera& camera,
                            const GridFrame& frame, const FrustumGrid* injected) {
  const NetworkSpec& spec = net.spec();
  const int r = spec.input_resolution, d = spec.slices;
  nn::Tensor<float> x(1, 1, r, r);
  drawing_into_tensor(drawing, x, 0);
  nn::Tensor<float> inj;
  if (injected) {
    const int ir = spec.encoder_resolution(spec.inject_after);
    inj = nn::Tensor<float>(1, d, ir, ir);
    frustum_into_tensor(*injected, inj, 0);
  }
  const nn::Tensor<float> probs = net.infer(x, injected ? &inj : nullptr);
  FrustumGrid out = make_frustum(camera, frame, d, d, d);
  tensor_into_frustum(probs, 0, out);
  return out;
}

// --- checkpoints ------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'X', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void need(std::size_t n) const {
    if (buf.size() - pos < n) throw Error("checkpoint: truncated file");
  }
};

struct Blob {
  std::vector<int> dims;
  std::vector<float> values;
};

void put_blob(std::string& out, const std::string& name, const std::vector<int>& dims, const float* values,
              std::size_t count) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < count; ++i) put_u32(out, std::bit_cast<std::uint32_t>(values[i]));
}

template <typename Fn>
void for_each_blob(Network& net, Fn&& fn) {
  for (auto* p : net.params()) {
    fn(p->name, p->shape, p->value);
    fn(p->name + ".adam_m", p->shape, p->m);
    fn(p->name + ".adam_v", p->shape, p->v);
  }
  for (auto* bn : net.batch_norms()) {
    const std::string base = bn->gamma.name.substr(0, bn->gamma.name.size() - 6);  // strip ".gamma"
    fn(base + ".running_mean", std::vector<int>{bn->channels}, bn->running_mean);
    fn(base + ".running_var", std::vector<int>{bn->channels}, bn->running_var);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  if (!ck.single && !ck.updater) throw Error("checkpoint: nothing to save");
  nlohmann::json header = {{"single", nullptr}, {"updater", nullptr}, {"metadata", ck.metadata}};
  if (ck.single) header["single"] = nlohmann::json::parse(nn::spec_to_json(ck.single->spec()));
  if (ck.updater) header["updater"] = nlohmann::json::parse(nn::spec_to_json(ck.updater->spec()));
  const std::string hdr = header.dump();

  std::string body;
  std::uint32_t count = 0;
  auto emit = [&](const std::string& prefix, Network& net) {
    for_each_blob(net, [&](const std::string& name, const std::vector<int>& dims, std::vector<float>& v) {
      put_blob(body, prefix + name, dims, v.data(), v.size());
      ++count;
    });
  };
  if (ck.single) emit("single/", *ck.single);
  if (ck.updater) emit("updater/", *ck.updater);

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  put_u32(out, count);
  out += body;
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path, bool strict) {
  const std::string buf = read_file(path);
  Reader rd{buf};
  if (rd.bytes(4) != std::string(kMagic, 4)) throw Error("checkpoint: bad magic in " + path);
  const std::uint32_t version = rd.u32();
  if (version != kCheckpointVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(rd.bytes(rd.u32()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("checkpoint: bad header: ") + e.what());
  }
  std::map<std::string, Blob> blobs;
  const std::uint32_t count = rd.u32();
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::string name = rd.bytes(rd.u32());
    Blob blob;
    const std::uint32_t rank = rd.u32();
    if (rank > 8) throw Error("checkpoint: blob '" + name + "' has rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      blob.dims.push_back(static_cast<int>(rd.u32()));
      n *= static_cast<std::size_t>(blob.dims.back());
    }
    rd.need(4 * n);
    blob.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) blob.values[i] = std::bit_cast<float>(rd.u32());
    blobs[name] = std::move(blob);
  }

  Checkpoint ck;
  if (header.contains("metadata") && header["metadata"].is_object())
    for (auto& [k, v] : header["metadata"].items()) ck.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
  auto restore = [&](const std::string& key) -> std::shared_ptr<Network> {
    if (!header.contains(key) || header[key].is_null()) return nullptr;
    auto net = std::make_shared<Network>(nn::spec_from_json(header[key].dump()));
    for_each_blob(*net, [&](const std::string& name, const std::vector<int>& dims, std::vector<float>& v) {
      auto it = blobs.find(key + "/" + name);
      if (it == blobs.end()) throw Error("checkpoint: missing blob '" + key + "/" + name + "'");
      if (it->second.dims != dims) throw Error("checkpoint: blob '" + key + "/" + name + "' has wrong shape");
      v = it->second.values;
    });
    if (strict)
      for (auto* bn : net->batch_norms())
        for (float var : bn->running_var)
          if (!(var > 0.0f)) throw Error("checkpoint: nonpositive running variance in " + bn->gamma.name);
    return net;
  };
  ck.single = restore("single");
  ck.updater = restore("updater");
  if (!ck.single && !ck.updater) throw Error("checkpoint: no networks in " + path);
  return ck;
}

Model load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.single) throw Error("checkpoint " + path + " has no single-view network");
  if (ck.updater && ck.updater->spec().slices != ck.single->spec().slices)
    throw Error("checkpoint " + path + ": single-view and updater slice counts differ");
  return ck.model();
}

// --- training ---------------------------------------------------------------------------

TrainingConfig TrainingConfig::toy() { return TrainingConfig{}; }

TrainingConfig TrainingConfig::full() {
  TrainingConfig c;
  c.iterations = 1000000;
  c.log_every = 1000;
  c.checkpoint_every = 50000;
  return c;
}

void TrainingConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw Error("training: batch size must be positive");
  if (iterations < 0) throw Error("training: iteration count must be nonnegative");
  if (log_every < 1) throw Error("training: log period must be positive");
  if (checkpoint_every < 0) throw Error("training: checkpoint period must be nonnegative");
}

FixedExampleSource::FixedExampleSource(std::vector<TrainingExample> examples) : examples_(std::move(examples)) {
  if (examples_.empty()) throw Error("fixed example source: no examples");
}

TrainingExample FixedExampleSource::next(Rng& rng) {
  if (cursor_ == order_.size()) {
    order_.resize(examples_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    cursor_ = 0;
  }
  return examples_[order_[cursor_++]];
}

namespace {

TrainingExample from_pair(SamplePair&& pair) {
  TrainingExample ex;
  ex.drawing = std::move(pair.drawing);
  ex.target = std::move(pair.target);
  ex.view = pair.view;
  ex.shape_id = std::move(pair.shape_id);
  return ex;
}

std::size_t pick_shape(const std::vector<ShapeAssets>& shapes, Rng& rng) {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(shapes.size()) - 1));
}

WorldGrid world_prediction(const ShapeAssets& shape, const Camera& camera, const Network& single,
                           const DatasetConfig& config) {
  const GridFrame& frame = shape.grid.frame();
  const LineDrawing drawing =
      draw_mesh(shape.mesh, camera, frame, config.drawing_size, config.drawing_size, config.contours);
  const FrustumGrid fr = predict_frustum(single, drawing, camera, frame);
  return resample_frustum_to_world(fr, frame, shape.grid.resolution(), 0.0f);
}

}  // namespace

SingleViewSource::SingleViewSource(std::shared_ptr<const std::vector<ShapeAssets>> shapes, DatasetConfig config)
    : shapes_(std::move(shapes)), config_(std::move(config)) {
  if (!shapes_ || shapes_->empty()) throw Error("single-view source: no shapes");
}

TrainingExample SingleViewSource::next(Rng& rng) {
  const std::size_t i = pick_shape(*shapes_, rng);
  return from_pair(make_pair((*shapes_)[i], PairKind::SingleView, config_, rng));
}

UpdaterSource::UpdaterSource(std::shared_ptr<const std::vector<ShapeAssets>> shapes, DatasetConfig config,
                             std::shared_ptr<const Network> single, std::uint64_t seed)
    : shapes_(std::move(shapes)), config_(std::move(config)), single_(std::move(single)), seed_(seed) {
  if (!shapes_ || shapes_->empty()) throw Error("updater source: no shapes");
  if (!single_) throw Error("updater source: single-view network required");
}

const WorldGrid& UpdaterSource::source_prediction(std::size_t shape, int source_view) {
  const auto key = std::make_pair(shape, source_view);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const ShapeAssets& s = (*shapes_)[shape];
  Rng rng(mix_seed(seed_, shape * 16 + static_cast<std::uint64_t>(source_view)));
  const Camera cam = stored_view_camera(source_view, s.grid.frame(), config_, rng);
  return cache_.emplace(key, world_prediction(s, cam, *single_, config_)).first->second;
}

TrainingExample UpdaterSource::next(Rng& rng) {
  const std::size_t i = pick_shape(*shapes_, rng);
  SamplePair pair = make_pair((*shapes_)[i], PairKind::Updater, config_, rng);
  // Any viewpoint other than the target, accidental ones included
  // (corner-only sources let repeated sweeps erode the shape).
  int source = static_cast<int>(rng.uniform_int(0, ViewpointId::kCount - 2));
  if (source >= pair.view) ++source;
  const Camera cam = pair.camera;
  const int d = config_.frustum_slices;
  TrainingExample ex = from_pair(std::move(pair));
  ex.injected = resample_world_to_frustum(source_prediction(i, source), cam, d, d, d);
  ex.source_view = source;
  return ex;
}

TrainingExample updater_example(const ShapeAssets& shape, int view, const Camera& camera, int source_view,
                                const Camera& source_camera, const Network& single, const DatasetConfig& config) {
  if (source_view == view) throw Error("updater example: source view equals target view");
  TrainingExample ex = from_pair(make_pair_for_camera(shape, view, camera, config));
  const int d = config.frustum_slices;
  ex.injected = resample_world_to_frustum(world_prediction(shape, source_camera, single, config), camera, d, d, d);
  ex.source_view = source_view;
  return ex;
}

namespace {

void check_example(const NetworkSpec& spec, const TrainingExample& ex) {
  const int d = spec.slices;
  if (ex.target.depth() != d || ex.target.height() != d || ex.target.width() != d)
    throw Error("training: target frustum does not match network output");
  if (spec.updater && !ex.injected) throw Error("training: updater example without injected prediction");
}

void fill_batch(const NetworkSpec& spec, const std::vector<TrainingExample>& batch, nn::Tensor<float>& x,
                nn::Tensor<float>& inj, std::vector<std::uint8_t>* labels) {
  const int r = spec.input_resolution, d = spec.slices, n = static_cast<int>(batch.size());
  x = nn::Tensor<float>(n, 1, r, r);
  if (spec.updater) {
    const int ir = spec.encoder_resolution(spec.inject_after);
    inj = nn::Tensor<float>(n, d, ir, ir);
  }
  if (labels) labels->clear();
  for (int b = 0; b < n; ++b) {
    check_example(spec, batch[b]);
    drawing_into_tensor(batch[b].drawing, x, b);
    if (spec.updater) frustum_into_tensor(*batch[b].injected, inj, b);
    if (labels)
      for (float v : batch[b].target.values()) labels->push_back(v >= kOccupancyThreshold ? 1 : 0);
  }
}

Checkpoint wrap(Network& net) {
  Checkpoint ck;
  std::shared_ptr<Network> alias(std::shared_ptr<Network>{}, &net);
  (net.spec().updater ? ck.updater : ck.single) = alias;
  return ck;
}

}  // namespace

TrainingResult train(Network& net, ExampleSource& source, const TrainingConfig& config, const StepCallback& on_step) {
  config.validate();
  const NetworkSpec& spec = net.spec();
  Rng rng(config.seed);
  Rng drop_rng(mix_seed(config.seed, 0xd40f));
  auto params = net.params();
  nn::Workspace<float> ws;
  nn::Tensor<float> x, inj, grad;
  std::vector<std::uint8_t> labels;
  std::vector<TrainingExample> batch(config.batch_size);
  TrainingResult result;
  double window = 0.0;
  long window_count = 0;

  for (long it = 0; it < config.iterations; ++it) {
    for (auto& ex : batch) ex = source.next(rng);
    fill_batch(spec, batch, x, inj, &labels);
    const nn::Tensor<float> logits =
        net.forward_train(x, spec.updater ? &inj : nullptr, config.dropout ? &drop_rng : nullptr, ws);
    const double loss = nn::softmax_cross_entropy(logits, labels, &grad);
    if (!std::isfinite(loss)) {
      if (!config.diagnostic_path.empty()) {
        Checkpoint ck = wrap(net);
        ck.metadata["diverged_at"] = std::to_string(it);
        save_checkpoint(config.diagnostic_path, ck);
      }
      throw Error("training diverged (non-finite loss) at iteration " + std::to_string(it) +
                  (config.diagnostic_path.empty() ? "" : "; state written to " + config.diagnostic_path));
    }
    net.zero_grad();
    net.backward(grad, ws);
    nn::adam_step(params, config.adam, it + 1);

    window += loss;
    ++window_count;
    result.iterations = it + 1;
    result.final_loss = loss;
    if (it % config.log_every == 0 || it + 1 == config.iterations) {
      result.curve.push_back({it, window / window_count});
      window = 0.0;
      window_count = 0;
    }
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() && (it + 1) % config.checkpoint_every == 0) {
      Checkpoint ck = wrap(net);
      ck.metadata["iteration"] = std::to_string(it + 1);
      save_checkpoint(config.checkpoint_path, ck);
    }
    if (on_step && !on_step(it, loss)) break;
  }
  if (window_count > 0) result.curve.push_back({result.iterations - 1, window / window_count});
  if (!config.loss_csv_path.empty()) write_loss_csv(config.loss_csv_path, result.curve);
  if (!config.checkpoint_path.empty()) {
    Checkpoint ck = wrap(net);
    ck.metadata["iteration"] = std::to_string(result.iterations);
    save_checkpoint(config.checkpoint_path, ck);
  }
  return result;
}

double voxel_accuracy(const Network& net, const std::vector<TrainingExample>& examples) {
  const NetworkSpec& spec = net.spec();
  std::size_t correct = 0, total = 0;
  for (std::size_t start = 0; start < examples.size(); start += 8) {
    const std::vector<TrainingExample> chunk(examples.begin() + start,
                                             examples.begin() + std::min(examples.size(), start + 8));
    nn::Tensor<float> x, inj;
    std::vector<std::uint8_t> labels;
    fill_batch(spec, chunk, x, inj, &labels);
    const nn::Tensor<float> probs = net.infer(x, spec.updater ? &inj : nullptr);
    for (std::size_t i = 0; i < labels.size(); ++i)
      correct += (probs.data[i] >= kOccupancyThreshold) == (labels[i] != 0);
    total += labels.size();
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

std::shared_ptr<std::vector<ShapeAssets>> load_shapes(const DatasetManifest& manifest) {
  auto shapes = std::make_shared<std::vector<ShapeAssets>>();
  shapes->reserve(manifest.samples.size());
  for (const SampleRecord& rec : manifest.samples) shapes->push_back(load_shape(manifest, rec));
  return shapes;
}

TrainingResult train_single_view(const DatasetManifest& manifest, Network& net, const TrainingConfig& config,
                                 const StepCallback& on_step) {
  if (net.spec().updater) throw Error("train_single_view: network is an updater");
  if (manifest.samples.empty()) throw Error("train_single_view: empty manifest");
  SingleViewSource source(load_shapes(manifest), manifest.config);
  return train(net, source, config, on_step);
}

TrainingResult train_updater(const DatasetManifest& manifest, std::shared_ptr<const Network> single,
                             Network& updater, const TrainingConfig& config, const StepCallback& on_step) {
  if (!updater.spec().updater) throw Error("train_updater: network is not an updater");
  if (manifest.samples.empty()) throw Error("train_updater: empty manifest");
  UpdaterSource source(load_shapes(manifest), manifest.config, std::move(single), mix_seed(config.seed, 0x0bda));
  return train(updater, source, config, on_step);
}

void write_loss_csv(const std::string& path, const std::vector<LossPoint>& curve) {
  std::string out = "iteration,loss\n";
  char line[64];
  for (const LossPoint& p : curve) {
    std::snprintf(line, sizeof line, "%ld,%.9g\n", p.iteration, p.loss);
    out += line;
  }
  write_file(path, out);
}

}  // namespace voxsketch
