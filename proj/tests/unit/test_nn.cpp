#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <set>

#include "../support/gradcheck.hpp"
#include "voxsketch/network.hpp"

using namespace voxsketch;
using namespace voxsketch::nn;
using namespace voxsketch::gradcheck;

namespace {

constexpr double kTol = 1e-3;
constexpr int kSeeds = 10;

}  // namespace

// --- layer gradients ---------------------------------------------------------------------

TEST(NnGrad, ConvMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(conv_error(seed), kTol) << seed;
}

TEST(NnGrad, DeconvMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(deconv_error(seed), kTol) << seed;
}

TEST(NnGrad, DeconvIsAdjointOfConv) {
  // <conv(x), y> == <x, deconv(y)> with a shared kernel and no bias.
  Rng rng(7);
  Conv2d<double> conv("c", 3, 5, false);
  randomize(conv.weight, rng);
  ConvTranspose2d<double> de("d", 5, 3, false);
  de.weight.value = conv.weight.value;  // (5, 3*16) read as (in=5, out*16)
  const TD x = random_tensor(2, 3, 8, 6, rng), y = random_tensor(2, 5, 4, 3, rng);
  EXPECT_NEAR(dot(conv.forward(x, nullptr).data, y.data), dot(x.data, de.forward(y, nullptr).data), 1e-9);
}

TEST(NnGrad, BatchNormMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(batchnorm_error(seed), kTol) << seed;
}

TEST(NnGrad, RectifiersMatchFiniteDifferences) {
  for (double slope : {0.0, 0.2})
    for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(rectifier_error(slope, seed), kTol) << slope << " " << seed;
}

TEST(NnGrad, DropoutMatchesFiniteDifferencesForFixedMask) {
  for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(dropout_error(seed), kTol) << seed;
}

TEST(NnGrad, DropoutPreservesMeanAndIsOffAtInference) {
  Rng rng(3);
  TD x(1, 1, 100, 100, 1.0);
  std::vector<std::uint8_t> mask;
  dropout_inplace(x, 0.5, rng, mask);
  double mean = 0.0;
  for (double v : x.data) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  EXPECT_NEAR(mean / x.size(), 1.0, 0.05);
}

TEST(NnGrad, SoftmaxCrossEntropyMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) EXPECT_LT(softmax_ce_error(seed), kTol) << seed;
}

TEST(NnGrad, SingleViewNetworkMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::string worst;
    EXPECT_LT(network_error(false, seed, &worst), kTol) << worst << " seed " << seed;
  }
}

TEST(NnGrad, UpdaterNetworkMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::string worst;
    EXPECT_LT(network_error(true, seed, &worst), kTol) << worst << " seed " << seed;
  }
}

// --- loss, softmax, optimizer ------------------------------------------------------------

TEST(NnLoss, EqualLogitsGiveLn2) {
  Tensor<float> logits(2, 4, 3, 3, 0.7f);
  std::vector<std::uint8_t> labels(2 * 2 * 9);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 == 0;
  EXPECT_NEAR(softmax_cross_entropy<float>(logits, labels, nullptr), std::log(2.0), 1e-7);
}

TEST(NnLoss, SaturatedLogitsGiveZero) {
  Tensor<float> logits(1, 2, 2, 2);
  std::vector<std::uint8_t> labels = {1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) {
    logits.data[i] = labels[i] ? -50.0f : 50.0f;      // empty channel
    logits.data[4 + i] = labels[i] ? 50.0f : -50.0f;  // occupied channel
  }
  EXPECT_LT(softmax_cross_entropy<float>(logits, labels, nullptr), 1e-12);
}

TEST(NnLoss, OccupancyIsAValidPairedSoftmax) {
  Rng rng(1);
  Tensor<float> logits(2, 8, 4, 4);
  for (float& v : logits.data) v = static_cast<float>(rng.normal() * 30.0);
  const Tensor<float> p = UNet<float>::occupancy(logits);
  for (int b = 0; b < 2; ++b)
    for (int d = 0; d < 4; ++d)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          const double e = logits.at(b, 2 * d, y, x), o = logits.at(b, 2 * d + 1, y, x);
          const double po = p.at(b, d, y, x);
          const double pe = 1.0 / (1.0 + std::exp(o - e));
          EXPECT_GE(po, 0.0);
          EXPECT_LE(po, 1.0);
          EXPECT_NEAR(po + pe, 1.0, 1e-6);
        }
}

TEST(NnAdam, DefaultsAndValidation) {
  const AdamConfig c;
  EXPECT_EQ(c.beta1, 0.5);
  EXPECT_EQ(c.beta2, 0.999);
  EXPECT_EQ(c.eps, 1e-8);
  EXPECT_EQ(c.lr, 2e-4);
  AdamConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = AdamConfig{};
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  Param<float> p("w", {1});
  EXPECT_THROW(adam_step<float>({&p}, c, 0), Error);
}

TEST(NnAdam, ZeroGradientLeavesWeightsUnchanged) {
  Param<float> p("w", {5});
  for (int i = 0; i < 5; ++i) p.value[i] = 0.1f * i - 0.2f;
  const auto before = p.value;
  for (long t = 1; t <= 20; ++t) adam_step<float>({&p}, AdamConfig{}, t);
  EXPECT_EQ(p.value, before);
}

TEST(NnAdam, MinimizesSquare) {
  Param<double> p("w", {1});
  p.value[0] = 1.0;
  AdamConfig c;
  c.lr = 0.01;
  for (long t = 1; t <= 500; ++t) {
    p.grad[0] = 2.0 * p.value[0];
    adam_step<double>({&p}, c, t);
  }
  EXPECT_LT(std::abs(p.value[0]), 0.05);
}

// --- specs and shapes ----------------------------------------------------------------------

TEST(NnSpec, ToyShapes) {
  UNet<float> net(toy_spec(false));
  net.initialize(1);
  const Tensor<float> logits = net.infer_logits(Tensor<float>(2, 1, 64, 64));
  EXPECT_EQ(logits.shape_string(), "2x32x16x16");
  EXPECT_EQ(net.infer(Tensor<float>(1, 1, 64, 64)).shape_string(), "1x16x16x16");
}

TEST(NnSpec, FullShapes) {
  const NetworkSpec s = full_spec(false);
  EXPECT_EQ(s.encoder_channels.size(), 8u);
  EXPECT_EQ(s.decoder_channels.back(), 128);
  UNet<float> net(s);
  net.initialize(1);
  EXPECT_EQ(net.infer_logits(Tensor<float>(1, 1, 256, 256)).shape_string(), "1x128x64x64");
  const NetworkSpec u = full_spec(true);
  EXPECT_EQ(u.encoder_resolution(u.inject_after), 64);
  EXPECT_EQ(u.encoder_input_channels(u.inject_after + 1), 128 + 64);
}

TEST(NnSpec, InconsistentSpecsAreRejected) {
  NetworkSpec s = toy_spec(false);
  s.input_resolution = 100;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(UNet<float>{s}, Error);
  s = toy_spec(false);
  s.decoder_channels.back() = 30;
  EXPECT_THROW(s.validate(), Error);
  s = toy_spec(false);
  s.skip_sources[0] = 0;  // resolution 32 into a 2x2 decoder map
  EXPECT_THROW(s.validate(), Error);
  s = toy_spec(true);
  s.inject_after = 2;  // 8x8, not the 16x16 slice grid
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(preset_spec("huge", false), Error);
}

TEST(NnSpec, JsonRoundTrip) {
  for (bool u : {false, true}) {
    const NetworkSpec s = full_spec(u);
    EXPECT_EQ(spec_from_json(spec_to_json(s)), s);
  }
  EXPECT_THROW(spec_from_json("{\"name\": 3}"), Error);
  EXPECT_THROW(spec_from_json("not json"), Error);
}

TEST(NnSpec, UpdaterInjection) {
  UNet<float> up(toy_spec(true));
  up.initialize(2);
  const Tensor<float> x(1, 1, 64, 64);
  const Tensor<float> zero(1, 16, 16, 16);
  EXPECT_EQ(up.infer(x, &zero).shape_string(), "1x16x16x16");
  const Tensor<float> wrong(1, 16, 8, 8);
  EXPECT_THROW(up.infer(x, &wrong), Error);
  EXPECT_THROW(up.infer(x), Error);
  UNet<float> single(toy_spec(false));
  EXPECT_THROW(single.infer(x, &zero), Error);
  EXPECT_THROW(single.infer(Tensor<float>(1, 1, 32, 32)), Error);
}

TEST(NnSpec, InferenceIsDeterministicAndCentered) {
  UNet<float> net(toy_spec(false));
  net.initialize(11);
  Rng rng(5);
  Tensor<float> x(4, 1, 64, 64);
  for (float& v : x.data) v = rng.bernoulli(0.1) ? 1.0f : 0.0f;
  const Tensor<float> a = net.infer(x), b = net.infer(x);
  EXPECT_EQ(a.data, b.data);
  double mean = 0.0;
  for (float v : a.data) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
    mean += v;
  }
  mean /= a.size();
  EXPECT_GT(mean, 0.3);
  EXPECT_LT(mean, 0.7);
}

// --- checkpoints and training ------------------------------------------------------------

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "voxsketch_test_nn";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::vector<TrainingExample> random_examples(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  const Camera cam = viewpoint_camera(ViewpointId(0), GridFrame{});
  for (int i = 0; i < count; ++i) {
    TrainingExample ex;
    ex.drawing = LineDrawing(64, 64);
    for (float& v : ex.drawing.data) v = rng.bernoulli(0.1) ? 1.0f : 0.0f;
    ex.target = FrustumGrid(16, 16, 16, cam, 1.0, 2.0);
    for (float& v : ex.target.values()) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST(NnCheckpoint, RoundTripIsExact) {
  auto single = std::make_shared<Network>(toy_spec(false));
  auto updater = std::make_shared<Network>(toy_spec(true));
  single->initialize(1);
  updater->initialize(2);
  FixedExampleSource src(random_examples(4, 1));
  TrainingConfig cfg;
  cfg.iterations = 2;
  cfg.batch_size = 2;
  train(*single, src, cfg);  // nonzero moments and running statistics
  Checkpoint ck{single, updater, {{"note", "x"}}};
  const std::string path = temp_path("rt.vxck");
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  ASSERT_TRUE(back.single && back.updater);
  EXPECT_EQ(back.metadata.at("note"), "x");
  auto pa = single->params(), pb = back.single->params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
    EXPECT_EQ(pa[i]->m, pb[i]->m);
    EXPECT_EQ(pa[i]->v, pb[i]->v);
  }
  auto ba = single->batch_norms(), bb = back.single->batch_norms();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    EXPECT_EQ(ba[i]->running_mean, bb[i]->running_mean);
    EXPECT_EQ(ba[i]->running_var, bb[i]->running_var);
  }
  // Saving the loaded copy reproduces the file byte for byte.
  const std::string path2 = temp_path("rt2.vxck");
  save_checkpoint(path2, back);
  EXPECT_EQ(read_file(path), read_file(path2));
}

TEST(NnCheckpoint, CorruptFilesAreRejected) {
  auto single = std::make_shared<Network>(toy_spec(false));
  single->initialize(1);
  const std::string path = temp_path("c.vxck");
  save_checkpoint(path, Checkpoint{single, nullptr, {}});
  const std::string good = read_file(path);
  write_file(path, "XXXX" + good.substr(4));
  EXPECT_THROW(load_checkpoint(path), Error);
  write_file(path, good.substr(0, good.size() - 10));
  EXPECT_THROW(load_checkpoint(path), Error);
  write_file(path, good);
  EXPECT_NO_THROW(load_model(path));
  save_checkpoint(path, Checkpoint{nullptr, std::make_shared<Network>(toy_spec(true)), {}});
  EXPECT_THROW(load_model(path), Error);  // updater alone cannot predict
}

TEST(NnTraining, FixedSeedGivesBitIdenticalCheckpoints) {
  std::string files[2];
  for (int run = 0; run < 2; ++run) {
    Network net(toy_spec(false));
    net.initialize(3);
    FixedExampleSource src(random_examples(8, 2));
    TrainingConfig cfg;
    cfg.iterations = 5;
    cfg.seed = 9;
    cfg.checkpoint_path = temp_path("det" + std::to_string(run) + ".vxck");
    train(net, src, cfg);
    files[run] = read_file(cfg.checkpoint_path);
  }
  EXPECT_EQ(files[0], files[1]);
}

TEST(NnTraining, LossCurveCsv) {
  Network net(toy_spec(false));
  net.initialize(3);
  FixedExampleSource src(random_examples(8, 2));
  TrainingConfig cfg;
  cfg.iterations = 6;
  cfg.log_every = 2;
  cfg.loss_csv_path = temp_path("loss.csv");
  const TrainingResult r = train(net, src, cfg);
  ASSERT_EQ(r.curve.size(), 4u);  // iterations 0, 2, 4 and the last
  EXPECT_EQ(r.curve.front().iteration, 0);
  EXPECT_EQ(r.curve.back().iteration, 5);
  const std::string csv = read_file(cfg.loss_csv_path);
  EXPECT_EQ(csv.rfind("iteration,loss\n0,", 0), 0u);
}

TEST(NnTraining, DivergenceWritesDiagnosticCheckpointAndThrows) {
  Network net(toy_spec(false));
  net.initialize(3);
  net.params()[0]->value[0] = std::nanf("");
  FixedExampleSource src(random_examples(2, 2));
  TrainingConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 2;
  cfg.diagnostic_path = temp_path("diverged.vxck");
  std::filesystem::remove(cfg.diagnostic_path);
  EXPECT_THROW(train(net, src, cfg), Error);
  const Checkpoint ck = load_checkpoint(cfg.diagnostic_path, false);
  EXPECT_EQ(ck.metadata.at("diverged_at"), "0");
}

TEST(NnTraining, UpdaterExamplesInjectAnotherViewAndLeaveSingleViewWeightsAlone) {
  DatasetConfig dc = DatasetConfig::toy();
  auto shapes = std::make_shared<std::vector<ShapeAssets>>();
  for (int i = 0; i < 3; ++i) {
    const ShapeProgram prog = symmetrize(generate_program(mix_seed(4, i), dc.grammar));
    shapes->push_back(grammar_assets("s" + std::to_string(i), prog, dc));
  }
  auto single = std::make_shared<Network>(toy_spec(false));
  single->initialize(5);
  std::vector<std::vector<float>> before;
  for (auto* p : single->params()) before.push_back(p->value);

  UpdaterSource src(shapes, dc, single, 1);
  Rng rng(8);
  std::set<int> sources;
  for (int i = 0; i < 200; ++i) {
    const TrainingExample ex = src.next(rng);
    ASSERT_TRUE(ex.injected.has_value());
    EXPECT_NE(ex.source_view, ex.view);
    EXPECT_GE(ex.source_view, 0);
    EXPECT_LT(ex.source_view, ViewpointId::kCount);
    sources.insert(ex.source_view);
    for (float v : ex.injected->values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  }
  EXPECT_EQ(sources.size(), 13u);
  Network updater(toy_spec(true));
  updater.initialize(6);
  TrainingConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 4;
  train(updater, src, cfg);
  std::size_t k = 0;
  for (auto* p : single->params()) EXPECT_EQ(p->value, before[k++]);
}
