#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voxsketch/dataset.hpp"
#include "voxsketch/grid.hpp"
#include "voxsketch/image.hpp"
#include "voxsketch/nn/adam.hpp"
#include "voxsketch/nn/unet.hpp"

namespace voxsketch {

using nn::NetworkSpec;
using Network = nn::UNet<float>;

/// Trained single-view network plus (optionally) the updater. Weights are
/// immutable once loaded and may be shared by concurrent inference callers.
struct Model {
  std::shared_ptr<const Network> single;
  std::shared_ptr<const Network> updater;
  int slices() const { return single->spec().slices; }
  int input_resolution() const { return single->spec().input_resolution; }
};

// --- conversions ------------------------------------------------------------------------

/// Drawing ink in [0,1] as a 1-channel tensor; `batch` selects the slot.
void drawing_into_tensor(const LineDrawing& drawing, nn::Tensor<float>& x, int batch);
/// Frustum values as D channels of a tensor slot.
void frustum_into_tensor(const FrustumGrid& frustum, nn::Tensor<float>& x, int batch);
/// Copies one batch slot of a (N, D, H, W) probability tensor into a frustum.
void tensor_into_frustum(const nn::Tensor<float>& probs, int batch, FrustumGrid& frustum);

/// Occupancy probabilities in the camera's frustum for one drawing. The
/// frustum spans `frame`'s bounding sphere, as in training.
FrustumGrid predict_frustum(const Network& net, const LineDrawing& drawing, const Camera& camera,
                            const GridFrame& frame, const FrustumGrid* injected = nullptr);

// --- checkpoints ------------------------------------------------------------------------

/// Binary layout: "VXCK", u32 version, u32 header length, JSON header (specs
/// and metadata), u32 blob count, then per blob: u32 name length, name,
/// u32 rank, u32 dims, f32 little-endian values. Blobs cover parameters,
/// Adam moments and batch-norm running statistics, prefixed by "single/" or
/// "updater/".
struct Checkpoint {
  std::shared_ptr<Network> single;
  std::shared_ptr<Network> updater;
  std::map<std::string, std::string> metadata;

  Model model() const { return Model{single, updater}; }
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
/// `strict` rejects nonpositive running variances (diagnostic dumps of a
/// diverged run may hold NaNs).
Checkpoint load_checkpoint(const std::string& path, bool strict = true);
/// Loads a checkpoint for inference; requires the single-view network.
Model load_model(const std::string& path);

// --- training ---------------------------------------------------------------------------

struct TrainingConfig {
  nn::AdamConfig adam;
  int batch_size = 8;
  long iterations = 20000;
  std::uint64_t seed = 0;
  bool dropout = true;
  long log_every = 100;            // loss curve sampling period
  long checkpoint_every = 0;       // 0: only at the end
  std::string checkpoint_path;     // empty: no periodic checkpoints
  std::string loss_csv_path;       // empty: no file
  std::string diagnostic_path;     // written when the loss turns NaN

  static TrainingConfig toy();
  static TrainingConfig full();  // 1,000,000 iterations
  void validate() const;
};

struct TrainingExample {
  LineDrawing drawing;
  FrustumGrid target;                  // binary labels
  std::optional<FrustumGrid> injected; // updater input
  int view = 0;
  int source_view = -1;                // view the injected prediction came from
  std::string shape_id;
};

/// Deterministic given the generator state.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual TrainingExample next(Rng& rng) = 0;
};

/// Cycles through a fixed list in a per-epoch shuffled order.
class FixedExampleSource : public ExampleSource {
 public:
  explicit FixedExampleSource(std::vector<TrainingExample> examples);
  TrainingExample next(Rng& rng) override;
  const std::vector<TrainingExample>& examples() const { return examples_; }

 private:
  std::vector<TrainingExample> examples_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Fresh single-view pairs rendered on the fly from in-memory shapes.
class SingleViewSource : public ExampleSource {
 public:
  SingleViewSource(std::shared_ptr<const std::vector<ShapeAssets>> shapes, DatasetConfig config);
  TrainingExample next(Rng& rng) override;

 private:
  std::shared_ptr<const std::vector<ShapeAssets>> shapes_;
  DatasetConfig config_;
};

/// Updater pairs: target view from all 13 viewpoints; the injected prediction
/// is the single-view network's world-space output for a different view
/// (any of the 13) of the same shape, resampled into the target frustum. Source
/// predictions are cached per (shape, source view).
class UpdaterSource : public ExampleSource {
 public:
  UpdaterSource(std::shared_ptr<const std::vector<ShapeAssets>> shapes, DatasetConfig config,
                std::shared_ptr<const Network> single, std::uint64_t seed);
  TrainingExample next(Rng& rng) override;
  /// World prediction from `source_view` (cached).
  const WorldGrid& source_prediction(std::size_t shape, int source_view);

 private:
  std::shared_ptr<const std::vector<ShapeAssets>> shapes_;
  DatasetConfig config_;
  std::shared_ptr<const Network> single_;
  std::uint64_t seed_;
  std::map<std::pair<std::size_t, int>, WorldGrid> cache_;
};

/// Builds the updater example for a fixed target camera and source view.
TrainingExample updater_example(const ShapeAssets& shape, int view, const Camera& camera, int source_view,
                                const Camera& source_camera, const Network& single, const DatasetConfig& config);

struct LossPoint {
  long iteration;
  double loss;
};

struct TrainingResult {
  std::vector<LossPoint> curve;
  long iterations = 0;
  double final_loss = 0.0;
};

/// Called after every iteration with the batch loss; return false to stop.
using StepCallback = std::function<bool(long iteration, double loss)>;

/// Adam on the mean two-way cross-entropy. Updates batch-norm statistics.
/// Throws (after writing the diagnostic checkpoint) if the loss becomes
/// non-finite.
TrainingResult train(Network& net, ExampleSource& source, const TrainingConfig& config,
                     const StepCallback& on_step = {});

/// Fraction of voxels whose thresholded inference-mode prediction matches
/// the target.
double voxel_accuracy(const Network& net, const std::vector<TrainingExample>& examples);

/// Loads every shape of a manifest into memory.
std::shared_ptr<std::vector<ShapeAssets>> load_shapes(const DatasetManifest& manifest);

TrainingResult train_single_view(const DatasetManifest& manifest, Network& net, const TrainingConfig& config,
                                 const StepCallback& on_step = {});
TrainingResult train_updater(const DatasetManifest& manifest, std::shared_ptr<const Network> single,
                             Network& updater, const TrainingConfig& config, const StepCallback& on_step = {});

void write_loss_csv(const std::string& path, const std::vector<LossPoint>& curve);

}  // namespace voxsketch
