#pragma once

#include <string>
#include <vector>

namespace voxsketch::nn {

/// Layer-by-layer description of the encoder-decoder. Every convolution is
/// 4x4 with stride 2: encoder layers halve the resolution, decoder layers
/// double it. The last decoder layer emits 2 channels per output slice.
struct NetworkSpec {
  std::string name = "toy-single";
  int input_resolution = 64;
  int input_channels = 1;
  std::vector<int> encoder_channels;
  std::vector<int> decoder_channels;  // includes the final logits layer
  // skip_sources[j] = encoder layer whose output is concatenated to the
  // output of decoder layer j, or -1. Size = decoder layers - 1.
  std::vector<int> skip_sources;
  int decoder_dropout = 2;  // dropout follows the first k decoder layers
  int slices = 16;
  bool updater = false;
  int inject_after = 1;  // encoder layer whose output receives the prediction
  float leaky_slope = 0.2f;
  float dropout_rate = 0.5f;

  int encoder_resolution(int i) const { return input_resolution >> (i + 1); }
  int decoder_resolution(int j) const {
    return encoder_resolution(static_cast<int>(encoder_channels.size()) - 1) << (j + 1);
  }
  int encoder_input_channels(int i) const;
  int decoder_input_channels(int j) const;

  /// Throws Error describing the first inconsistency.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

NetworkSpec toy_spec(bool updater);
NetworkSpec full_spec(bool updater);
/// "toy" or "full".
NetworkSpec preset_spec(const std::string& preset, bool updater);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

}  // namespace voxsketch::nn
