#pragma once

// Convolutional feature extractor plus one projection head per pretext task.
//
// Trunk: for each width w in EncoderConfig::widths a (conv k x k, pad k/2)
// -> relu -> 2x2 max_pool stage, then a global mean pool and a linear layer
// to feature_dim. The texture head taps the last stage's pooled map (before
// the global mean pool) through a 1x1 convolution.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sval/checkpoint.hpp"
#include "sval/image.hpp"
#include "sval/tensor.hpp"

namespace sval {

struct EncoderConfig {
  std::vector<int> widths{16, 32, 64};
  int kernel_size = 3;
  int feature_dim = 64;
  int input_side = 64;
  int n_bins = 10;
  int slpd_dim = 64;
  int texture_channels = 16;

  void validate() const;
  /// Smallest input side the trunk accepts (one pixel after all pools).
  int min_input_side() const;
};

using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

/// fc -> relu -> fc, optionally followed by unit normalization.
struct ProjectionHead {
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  bool normalize = false;

  ProjectionHead() = default;
  ProjectionHead(int in_dim, int hidden_dim, int out_dim, bool normalized, Rng& rng);

  std::size_t input_dim() const { return fc1_weight.dim(1); }
  std::size_t output_dim() const { return fc2_weight.dim(0); }

  Tensor forward(const Tensor& feature) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// 1x1 convolution mapping the trunk's spatial map to the texture channels.
struct TextureHead {
  Tensor weight, bias;

  TextureHead() = default;
  TextureHead(int in_channels, int out_channels, Rng& rng);

  Tensor forward(const Tensor& feature_map) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

struct HeadSet {
  ProjectionHead red, green, blue;  // histogram logits, no normalization
  ProjectionHead slpd;              // unit-normalized patch embedding
  TextureHead texture;
};

struct TrunkOutput {
  Tensor feature;      // [feature_dim], not normalized
  Tensor feature_map;  // [widths.back(), h, w] before global pooling
};

class Model {
 public:
  Model(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const HeadSet& heads() const { return heads_; }
  HeadSet& heads() { return heads_; }

  /// Runs the trunk on a [3,H,W] tensor.
  TrunkOutput trunk(const Tensor& image_chw) const;
  TrunkOutput trunk(const ImageTensor& image) const;
  Tensor extract_features(const ImageTensor& image) const { return trunk(image).feature; }

  NamedParameters named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  std::vector<NamedTensor> state() const;
  /// Copies matching tensors from a checkpoint; missing names or shape
  /// mismatches raise DimensionError.
  void load_state(const std::map<std::string, NamedTensor>& tensors);

 private:
  EncoderConfig config_;
  std::vector<Tensor> conv_weights_, conv_biases_;
  Tensor fc_weight_, fc_bias_;
  HeadSet heads_;
};

/// Kaiming-uniform (fan-in) weights: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace sval
