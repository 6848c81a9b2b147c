#include "sval/model.hpp"

#include <algorithm>
#include <cmath>

#include "sval/errors.hpp"

namespace sval {

void EncoderConfig::validate() const {
  if (widths.empty()) throw ValidationError("encoder needs at least one conv stage");
  for (int w : widths) {
    if (w < 1) throw ValidationError("conv widths must be >= 1");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError("kernel size must be odd and positive");
  }
  if (feature_dim < 8) throw ValidationError("feature dim must be >= 8");
  if (n_bins < 2) throw ValidationError("n_bins must be >= 2");
  if (slpd_dim < 1 || texture_channels < 1) {
    throw ValidationError("head dimensions must be positive");
  }
  if (input_side < min_input_side()) {
    throw ValidationError("input side " + std::to_string(input_side) +
                          " too small for " + std::to_string(widths.size()) +
                          " pooling stages");
  }
}

int EncoderConfig::min_input_side() const {
  return std::max(8, 1 << widths.size());
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(values), true);
}

ProjectionHead::ProjectionHead(int in_dim, int hidden_dim, int out_dim, bool normalized,
                               Rng& rng)
    : normalize(normalized) {
  const auto in = static_cast<std::size_t>(in_dim);
  const auto hid = static_cast<std::size_t>(hidden_dim);
  const auto out = static_cast<std::size_t>(out_dim);
  fc1_weight = kaiming_uniform({hid, in}, in, rng);
  fc1_bias = Tensor::zeros({hid}, true);
  fc2_weight = kaiming_uniform({out, hid}, hid, rng);
  fc2_bias = Tensor::zeros({out}, true);
}

Tensor ProjectionHead::forward(const Tensor& feature) const {
  if (feature.rank() != 1 || feature.dim(0) != input_dim()) {
    throw DimensionError("projection head expects [" + std::to_string(input_dim()) +
                         "], got " + shape_to_string(feature.shape()));
  }
  Tensor hidden = relu(fully_connected(feature, fc1_weight, fc1_bias));
  Tensor out = fully_connected(hidden, fc2_weight, fc2_bias);
  return normalize ? l2_normalize(out) : out;
}

void ProjectionHead::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".fc1.weight", fc1_weight);
  out.emplace_back(prefix + ".fc1.bias", fc1_bias);
  out.emplace_back(prefix + ".fc2.weight", fc2_weight);
  out.emplace_back(prefix + ".fc2.bias", fc2_bias);
}

TextureHead::TextureHead(int in_channels, int out_channels, Rng& rng) {
  const auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(out_channels);
  weight = kaiming_uniform({out, in, 1, 1}, in, rng);
  bias = Tensor::zeros({out}, true);
}

Tensor TextureHead::forward(const Tensor& feature_map) const {
  return conv2d(feature_map, weight, bias, 1, 0);
}

void TextureHead::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Model::Model(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const auto k = static_cast<std::size_t>(config_.kernel_size);
  std::size_t in_channels = 3;
  std::uint64_t stream = 0;
  for (int w : config_.widths) {
    Rng rng = derive_rng(seed, 0x1017, stream++);
    const auto out = static_cast<std::size_t>(w);
    conv_weights_.push_back(kaiming_uniform({out, in_channels, k, k}, in_channels * k * k, rng));
    conv_biases_.push_back(Tensor::zeros({out}, true));
    in_channels = out;
  }
  const auto feat = static_cast<std::size_t>(config_.feature_dim);
  {
    Rng rng = derive_rng(seed, 0x1017, stream++);
    fc_weight_ = kaiming_uniform({feat, in_channels}, in_channels, rng);
    fc_bias_ = Tensor::zeros({feat}, true);
  }
  auto head_rng = [&] { return derive_rng(seed, 0x4ead, stream++); };
  const int f = config_.feature_dim;
  Rng r1 = head_rng(), r2 = head_rng(), r3 = head_rng(), r4 = head_rng(), r5 = head_rng();
  heads_.red = ProjectionHead(f, f, config_.n_bins, false, r1);
  heads_.green = ProjectionHead(f, f, config_.n_bins, false, r2);
  heads_.blue = ProjectionHead(f, f, config_.n_bins, false, r3);
  heads_.slpd = ProjectionHead(f, f, config_.slpd_dim, true, r4);
  heads_.texture = TextureHead(static_cast<int>(in_channels), config_.texture_channels, r5);
}

TrunkOutput Model::trunk(const Tensor& image_chw) const {
  if (image_chw.rank() != 3 || image_chw.dim(0) != 3) {
    throw DimensionError("encoder expects a 3-channel [3,H,W] input, got " +
                         shape_to_string(image_chw.shape()));
  }
  const auto min_side = static_cast<std::size_t>(config_.min_input_side());
  if (image_chw.dim(1) < min_side || image_chw.dim(2) < min_side) {
    throw DimensionError("encoder input " + shape_to_string(image_chw.shape()) +
                         " below minimum side " + std::to_string(min_side));
  }
  const auto pad = static_cast<std::size_t>(config_.kernel_size / 2);
  Tensor x = image_chw;
  for (std::size_t s = 0; s < conv_weights_.size(); ++s) {
    x = max_pool(relu(conv2d(x, conv_weights_[s], conv_biases_[s], 1, pad)), 2);
  }
  TrunkOutput out;
  out.feature_map = x;
  out.feature = fully_connected(mean_pool(x), fc_weight_, fc_bias_);
  return out;
}

TrunkOutput Model::trunk(const ImageTensor& image) const {
  return trunk(to_chw_tensor(image));
}

NamedParameters Model::named_parameters() const {
  NamedParameters out;
  for (std::size_t s = 0; s < conv_weights_.size(); ++s) {
    out.emplace_back("trunk.conv" + std::to_string(s) + ".weight", conv_weights_[s]);
    out.emplace_back("trunk.conv" + std::to_string(s) + ".bias", conv_biases_[s]);
  }
  out.emplace_back("trunk.fc.weight", fc_weight_);
  out.emplace_back("trunk.fc.bias", fc_bias_);
  heads_.red.collect("heads.red", out);
  heads_.green.collect("heads.green", out);
  heads_.blue.collect("heads.blue", out);
  heads_.slpd.collect("heads.slpd", out);
  heads_.texture.collect("heads.texture", out);
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

std::vector<NamedTensor> Model::state() const {
  std::vector<NamedTensor> out;
  for (auto& [name, t] : named_parameters()) {
    out.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  return out;
}

void Model::load_state(const std::map<std::string, NamedTensor>& tensors) {
  for (auto& [name, t] : named_parameters()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DimensionError("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape != t.shape()) {
      throw DimensionError("checkpoint parameter '" + name + "' has shape " +
                           shape_to_string(it->second.shape) + ", model expects " +
                           shape_to_string(t.shape()));
    }
    Tensor handle = t;
    std::copy(it->second.values.begin(), it->second.values.end(), handle.mutable_data().begin());
  }
}

}  // namespace sval
