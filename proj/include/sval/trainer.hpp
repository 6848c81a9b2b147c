#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sval/checkpoint.hpp"
#include "sval/image.hpp"
#include "sval/model.hpp"
#include "sval/optim.hpp"
#include "sval/pretext.hpp"

namespace sval {

struct PretextSelection {
  bool rgb = true;
  bool slpd = true;
  bool td = true;
  bool id_baseline = false;  // plain instance discrimination; excludes the others

  void validate() const;
};

struct TrainingConfig {
  std::uint64_t seed = 0;
  int epochs = 150;
  std::size_t batch_size = 32;
  AdamConfig adam;
  LossWeights weights;
  double temperature = 0.07;
  double momentum = 0.5;
  PatchSpec patch;
  PretextSelection pretext;
  bool exclude_background = true;
  // Views for the instance-discrimination baseline.
  AugmentConfig id_augment{.flip = true,
                           .crop = true,
                           .crop_ratio_lo = 0.2,
                           .crop_ratio_hi = 1.0,
                           .color_distortion = false};

  void validate() const;
};

/// A decoded training image with its cached network input and histogram.
struct TrainingImage {
  ImageTensor original;
  ImageTensor input;  // resized to the encoder's input side
  ColorHistogram histogram;
};

TrainingImage prepare_training_image(ImageTensor original, const EncoderConfig& encoder,
                                     bool exclude_background);

/// Unweighted sub-losses plus the weighted total, averaged over images.
struct LossBreakdown {
  double rgb = 0.0;
  double slpd = 0.0;
  double td = 0.0;
  double total = 0.0;
};

/// One image's contribution to a training step.
struct ImageLoss {
  Tensor total;
  LossBreakdown parts;
  std::vector<double> slpd_row;     // fresh C_SLPD output, empty if unused
  std::vector<double> texture_row;  // fresh Gram embedding, empty if unused
};

class Trainer {
 public:
  Trainer(Model& model, std::vector<TrainingImage> images, TrainingConfig config);

  const TrainingConfig& config() const { return config_; }
  std::size_t size() const { return images_.size(); }
  const std::vector<TrainingImage>& images() const { return images_; }

  /// Weighted objective for one image. Draws the image's shapeless patch from
  /// the (seed, epoch, index) stream; reads the banks without modifying them.
  ImageLoss sval_image_loss(std::size_t index, int epoch) const;
  /// Instance discrimination on one augmented full-image view.
  ImageLoss id_image_loss(std::size_t index, int epoch) const;

  /// Zeroes gradients and accumulates d(batch mean loss)/d(params) without
  /// stepping. Fresh bank rows are appended to `fresh` when non-null.
  LossBreakdown accumulate_gradients(std::span<const std::size_t> batch, int epoch,
                                     std::vector<ImageLoss>* fresh = nullptr);

  /// Full step: gradients, one optimizer update, then momentum updates of the
  /// memory banks for every image in the batch.
  LossBreakdown sval_step(std::span<const std::size_t> batch, int epoch);
  LossBreakdown id_baseline_step(std::span<const std::size_t> batch, int epoch);

  /// Shuffled pass over all images; returns image-weighted mean losses.
  LossBreakdown run_epoch(int epoch);

  int epochs_completed() const { return epochs_completed_; }

  MemoryBank& slpd_bank() { return slpd_bank_; }
  const MemoryBank& slpd_bank() const { return slpd_bank_; }
  MemoryBank& texture_bank() { return texture_bank_; }
  const MemoryBank& texture_bank() const { return texture_bank_; }
  Adam& optimizer() { return optimizer_; }

  /// Model parameters, optimizer moments, banks and epoch counter.
  std::vector<NamedTensor> state() const;
  void load_state(const std::map<std::string, NamedTensor>& tensors);

 private:
  LossBreakdown apply_step(std::span<const std::size_t> batch, int epoch);
  void check_finite_gradients() const;

  Model& model_;
  std::vector<TrainingImage> images_;
  TrainingConfig config_;
  MemoryBank slpd_bank_;
  MemoryBank texture_bank_;
  Adam optimizer_;
  int epochs_completed_ = 0;
};

}  // namespace sval
