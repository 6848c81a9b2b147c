#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "sval/rng.hpp"
#include "sval/tensor.hpp"

namespace sval {

/// H x W x 3 RGB image, interleaved row-major, values in [0,1].
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, double fill = 0.0);
  ImageTensor(int height, int width, std::vector<double> rgb);

  static ImageTensor filled(int height, int width, double r, double g, double b);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }
  double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }

  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  /// Throws ValidationError if any value falls outside [0,1].
  void validate() const;
  void clamp();

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// Channel-major [3,H,W] copy suitable as network input.
Tensor to_chw_tensor(const ImageTensor& image);

// ---------------------------------------------------------------------------
// Color histograms

/// Pixels whose smallest channel is at least this value count as background.
inline constexpr double kBackgroundThreshold = 250.0 / 255.0;

struct ColorHistogram {
  int n_bins = 0;
  std::array<std::vector<double>, 3> channels;  // R, G, B
  bool degenerate = false;  // every pixel was excluded; channels are uniform

  /// R, G and B bins laid end to end.
  std::vector<double> flattened() const;
};

/// Per-channel normalized histogram over uniform bins on [0,1]. Bin l covers
/// [l/n, (l+1)/n); the last bin also takes 1.0. With `exclude_background`,
/// near-white pixels are dropped from all three channels.
ColorHistogram compute_histogram(const ImageTensor& image, int n_bins,
                                 bool exclude_background);

// ---------------------------------------------------------------------------
// Cropping, resizing, augmentation

struct Rect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

ImageTensor crop(const ImageTensor& image, const Rect& region);

/// Bilinear resize to side x side using half-pixel centers.
ImageTensor resize_bilinear(const ImageTensor& image, int side);
ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

ImageTensor flip_horizontal(const ImageTensor& image);

/// Luminance 0.299R + 0.587G + 0.114B written to all three channels.
ImageTensor to_grayscale(const ImageTensor& image);

/// Rotates every pixel's HSV hue by `turns` of the color wheel, keeping
/// value and saturation. Gray pixels are unchanged.
ImageTensor shift_hue(const ImageTensor& image, double turns);

struct PatchSpec {
  double ratio_lo = 0.05;
  double ratio_hi = 0.15;

  void validate() const;
};

/// Side of a square covering `ratio` of a w x h image:
/// max(2, floor(sqrt(ratio*w*h))), clamped to min(w,h).
int patch_side(int width, int height, double ratio);

/// Square region with area ratio drawn from `spec` and a uniformly placed
/// top-left corner.
Rect sample_patch_region(int width, int height, const PatchSpec& spec, Rng& rng);

/// Square shapeless patch resized to `output_side`.
ImageTensor sample_shapeless_patch(const ImageTensor& image, const PatchSpec& spec,
                                   Rng& rng, int output_side);

struct AugmentConfig {
  bool flip = true;
  bool crop = true;
  double crop_ratio_lo = 0.2;
  double crop_ratio_hi = 1.0;
  bool color_distortion = false;
  double jitter_strength = 0.4;     // brightness/contrast/saturation +-
  double hue_strength = 0.4;        // hue shift +- in turns
  double grayscale_probability = 0.2;
  int output_side = 0;              // 0 keeps the cropped size

  void validate() const;
};

/// Flip (p=0.5), random square crop, optional color distortion, resize.
/// Output is clamped to [0,1].
ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Decoding and encoding

/// Reads binary PPM (P6) or PNG, chosen by file signature.
ImageTensor load_image(const std::filesystem::path& path);
/// Writes 8-bit binary PPM (P6); values are rounded to the nearest level.
void save_ppm(const std::filesystem::path& path, const ImageTensor& image);

}  // namespace sval
