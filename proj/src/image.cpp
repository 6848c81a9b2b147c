#include "sval/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sval/errors.hpp"

namespace sval {

ImageTensor::ImageTensor(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw ValidationError("image dimensions must be positive, got " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
  pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3,
                 fill);
}

ImageTensor::ImageTensor(int height, int width, std::vector<double> rgb)
    : ImageTensor(height, width) {
  if (rgb.size() != pixels_.size()) {
    throw ValidationError("image buffer has " + std::to_string(rgb.size()) +
                          " values, expected " + std::to_string(pixels_.size()));
  }
  pixels_ = std::move(rgb);
}

ImageTensor ImageTensor::filled(int height, int width, double r, double g, double b) {
  ImageTensor img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

void ImageTensor::validate() const {
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("image value " + std::to_string(v) + " outside [0,1]");
    }
  }
}

void ImageTensor::clamp() {
  for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

Tensor to_chw_tensor(const ImageTensor& image) {
  const auto h = static_cast<std::size_t>(image.height());
  const auto w = static_cast<std::size_t>(image.width());
  std::vector<double> out(3 * h * w);
  auto px = image.pixels();
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * h * w + i] = px[i * 3 + c];
  }
  return Tensor(Shape{3, h, w}, std::move(out));
}

std::vector<double> ColorHistogram::flattened() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_bins) * 3);
  for (const auto& ch : channels) out.insert(out.end(), ch.begin(), ch.end());
  return out;
}

ColorHistogram compute_histogram(const ImageTensor& image, int n_bins,
                                 bool exclude_background) {
  if (n_bins < 2) throw ValidationError("histogram needs at least 2 bins");
  ColorHistogram hist;
  hist.n_bins = n_bins;
  for (auto& ch : hist.channels) ch.assign(static_cast<std::size_t>(n_bins), 0.0);

  std::size_t counted = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
      if (exclude_background && std::min({r, g, b}) >= kBackgroundThreshold) continue;
      ++counted;
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
        const int bin = std::min(n_bins - 1, static_cast<int>(std::floor(v * n_bins)));
        hist.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(bin)] += 1.0;
      }
    }
  }

  if (counted == 0) {
    hist.degenerate = true;
    for (auto& ch : hist.channels) ch.assign(static_cast<std::size_t>(n_bins), 1.0 / n_bins);
    return hist;
  }
  const double inv = 1.0 / static_cast<double>(counted);
  for (auto& ch : hist.channels) {
    for (double& v : ch) v *= inv;
  }
  return hist;
}

ImageTensor crop(const ImageTensor& image, const Rect& region) {
  if (region.top < 0 || region.left < 0 || region.height < 1 || region.width < 1 ||
      region.top + region.height > image.height() ||
      region.left + region.width > image.width()) {
    throw ValidationError("crop region outside image bounds");
  }
  ImageTensor out(region.height, region.width);
  for (int y = 0; y < region.height; ++y) {
    for (int x = 0; x < region.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(region.top + y, region.left + x, c);
    }
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, int side) {
  return resize_bilinear(image, side, side);
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("resize target must be positive");
  if (height == image.height() && width == image.width()) return image;
  ImageTensor out(height, width);
  const double sy_scale = static_cast<double>(image.height()) / height;
  const double sx_scale = static_cast<double>(image.width()) / width;
  const int max_y = image.height() - 1, max_x = image.width() - 1;
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(max_y));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, max_y);
    const double wy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(max_x));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, max_x);
      const double wx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& image) {
  ImageTensor out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, image.width() - 1 - x, c);
    }
  }
  return out;
}

namespace {

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void adjust_brightness(ImageTensor& img, double factor) {
  for (double& v : img.pixels()) v = std::clamp(v * factor, 0.0, 1.0);
}

void adjust_contrast(ImageTensor& img, double factor) {
  double mean = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      mean += luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
  mean /= static_cast<double>(img.height()) * img.width();
  for (double& v : img.pixels()) v = std::clamp((v - mean) * factor + mean, 0.0, 1.0);
}

void adjust_saturation(ImageTensor& img, double factor) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double g = luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::clamp(g + (img.at(y, x, c) - g) * factor, 0.0, 1.0);
    }
  }
}

}  // namespace

ImageTensor shift_hue(const ImageTensor& image, double turns) {
  ImageTensor out = image;
  const double shift = 6.0 * (turns - std::floor(turns));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
      const double hi = std::max({r, g, b}), lo = std::min({r, g, b});
      const double chroma = hi - lo;
      if (chroma <= 0.0) continue;
      double h;
      if (hi == r) {
        h = (g - b) / chroma;
      } else if (hi == g) {
        h = 2.0 + (b - r) / chroma;
      } else {
        h = 4.0 + (r - g) / chroma;
      }
      h = std::fmod(h + shift + 12.0, 6.0);
      const double mid = chroma * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
      double rgb[3];
      switch (static_cast<int>(h)) {
        case 0: rgb[0] = chroma; rgb[1] = mid; rgb[2] = 0; break;
        case 1: rgb[0] = mid; rgb[1] = chroma; rgb[2] = 0; break;
        case 2: rgb[0] = 0; rgb[1] = chroma; rgb[2] = mid; break;
        case 3: rgb[0] = 0; rgb[1] = mid; rgb[2] = chroma; break;
        case 4: rgb[0] = mid; rgb[1] = 0; rgb[2] = chroma; break;
        default: rgb[0] = chroma; rgb[1] = 0; rgb[2] = mid; break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = rgb[c] + lo;
    }
  }
  return out;
}

ImageTensor to_grayscale(const ImageTensor& image) {
  ImageTensor out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double g = luminance(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = g;
    }
  }
  return out;
}

void PatchSpec::validate() const {
  if (!(ratio_lo > 0.0 && ratio_lo <= ratio_hi && ratio_hi <= 1.0)) {
    throw ValidationError("patch ratio range must satisfy 0 < lo <= hi <= 1, got [" +
                          std::to_string(ratio_lo) + "," + std::to_string(ratio_hi) + "]");
  }
}

int patch_side(int width, int height, double ratio) {
  const double area = ratio * static_cast<double>(width) * static_cast<double>(height);
  int side = std::max(2, static_cast<int>(std::floor(std::sqrt(area))));
  return std::min({side, width, height});
}

Rect sample_patch_region(int width, int height, const PatchSpec& spec, Rng& rng) {
  spec.validate();
  if (static_cast<long>(width) * height < 4) {
    throw ValidationError("patch sampling needs an image of at least 4 pixels");
  }
  const double r = uniform(rng, spec.ratio_lo, spec.ratio_hi);
  const int side = patch_side(width, height, r);
  Rect rect;
  rect.height = rect.width = side;
  rect.top = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(height - side + 1)));
  rect.left = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(width - side + 1)));
  return rect;
}

ImageTensor sample_shapeless_patch(const ImageTensor& image, const PatchSpec& spec,
                                   Rng& rng, int output_side) {
  const Rect region = sample_patch_region(image.width(), image.height(), spec, rng);
  return resize_bilinear(crop(image, region), output_side);
}

void AugmentConfig::validate() const {
  if (crop) PatchSpec{crop_ratio_lo, crop_ratio_hi}.validate();
  if (jitter_strength < 0.0 || jitter_strength >= 1.0) {
    throw ValidationError("jitter strength must lie in [0,1)");
  }
  if (hue_strength < 0.0 || hue_strength > 0.5) {
    throw ValidationError("hue strength must lie in [0,0.5]");
  }
  if (grayscale_probability < 0.0 || grayscale_probability > 1.0) {
    throw ValidationError("grayscale probability must lie in [0,1]");
  }
  if (output_side < 0) throw ValidationError("output side must be >= 0");
}

ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng) {
  config.validate();
  ImageTensor out = image;
  if (config.flip && bernoulli(rng, 0.5)) out = flip_horizontal(out);
  if (config.crop) {
    const Rect region = sample_patch_region(out.width(), out.height(),
                                            {config.crop_ratio_lo, config.crop_ratio_hi}, rng);
    out = crop(out, region);
  }
  if (config.color_distortion) {
    const double s = config.jitter_strength;
    adjust_brightness(out, uniform(rng, 1.0 - s, 1.0 + s));
    adjust_contrast(out, uniform(rng, 1.0 - s, 1.0 + s));
    adjust_saturation(out, uniform(rng, 1.0 - s, 1.0 + s));
    out = shift_hue(out, uniform(rng, -config.hue_strength, config.hue_strength));
    if (bernoulli(rng, config.grayscale_probability)) out = to_grayscale(out);
  }
  if (config.output_side > 0) out = resize_bilinear(out, config.output_side);
  out.clamp();
  return out;
}

}  // namespace sval
