#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace sval::testing {

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("sval_test_" + std::to_string(::getpid()) + "_" + name + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.widths = {4, 8};
  c.feature_dim = 8;
  c.input_side = 16;
  c.slpd_dim = 8;
  c.texture_channels = 4;
  return c;
}

ImageTensor random_image(int height, int width, Rng& rng, double white_fraction) {
  ImageTensor img(height, width, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (bernoulli(rng, white_fraction)) continue;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = uniform(rng, 0.0, 0.9);
    }
  }
  return img;
}

std::vector<TrainingImage> toy_training_set(std::size_t n, std::uint64_t seed,
                                            const EncoderConfig& encoder) {
  Rng rng = derive_rng(seed, 77);
  std::vector<TrainingImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    ImageTensor img(24, 24, 1.0);
    const int blocks = 2 + static_cast<int>(uniform_index(rng, 3));
    for (int b = 0; b < blocks; ++b) {
      const int top = static_cast<int>(uniform_index(rng, 16));
      const int left = static_cast<int>(uniform_index(rng, 16));
      const double r = uniform(rng, 0, 0.9), g = uniform(rng, 0, 0.9), bl = uniform(rng, 0, 0.9);
      for (int y = top; y < top + 8; ++y) {
        for (int x = left; x < left + 8; ++x) {
          img.at(y, x, 0) = r;
          img.at(y, x, 1) = g;
          img.at(y, x, 2) = bl;
        }
      }
    }
    out.push_back(prepare_training_image(std::move(img), encoder, true));
  }
  return out;
}

SyntheticSpec small_synthetic_spec() {
  SyntheticSpec s;
  s.num_palettes = 8;
  s.outfits = 24;
  s.image_side = 32;
  s.fitb_per_outfit = 3;
  return s;
}

}  // namespace sval::testing
