#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sval/image.hpp"
#include "sval/model.hpp"
#include "sval/rng.hpp"
#include "sval/synthetic.hpp"
#include "sval/trainer.hpp"

namespace sval::testing {

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Two conv stages, 16 px input, small heads.
EncoderConfig tiny_encoder();

/// Random image whose pixels are white with probability `white_fraction`
/// and otherwise uniform colors.
ImageTensor random_image(int height, int width, Rng& rng, double white_fraction = 0.0);

/// `n` images made of a few colored blocks on white, prepared for training.
std::vector<TrainingImage> toy_training_set(std::size_t n, std::uint64_t seed,
                                            const EncoderConfig& encoder);

/// Synthetic spec small enough for unit tests.
SyntheticSpec small_synthetic_spec();

}  // namespace sval::testing
