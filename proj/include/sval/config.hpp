#pragma once

// Run configuration: INI-style `key = value` text with sections. Every key
// has a default; unknown sections or keys are rejected. Keys:
//
//   [run]      seed
//   [data]     manifest
//   [model]    widths, kernel_size, feature_dim, input_side, n_bins,
//              slpd_dim, texture_channels
//   [train]    epochs, batch_size, learning_rate, temperature, momentum,
//              lambda_rgb, lambda_slpd, lambda_td, patch_ratio_lo,
//              patch_ratio_hi, exclude_background, color_distortion,
//              checkpoint, log, resume, save_interval
//   [pretext]  rgb, slpd, td, id_baseline
//   [embed]    checkpoint, features (trunk | histogram), output
//   [eval]     embeddings, report, protocols, recall_k, knn_k, knn_vote
//   [synth]    output_dir, num_palettes, items_per_outfit, outfits,
//              image_side, patterns, shapes, noise_sigma, test_fraction,
//              fitb_per_outfit, disjoint, max_palette_similarity
//   [ablate]   grid (lo:hi,lo:hi,...), epochs, output

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sval/metrics.hpp"
#include "sval/model.hpp"
#include "sval/synthetic.hpp"
#include "sval/trainer.hpp"

namespace sval {

struct EvalProtocols {
  bool compat = true;
  bool fitb = true;
  bool recall = true;
  bool knn = true;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path manifest;

  EncoderConfig model;
  TrainingConfig train;  // train.seed mirrors `seed`
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::filesystem::path resume;
  int save_interval = 0;  // epochs between intermediate checkpoints; 0 = end only

  std::filesystem::path embed_checkpoint;
  std::string embed_features = "trunk";
  std::filesystem::path embeddings;

  std::filesystem::path report;
  EvalProtocols protocols;
  std::vector<int> recall_ks{1, 5, 10};
  int knn_k = 20;
  KnnVote knn_vote = KnnVote::kWeighted;

  std::filesystem::path synth_dir;
  SyntheticSpec synth;

  std::vector<PatchSpec> ablate_grid{{0.05, 0.15}, {0.4, 1.0}};
  int ablate_epochs = 0;  // 0 uses train.epochs
  std::filesystem::path ablate_table;

  /// Throws ValidationError on the first inconsistent value.
  void validate() const;
};

/// Sets one `section.key` (a bare key means `run.key`). Unknown keys throw.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Comma list of rgb, slpd, td, id (or id_baseline).
PretextSelection parse_pretext_list(const std::string& list);

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace sval
