#pragma once

// Planted-palette synthetic corpus. Every outfit draws one palette of 2-3
// colors; its items are random shapes filled with a random pattern in those
// colors on a white background. Compatibility means "same palette", and
// question negatives always match the true item's shape, so only color
// carries the answer.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sval/image.hpp"
#include "sval/manifest.hpp"
#include "sval/rng.hpp"

namespace sval {

enum class Pattern { kSolid, kStripes, kChecker };
enum class ItemShape { kSquare, kCircle, kTriangle };

std::string pattern_name(Pattern p);
std::string shape_name(ItemShape s);
Pattern parse_pattern(const std::string& name);
ItemShape parse_shape(const std::string& name);

using Rgb = std::array<double, 3>;

struct SyntheticSpec {
  int num_palettes = 24;
  int items_per_outfit = 3;
  int outfits = 240;
  int image_side = 64;
  std::vector<Pattern> patterns{Pattern::kSolid, Pattern::kStripes, Pattern::kChecker};
  std::vector<ItemShape> shapes{ItemShape::kSquare, ItemShape::kCircle, ItemShape::kTriangle};
  double noise_sigma = 0.01;
  double test_fraction = 0.5;   // share of outfits held out for questions
  int fitb_per_outfit = 9;      // FITB questions generated per test outfit
  bool disjoint = true;         // test outfits are not listed as OUTFIT records
  int histogram_bins = 10;      // palette colors sit on these bin centers
  double max_palette_similarity = 0.5;

  void validate() const;
};

struct SyntheticItem {
  std::string id;
  int palette = 0;
  ItemShape shape = ItemShape::kSquare;
  Pattern pattern = Pattern::kSolid;
  int outfit = -1;          // -1 for question distractors
  bool test = false;
  std::string original;     // for retrieval queries: the item re-rendered
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<SyntheticItem> items;
  std::vector<std::vector<Rgb>> palettes;
  /// Histogram cosine between items: smallest same-outfit pair and largest
  /// different-palette pair, over outfit items.
  double min_within_outfit_similarity = 0.0;
  double max_cross_palette_similarity = 0.0;

  const SyntheticItem& item(const std::string& id) const;
};

/// Renders one item quantized to 8-bit levels. `style` fixes the pattern
/// period and phase; `placement` fixes position, scale and noise.
ImageTensor render_item(const SyntheticSpec& spec, const std::vector<Rgb>& palette, ItemShape shape,
                        Pattern pattern, Rng& style, Rng& placement);

/// Writes `<out_dir>/images/*.ppm` and `<out_dir>/manifest.txt`.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

}  // namespace sval
