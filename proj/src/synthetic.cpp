#include "sval/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "sval/errors.hpp"
#include "sval/rng.hpp"

namespace sval {
namespace {

enum StreamTag : std::uint64_t {
  kPaletteStream = 1,
  kOutfitStream = 2,
  kStyleStream = 3,
  kPlacementStream = 4,
  kQuestionStream = 5,
};

constexpr std::uint64_t kQueryVariant = 1;

std::vector<double> palette_signature(const std::vector<Rgb>& palette, int bins) {
  std::vector<double> sig(static_cast<std::size_t>(3 * bins), 0.0);
  for (const Rgb& c : palette) {
    for (int ch = 0; ch < 3; ++ch) {
      const int bin = std::min(bins - 1, static_cast<int>(c[ch] * bins));
      sig[static_cast<std::size_t>(ch * bins + bin)] += 1.0;
    }
  }
  return sig;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-12);
}

std::vector<std::vector<Rgb>> make_palettes(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng = derive_rng(seed, kPaletteStream);
  const int bins = spec.histogram_bins;
  auto center = [bins](std::uint64_t k) { return (static_cast<double>(k) + 0.5) / bins; };
  std::vector<std::vector<Rgb>> palettes;
  std::vector<std::vector<double>> signatures;
  for (int attempt = 0; static_cast<int>(palettes.size()) < spec.num_palettes; ++attempt) {
    if (attempt > 200000) {
      throw ValidationError("cannot draw " + std::to_string(spec.num_palettes) +
                            " palettes with similarity <= " +
                            std::to_string(spec.max_palette_similarity));
    }
    const int size = 2 + static_cast<int>(uniform_index(rng, 2));
    std::vector<Rgb> palette;
    while (static_cast<int>(palette.size()) < size) {
      Rgb c{center(uniform_index(rng, bins)), center(uniform_index(rng, bins)),
            center(uniform_index(rng, bins))};
      // Near-white colors would blend into the background.
      if (std::min({c[0], c[1], c[2]}) >= 0.85) continue;
      if (std::find(palette.begin(), palette.end(), c) != palette.end()) continue;
      palette.push_back(c);
    }
    auto sig = palette_signature(palette, bins);
    const bool distinct = std::all_of(signatures.begin(), signatures.end(), [&](const auto& s) {
      return cosine(sig, s) <= spec.max_palette_similarity;
    });
    if (!distinct) continue;
    palettes.push_back(std::move(palette));
    signatures.push_back(std::move(sig));
  }
  return palettes;
}

bool inside_shape(ItemShape shape, double u, double v, double size) {
  switch (shape) {
    case ItemShape::kSquare:
      return true;
    case ItemShape::kCircle: {
      const double du = u - size / 2.0, dv = v - size / 2.0;
      return du * du + dv * dv <= size * size / 4.0;
    }
    case ItemShape::kTriangle:
      return std::abs(u - size / 2.0) <= v / 2.0;
  }
  return false;
}

}  // namespace

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::kSolid: return "solid";
    case Pattern::kStripes: return "stripes";
    case Pattern::kChecker: return "checker";
  }
  return "?";
}

std::string shape_name(ItemShape s) {
  switch (s) {
    case ItemShape::kSquare: return "square";
    case ItemShape::kCircle: return "circle";
    case ItemShape::kTriangle: return "triangle";
  }
  return "?";
}

Pattern parse_pattern(const std::string& name) {
  for (Pattern p : {Pattern::kSolid, Pattern::kStripes, Pattern::kChecker}) {
    if (pattern_name(p) == name) return p;
  }
  throw ValidationError("unknown pattern '" + name + "'");
}

ItemShape parse_shape(const std::string& name) {
  for (ItemShape s : {ItemShape::kSquare, ItemShape::kCircle, ItemShape::kTriangle}) {
    if (shape_name(s) == name) return s;
  }
  throw ValidationError("unknown shape '" + name + "'");
}

void SyntheticSpec::validate() const {
  if (num_palettes < 2) throw ValidationError("synthetic set needs num_palettes >= 2");
  if (outfits < 4) throw ValidationError("synthetic set needs outfits >= 4");
  if (items_per_outfit < 2) throw ValidationError("synthetic set needs items_per_outfit >= 2");
  if (image_side < 8) throw ValidationError("synthetic image side must be >= 8");
  if (patterns.empty() || shapes.empty()) throw ValidationError("empty pattern or shape set");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0,1)");
  }
  if (fitb_per_outfit < 0) throw ValidationError("fitb_per_outfit must be >= 0");
  if (histogram_bins < 2) throw ValidationError("histogram_bins must be >= 2");
  if (!(max_palette_similarity > 0.0 && max_palette_similarity <= 1.0)) {
    throw ValidationError("max_palette_similarity must lie in (0,1]");
  }
}

const SyntheticItem& SyntheticDataset::item(const std::string& id) const {
  for (const SyntheticItem& it : items) {
    if (it.id == id) return it;
  }
  throw std::out_of_range("unknown synthetic item '" + id + "'");
}

ImageTensor render_item(const SyntheticSpec& spec, const std::vector<Rgb>& palette, ItemShape shape,
                        Pattern pattern, Rng& style, Rng& placement) {
  const int side = spec.image_side;
  const int k = static_cast<int>(palette.size());
  const double period = uniform(style, 0.08, 0.16) * side;
  const double phase = uniform(style, 0.0, period);

  const double size = uniform(placement, 0.5, 0.9) * side;
  const double top = uniform(placement, 0.0, side - size);
  const double left = uniform(placement, 0.0, side - size);

  ImageTensor img(side, side, 1.0);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double v = y + 0.5 - top, u = x + 0.5 - left;
      if (u < 0.0 || v < 0.0 || u >= size || v >= size) continue;
      if (!inside_shape(shape, u, v, size)) continue;
      int idx = 0;
      switch (pattern) {
        case Pattern::kSolid:
          idx = std::min(k - 1, static_cast<int>(u / size * k));
          break;
        case Pattern::kStripes:
          idx = static_cast<int>(std::floor((v + phase) / period)) % k;
          break;
        case Pattern::kChecker:
          idx = static_cast<int>(std::floor((u + phase) / period) +
                                 std::floor((v + phase) / period)) % k;
          break;
      }
      for (int c = 0; c < 3; ++c) {
        double value = palette[static_cast<std::size_t>(idx)][c];
        if (spec.noise_sigma > 0.0) value += spec.noise_sigma * standard_normal(placement);
        img.at(y, x, c) = value;
      }
    }
  }
  // Quantize to the 8-bit levels the PPM file will hold.
  for (double& v : img.pixels()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
  spec.validate();
  SyntheticDataset ds;
  ds.palettes = make_palettes(spec, seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  // Outfit palettes are balanced across palettes, then shuffled.
  Rng orng = derive_rng(seed, kOutfitStream);
  std::vector<int> outfit_palette(static_cast<std::size_t>(spec.outfits));
  for (int o = 0; o < spec.outfits; ++o) outfit_palette[static_cast<std::size_t>(o)] = o % spec.num_palettes;
  shuffle(outfit_palette.begin(), outfit_palette.end(), orng);
  const int n_test = std::clamp(static_cast<int>(std::lround(spec.test_fraction * spec.outfits)),
                                1, spec.outfits - 1);
  const int n_train = spec.outfits - n_test;

  DatasetManifest& m = ds.manifest;
  m.base_dir = out_dir;
  std::vector<ImageTensor> images;
  std::uint64_t render_index = 0;

  auto add_item = [&](SyntheticItem item, std::uint64_t style_key, std::uint64_t variant) {
    Rng style = derive_rng(seed, kStyleStream, style_key);
    Rng placement = derive_rng(seed, kPlacementStream, style_key, variant);
    images.push_back(render_item(spec, ds.palettes[static_cast<std::size_t>(item.palette)],
                                 item.shape, item.pattern, style, placement));
    m.items.push_back({item.id, "images/" + item.id + ".ppm", shape_name(item.shape)});
    ds.items.push_back(std::move(item));
    ++render_index;
  };

  std::vector<std::vector<std::size_t>> outfit_members(static_cast<std::size_t>(spec.outfits));
  for (int o = 0; o < spec.outfits; ++o) {
    char oid[16];
    std::snprintf(oid, sizeof oid, "o%04d", o);
    const bool test = o >= n_train;
    OutfitRecord rec{oid, {}};
    for (int k = 0; k < spec.items_per_outfit; ++k) {
      SyntheticItem item;
      item.id = std::string(oid) + "_" + std::to_string(k);
      item.palette = outfit_palette[static_cast<std::size_t>(o)];
      item.shape = spec.shapes[uniform_index(orng, spec.shapes.size())];
      item.pattern = spec.patterns[uniform_index(orng, spec.patterns.size())];
      item.outfit = o;
      item.test = test;
      rec.items.push_back(item.id);
      outfit_members[static_cast<std::size_t>(o)].push_back(ds.items.size());
      add_item(std::move(item), render_index, 0);
    }
    if (!test || !spec.disjoint) m.outfits.push_back(std::move(rec));
  }
  const std::size_t outfit_item_count = ds.items.size();

  // Test items grouped by shape supply question negatives.
  std::map<ItemShape, std::vector<std::size_t>> pool;
  for (std::size_t i = 0; i < outfit_item_count; ++i) {
    if (ds.items[i].test) pool[ds.items[i].shape].push_back(i);
  }

  Rng qrng = derive_rng(seed, kQuestionStream);
  int distractors = 0;
  // Items of `shape` whose palette differs from `palette`, excluding `taken`.
  auto draw_negative = [&](ItemShape shape, int palette, const std::vector<std::size_t>& taken) {
    std::vector<std::size_t> options;
    for (std::size_t i : pool[shape]) {
      if (ds.items[i].palette != palette &&
          std::find(taken.begin(), taken.end(), i) == taken.end()) {
        options.push_back(i);
      }
    }
    if (!options.empty()) return options[uniform_index(qrng, options.size())];
    SyntheticItem item;
    char xid[16];
    std::snprintf(xid, sizeof xid, "x%04d", distractors++);
    item.id = xid;
    item.palette = static_cast<int>(uniform_index(qrng, spec.num_palettes - 1));
    if (item.palette >= palette) ++item.palette;
    item.shape = shape;
    item.pattern = spec.patterns[uniform_index(qrng, spec.patterns.size())];
    item.test = true;
    add_item(std::move(item), render_index, 0);
    return ds.items.size() - 1;
  };

  for (int o = n_train; o < spec.outfits; ++o) {
    const auto& members = outfit_members[static_cast<std::size_t>(o)];
    const int palette = outfit_palette[static_cast<std::size_t>(o)];
    std::vector<std::string> ids;
    for (std::size_t i : members) ids.push_back(ds.items[i].id);
    m.compat.push_back({ids, true});

    std::vector<std::size_t> replaced;
    for (std::size_t i : members) replaced.push_back(draw_negative(ds.items[i].shape, palette, replaced));
    std::vector<std::string> neg_ids;
    for (std::size_t i : replaced) neg_ids.push_back(ds.items[i].id);
    m.compat.push_back({neg_ids, false});

    for (int q = 0; q < spec.fitb_per_outfit; ++q) {
      const std::size_t blank = static_cast<std::size_t>(q % spec.items_per_outfit);
      const std::size_t truth = members[blank];
      FitbQuestion fq;
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (k != blank) fq.partial.push_back(ds.items[members[k]].id);
      }
      std::vector<std::size_t> negatives;
      while (negatives.size() < 3) {
        negatives.push_back(draw_negative(ds.items[truth].shape, palette, negatives));
      }
      fq.answer = static_cast<int>(uniform_index(qrng, 4));
      for (std::size_t c = 0, n = 0; c < 4; ++c) {
        fq.candidates[c] = static_cast<int>(c) == fq.answer ? ds.items[truth].id
                                                             : ds.items[negatives[n++]].id;
      }
      m.fitb.push_back(std::move(fq));
    }
  }

  // Retrieval: a second rendering of every test outfit item.
  for (int o = n_train; o < spec.outfits; ++o) {
    for (std::size_t i : outfit_members[static_cast<std::size_t>(o)]) {
      SyntheticItem query = ds.items[i];
      query.id = ds.items[i].id + "_q";
      query.original = ds.items[i].id;
      query.outfit = -1;
      m.retrieval.push_back({query.id, {query.original}});
      add_item(std::move(query), i, kQueryVariant);
    }
  }

  for (std::size_t i = 0; i < images.size(); ++i) {
    save_ppm(out_dir / m.items[i].path, images[i]);
  }
  m.reindex();
  m.validate();
  save_manifest(out_dir / "manifest.txt", m);

  // Histogram separation over outfit items.
  std::vector<std::vector<double>> hist(outfit_item_count);
  for (std::size_t i = 0; i < outfit_item_count; ++i) {
    hist[i] = compute_histogram(images[i], spec.histogram_bins, true).flattened();
  }
  double min_within = 1.0, max_cross = -1.0;
  for (std::size_t i = 0; i < outfit_item_count; ++i) {
    for (std::size_t j = i + 1; j < outfit_item_count; ++j) {
      const double s = cosine(hist[i], hist[j]);
      if (ds.items[i].outfit == ds.items[j].outfit) {
        min_within = std::min(min_within, s);
      } else if (ds.items[i].palette != ds.items[j].palette) {
        max_cross = std::max(max_cross, s);
      }
    }
  }
  ds.min_within_outfit_similarity = min_within;
  ds.max_cross_palette_similarity = max_cross;
  return ds;
}

}  // namespace sval
