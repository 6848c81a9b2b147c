#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sval/commands.hpp"
#include "sval/manifest.hpp"
#include "sval/synthetic.hpp"

namespace sval {
namespace {

using namespace sval::testing;

// 240 outfits, half held out, nine questions each: 1080 FITB questions.
const SyntheticDataset& question_rich_dataset() {
  static const SyntheticDataset data = [] {
    SyntheticSpec spec;
    spec.image_side = 32;
    return generate_synthetic(spec, 5, scratch_dir("rich"));
  }();
  return data;
}

TEST(Manifest, MinimalManifestLoads) {
  std::istringstream in(
      "# two items\n"
      "ITEM a images/a.ppm top\n"
      "ITEM b /abs/b.png\n"
      "OUTFIT o1 a b\n");
  const DatasetManifest m = parse_manifest(in, "/data");
  ASSERT_EQ(m.items.size(), 2u);
  EXPECT_EQ(m.item("a").category, "top");
  EXPECT_FALSE(m.item("b").category.has_value());
  EXPECT_EQ(m.image_path(m.item("a")), std::filesystem::path("/data/images/a.ppm"));
  EXPECT_EQ(m.image_path(m.item("b")), std::filesystem::path("/abs/b.png"));
  EXPECT_EQ(m.training_item_ids(), (std::vector<std::string>{"a", "b"}));
}

TEST(Manifest, AllRecordKindsParse) {
  std::istringstream in(
      "ITEM a a.ppm\nITEM b b.ppm\nITEM c c.ppm\nITEM d d.ppm\nITEM e e.ppm\n"
      "COMPAT + a b c\n"
      "COMPAT - a d\n"
      "FITB 2 | a b | c d e a\n"
      "RETR e a b\n");
  const DatasetManifest m = parse_manifest(in, ".");
  ASSERT_EQ(m.compat.size(), 2u);
  EXPECT_TRUE(m.compat[0].compatible);
  EXPECT_FALSE(m.compat[1].compatible);
  ASSERT_EQ(m.fitb.size(), 1u);
  EXPECT_EQ(m.fitb[0].answer, 2);
  EXPECT_EQ(m.fitb[0].candidates[3], "a");
  EXPECT_EQ(m.retrieval_queries(), std::vector<std::string>{"e"});
  EXPECT_EQ(m.retrieval_gallery(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.training_item_ids().size(), 5u);
}

TEST(Manifest, DanglingReferenceNamesTheId) {
  std::istringstream in("ITEM a a.ppm\nOUTFIT o1 a ghost\n");
  try {
    parse_manifest(in, ".");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Manifest, ParseErrorCarriesTheLineNumber) {
  std::istringstream in("ITEM a a.ppm\n\n# note\nFITB 7 | a | a a a a\n");
  try {
    parse_manifest(in, ".", "m.txt");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_EQ(std::string(e.what()).rfind("m.txt:4:", 0), 0u);
  }
  for (const char* bad : {"BOGUS x\n", "ITEM a\n", "ITEM a a.ppm\nITEM a b.ppm\n",
                          "ITEM a a.ppm\nCOMPAT + a\n", "ITEM a a.ppm\nCOMPAT ? a a\n",
                          "ITEM a a.ppm\nFITB 0 | a | a a a\n"}) {
    std::istringstream s(bad);
    EXPECT_THROW(parse_manifest(s, "."), ValidationError) << bad;
  }
}

TEST(Manifest, MissingFileIsAnIoError) {
  EXPECT_THROW(load_manifest("/nonexistent/manifest.txt"), IoError);
}

TEST(Synthetic, ManifestRoundTripsStructurally) {
  const auto dir = scratch_dir("roundtrip");
  const SyntheticDataset data = generate_synthetic(small_synthetic_spec(), 3, dir);
  const DatasetManifest loaded = load_manifest(dir / "manifest.txt");
  EXPECT_TRUE(loaded.same_structure(data.manifest));
  std::ostringstream a, b;
  write_manifest(a, loaded);
  write_manifest(b, data.manifest);
  EXPECT_EQ(a.str(), b.str());
  for (const ItemRecord& item : loaded.items) {
    EXPECT_TRUE(std::filesystem::exists(loaded.image_path(item))) << item.id;
  }
}

TEST(Synthetic, FixedSeedGivesByteIdenticalImages) {
  const auto d1 = scratch_dir("seed_a"), d2 = scratch_dir("seed_b"), d3 = scratch_dir("seed_c");
  const SyntheticDataset a = generate_synthetic(small_synthetic_spec(), 7, d1);
  generate_synthetic(small_synthetic_spec(), 7, d2);
  generate_synthetic(small_synthetic_spec(), 8, d3);
  EXPECT_EQ(read_file(d1 / "manifest.txt"), read_file(d2 / "manifest.txt"));
  bool any_differs = false;
  for (const ItemRecord& item : a.manifest.items) {
    const std::string x = read_file(d1 / item.path);
    EXPECT_EQ(x, read_file(d2 / item.path)) << item.id;
    if (std::filesystem::exists(d3 / item.path) && x != read_file(d3 / item.path)) {
      any_differs = true;
    }
  }
  EXPECT_TRUE(any_differs);
}

TEST(Synthetic, SameOutfitItemsAreCloserThanCrossPaletteItems) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SyntheticDataset data =
        generate_synthetic(small_synthetic_spec(), seed, scratch_dir("sep"));
    EXPECT_GT(data.min_within_outfit_similarity, data.max_cross_palette_similarity) << seed;
  }
}

TEST(Synthetic, SeparationIsRecomputedFromDecodedImages) {
  const auto dir = scratch_dir("sep_oracle");
  const SyntheticDataset data = generate_synthetic(small_synthetic_spec(), 4, dir);
  const EmbeddingSet hist = compute_embeddings(data.manifest, nullptr, "histogram", 10, true);
  double within = 1.0, cross = -1.0;
  for (const SyntheticItem& a : data.items) {
    if (a.outfit < 0) continue;
    for (const SyntheticItem& b : data.items) {
      if (b.outfit < 0 || a.id >= b.id) continue;
      const double s = oracle_cosine(hist.vector(a.id), hist.vector(b.id));
      if (a.outfit == b.outfit) within = std::min(within, s);
      if (a.palette != b.palette) cross = std::max(cross, s);
    }
  }
  EXPECT_GT(within, cross);
  EXPECT_NEAR(within, data.min_within_outfit_similarity, 1e-12);
  EXPECT_NEAR(cross, data.max_cross_palette_similarity, 1e-12);
}

TEST(Synthetic, QuestionsMatchTheConstruction) {
  const SyntheticDataset& data = question_rich_dataset();
  const DatasetManifest& m = data.manifest;
  EXPECT_GE(m.fitb.size(), 1000u);
  for (const FitbQuestion& q : m.fitb) {
    const SyntheticItem& truth = data.item(q.candidates[static_cast<std::size_t>(q.answer)]);
    const int palette = data.item(q.partial[0]).palette;
    EXPECT_EQ(truth.palette, palette);
    for (std::size_t c = 0; c < 4; ++c) {
      const SyntheticItem& cand = data.item(q.candidates[c]);
      EXPECT_EQ(cand.shape, truth.shape);
      if (c != static_cast<std::size_t>(q.answer)) EXPECT_NE(cand.palette, palette);
    }
  }
  std::size_t pos = 0;
  for (const CompatibilityQuestion& q : m.compat) pos += q.compatible ? 1 : 0;
  EXPECT_EQ(pos * 2, m.compat.size());
  for (const RetrievalRecord& r : m.retrieval) {
    ASSERT_EQ(r.truths.size(), 1u);
    EXPECT_EQ(data.item(r.query).original, r.truths[0]);
  }
}

TEST(Synthetic, DisjointFlagKeepsTestItemsOutOfTraining) {
  const SyntheticDataset& data = question_rich_dataset();
  const std::vector<std::string> train = data.manifest.training_item_ids();
  const std::set<std::string> train_set(train.begin(), train.end());
  for (const std::string& id : data.manifest.question_item_ids()) {
    EXPECT_EQ(train_set.count(id), 0u) << id;
  }
  SyntheticSpec shared = small_synthetic_spec();
  shared.disjoint = false;
  const SyntheticDataset mixed = generate_synthetic(shared, 2, scratch_dir("mixed"));
  EXPECT_EQ(mixed.manifest.outfits.size(), static_cast<std::size_t>(shared.outfits));
}

TEST(Synthetic, HistogramOracleSolvesFitb) {
  const SyntheticDataset& data = question_rich_dataset();
  const EmbeddingSet hist = compute_embeddings(data.manifest, nullptr, "histogram", 10, true);
  EXPECT_GE(fitb_accuracy(data.manifest.fitb, hist).accuracy, 0.9);
  EXPECT_GE(oracle_fitb_accuracy(data.manifest.fitb, hist), 0.9);
}

TEST(Synthetic, ShapeOracleIsNearChance) {
  const SyntheticDataset& data = question_rich_dataset();
  EmbeddingSet shape(6);
  for (const SyntheticItem& item : data.items) {
    std::vector<double> v(6, 0.0);
    v[static_cast<std::size_t>(item.shape)] = 1.0;
    v[3 + static_cast<std::size_t>(item.pattern)] = 1.0;
    shape.add(item.id, v);
  }
  EXPECT_LE(fitb_accuracy(data.manifest.fitb, shape).accuracy, 0.3);
}

TEST(Synthetic, RandomEmbeddingsGiveChanceFitb) {
  // Questions share partial outfits, so single draws are correlated; average a few.
  const SyntheticDataset& data = question_rich_dataset();
  double total = 0.0;
  const int draws = 10;
  for (int d = 0; d < draws; ++d) {
    Rng rng = derive_rng(21, static_cast<std::uint64_t>(d));
    EmbeddingSet random(16);
    for (const SyntheticItem& item : data.items) {
      std::vector<double> v(16);
      for (double& x : v) x = standard_normal(rng);
      random.add(item.id, v);
    }
    total += fitb_accuracy(data.manifest.fitb, random).accuracy;
  }
  EXPECT_NEAR(total / draws, 0.25, 0.03);
}

TEST(Synthetic, ItemsLookLikeTheirDescription) {
  const SyntheticDataset& data = question_rich_dataset();
  const SyntheticItem& item = data.items.front();
  const ImageTensor img = load_item_image(data.manifest, item.id);
  EXPECT_EQ(img.height(), 32);
  EXPECT_EQ(img.at(0, 0, 0), 1.0);
  const ColorHistogram h = compute_histogram(img, 10, true);
  EXPECT_FALSE(h.degenerate);
  EXPECT_EQ(data.manifest.item(item.id).category, shape_name(item.shape));
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  SyntheticSpec s = small_synthetic_spec();
  s.num_palettes = 1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = small_synthetic_spec();
  s.outfits = 3;
  EXPECT_THROW(s.validate(), ValidationError);
  s = small_synthetic_spec();
  s.patterns.clear();
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_THROW(parse_shape("hexagon"), ValidationError);
}

}  // namespace
}  // namespace sval
