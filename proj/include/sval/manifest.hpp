#pragma once

// Line-oriented dataset manifest. One record per line, whitespace separated,
// `#` starts a comment:
//
//   ITEM   <id> <path> [category]
//   OUTFIT <id> <item_id>+
//   COMPAT <+|-> <item_id>+
//   FITB   <answer_idx> | <partial ids> | <4 candidate ids>
//   RETR   <query_id> <truth_id>+
//
// Image paths are relative to the manifest's directory unless absolute.
// Items listed in OUTFIT records form the training set; COMPAT/FITB/RETR
// records are evaluation questions.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sval/errors.hpp"
#include "sval/metrics.hpp"

namespace sval {

class ManifestError : public ValidationError {
 public:
  ManifestError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ItemRecord {
  std::string id;
  std::string path;
  std::optional<std::string> category;

  bool operator==(const ItemRecord&) const = default;
};

struct OutfitRecord {
  std::string id;
  std::vector<std::string> items;

  bool operator==(const OutfitRecord&) const = default;
};

struct RetrievalRecord {
  std::string query;
  std::vector<std::string> truths;

  bool operator==(const RetrievalRecord&) const = default;
};

class DatasetManifest {
 public:
  std::vector<ItemRecord> items;
  std::vector<OutfitRecord> outfits;
  std::vector<CompatibilityQuestion> compat;
  std::vector<FitbQuestion> fitb;
  std::vector<RetrievalRecord> retrieval;
  std::filesystem::path base_dir;

  /// Checks uniqueness and that every referenced id exists. Raises
  /// ValidationError naming the first offending id.
  void validate() const;
  void reindex();

  bool has_item(const std::string& id) const { return index_.count(id) != 0; }
  const ItemRecord& item(const std::string& id) const;
  std::filesystem::path image_path(const ItemRecord& item) const;

  /// Distinct items of all outfits in first-appearance order; all items when
  /// there are no outfits.
  std::vector<std::string> training_item_ids() const;
  std::vector<std::vector<std::string>> outfit_item_lists() const;

  std::vector<std::string> retrieval_queries() const;
  /// Distinct ground-truth ids across retrieval records.
  std::vector<std::string> retrieval_gallery() const;
  std::map<std::string, std::vector<std::string>> retrieval_truth() const;

  /// Every item id referenced by an evaluation question.
  std::vector<std::string> question_item_ids() const;

  /// Structural equality (base_dir excluded).
  bool same_structure(const DatasetManifest& other) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name = "manifest");
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace sval
