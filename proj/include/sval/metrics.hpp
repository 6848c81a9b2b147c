#pragma once

// Downstream evaluation protocols over frozen embeddings: outfit
// compatibility (AUC / AP), fill-in-the-blank, retrieval recall@k and a
// leave-one-out kNN category probe. Ties are always broken toward the lowest
// index and reported.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sval {

/// A metric is undefined for the given labels (e.g. only one class).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Item id -> embedding vector, with optional category labels.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(std::size_t dim) : dim_(dim) {}

  void add(std::string id, std::vector<double> vector,
           std::optional<std::string> category = std::nullopt);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::span<const double> vector(const std::string& id) const;
  std::span<const double> vector(std::size_t i) const { return vectors_[i]; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::optional<std::string>& category(std::size_t i) const { return categories_[i]; }
  void set_category(const std::string& id, std::string category);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> vectors_;
  std::vector<std::optional<std::string>> categories_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Embedding file: header `id<TAB>dim`, then `item_id<TAB>v1,v2,...` with
/// 9 significant digits per value.
void write_embeddings(std::ostream& out, const EmbeddingSet& set);
EmbeddingSet read_embeddings(std::istream& in);
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

struct Similarity {
  double value = 0.0;
  bool degenerate = false;  // a zero vector hit the norm floor
};

Similarity cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Mean cosine similarity over all unordered pairs of the outfit.
Similarity compatibility_score(const std::vector<std::span<const double>>& outfit);

/// Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg), from average ranks.
double auc(std::span<const double> scores, const std::vector<bool>& labels);

/// Non-interpolated AP over a stable descending ranking (ties keep input order).
double average_precision(std::span<const double> scores, const std::vector<bool>& labels);

struct CompatibilityQuestion {
  std::vector<std::string> outfit;
  bool compatible = false;
};

struct CompatibilityReport {
  double auc = 0.0;
  double average_precision = 0.0;
  std::size_t questions = 0;
  std::size_t degenerate = 0;  // outfits that contained a zero vector
};

/// Scores every outfit and reports AUC / AP against the labels.
CompatibilityReport compatibility_metrics(const std::vector<CompatibilityQuestion>& questions,
                                          const EmbeddingSet& embeddings);

struct FitbQuestion {
  std::vector<std::string> partial;
  std::array<std::string, 4> candidates;
  int answer = 0;
};

struct FitbChoice {
  std::size_t index = 0;
  bool tie = false;
  bool degenerate = false;
};

/// Picks the candidate with the highest mean cosine similarity to the partial
/// outfit. Missing ids raise std::out_of_range naming the id.
FitbChoice fitb_answer(const FitbQuestion& question, const EmbeddingSet& embeddings);

struct FitbReport {
  double accuracy = 0.0;
  std::size_t questions = 0;
  std::size_t ties = 0;
};

FitbReport fitb_accuracy(const std::vector<FitbQuestion>& questions,
                         const EmbeddingSet& embeddings);

struct RecallReport {
  double recall = 0.0;
  std::size_t effective_k = 0;
  bool clamped = false;      // requested k exceeded the gallery
  std::size_t ties = 0;      // queries whose k-th score tied the (k+1)-th
};

/// Fraction of queries with a ground-truth gallery item among their top-k
/// cosine neighbors.
RecallReport recall_at_k(const std::vector<std::string>& queries,
                         const std::vector<std::string>& gallery,
                         const std::map<std::string, std::vector<std::string>>& ground_truth,
                         std::size_t k, const EmbeddingSet& embeddings);

enum class KnnVote { kWeighted, kMajority };

struct KnnReport {
  double accuracy = 0.0;
  std::size_t effective_k = 0;
  bool clamped = false;
  std::size_t items = 0;
};

inline constexpr double kKnnTemperature = 0.07;

/// Leave-one-out kNN over labeled vectors. Weighted votes add exp(sim/tau)
/// per neighbor; majority votes add 1. Vote ties go to the label seen first
/// in `labels`.
KnnReport knn_category_accuracy(const std::vector<std::span<const double>>& vectors,
                                const std::vector<std::string>& labels, std::size_t k,
                                KnnVote vote = KnnVote::kWeighted,
                                double temperature = kKnnTemperature);

/// All items of `embeddings` with a category.
KnnReport knn_category_accuracy(const EmbeddingSet& embeddings, std::size_t k,
                                KnnVote vote = KnnVote::kWeighted,
                                double temperature = kKnnTemperature);

}  // namespace sval
