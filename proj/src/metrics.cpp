#include "sval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sval/errors.hpp"
#include "sval/tensor.hpp"

namespace sval {

void EmbeddingSet::add(std::string id, std::vector<double> vector,
                       std::optional<std::string> category) {
  if (ids_.empty() && dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw DimensionError("embedding '" + id + "' has dim " + std::to_string(vector.size()) +
                         ", expected " + std::to_string(dim_));
  }
  if (!index_.emplace(id, ids_.size()).second) {
    throw ValidationError("duplicate embedding id '" + id + "'");
  }
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(vector));
  categories_.push_back(std::move(category));
}

std::span<const double> EmbeddingSet::vector(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no embedding for item '" + id + "'");
  return vectors_[it->second];
}

void EmbeddingSet::set_category(const std::string& id, std::string category) {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no embedding for item '" + id + "'");
  categories_[it->second] = std::move(category);
}

void write_embeddings(std::ostream& out, const EmbeddingSet& set) {
  out << "id\t" << set.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.id(i) << '\t';
    auto v = set.vector(i);
    for (std::size_t j = 0; j < v.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", v[j]);
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingSet read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("embedding file is empty");
  const auto tab = line.find('\t');
  if (tab == std::string::npos || line.substr(0, tab) != "id") {
    throw IoError("embedding file header must be 'id<TAB>dim'");
  }
  std::size_t dim = 0;
  try {
    dim = static_cast<std::size_t>(std::stoul(line.substr(tab + 1)));
  } catch (const std::exception&) {
    throw IoError("embedding file header has a malformed dim");
  }
  EmbeddingSet set(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t = line.find('\t');
    if (t == std::string::npos) {
      throw IoError("embedding line " + std::to_string(line_no) + " lacks a tab");
    }
    std::vector<double> values;
    std::stringstream ss(line.substr(t + 1));
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        values.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw IoError("embedding line " + std::to_string(line_no) + " has a bad value");
      }
    }
    if (values.size() != dim) {
      throw IoError("embedding line " + std::to_string(line_no) + " has " +
                    std::to_string(values.size()) + " values, header says " +
                    std::to_string(dim));
    }
    set.add(line.substr(0, t), std::move(values));
  }
  return set;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write embeddings: " + path.string());
  write_embeddings(out, set);
  if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings: " + path.string());
  return read_embeddings(in);
}

Similarity cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine similarity of unequal lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  double na = std::sqrt(aa), nb = std::sqrt(bb);
  Similarity s;
  if (na < kNormFloor) {
    na = kNormFloor;
    s.degenerate = true;
  }
  if (nb < kNormFloor) {
    nb = kNormFloor;
    s.degenerate = true;
  }
  s.value = ab / (na * nb);
  return s;
}

Similarity compatibility_score(const std::vector<std::span<const double>>& outfit) {
  if (outfit.size() < 2) throw ValidationError("compatibility needs at least two items");
  Similarity out;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < outfit.size(); ++i) {
    for (std::size_t j = i + 1; j < outfit.size(); ++j) {
      const Similarity s = cosine_similarity(outfit[i], outfit[j]);
      total += s.value;
      out.degenerate = out.degenerate || s.degenerate;
      ++pairs;
    }
  }
  out.value = total / static_cast<double>(pairs);
  return out;
}

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (bool l : labels) positives += l ? 1 : 0;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc needs at least one positive and one negative");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so
  // every intermediate is an integer.
  std::size_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::size_t doubled_avg = (i + 1) + j;  // 2 * mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) doubled_rank_sum += doubled_avg;
    }
    i = j;
  }
  const std::size_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double average_precision(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("average_precision: scores/labels length mismatch");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!labels[order[r]]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) throw UndefinedMetricError("average precision needs at least one positive");
  return total / static_cast<double>(hits);
}

CompatibilityReport compatibility_metrics(const std::vector<CompatibilityQuestion>& questions,
                                          const EmbeddingSet& embeddings) {
  std::vector<double> scores;
  std::vector<bool> labels;
  CompatibilityReport report;
  for (const CompatibilityQuestion& q : questions) {
    std::vector<std::span<const double>> vecs;
    for (const std::string& id : q.outfit) vecs.push_back(embeddings.vector(id));
    const Similarity s = compatibility_score(vecs);
    if (s.degenerate) ++report.degenerate;
    scores.push_back(s.value);
    labels.push_back(q.compatible);
  }
  report.questions = questions.size();
  report.auc = auc(scores, labels);
  report.average_precision = average_precision(scores, labels);
  return report;
}

FitbChoice fitb_answer(const FitbQuestion& question, const EmbeddingSet& embeddings) {
  if (question.partial.empty()) throw ValidationError("FITB question has an empty outfit");
  std::vector<std::span<const double>> partial;
  for (const std::string& id : question.partial) partial.push_back(embeddings.vector(id));
  FitbChoice choice;
  double best = 0.0;
  for (std::size_t c = 0; c < question.candidates.size(); ++c) {
    auto cand = embeddings.vector(question.candidates[c]);
    double total = 0.0;
    for (auto p : partial) {
      const Similarity s = cosine_similarity(cand, p);
      total += s.value;
      choice.degenerate = choice.degenerate || s.degenerate;
    }
    const double score = total / static_cast<double>(partial.size());
    if (c == 0 || score > best) {
      if (c != 0) choice.tie = false;
      best = score;
      choice.index = c;
    } else if (score == best) {
      choice.tie = true;
    }
  }
  return choice;
}

FitbReport fitb_accuracy(const std::vector<FitbQuestion>& questions,
                         const EmbeddingSet& embeddings) {
  FitbReport report;
  std::size_t correct = 0;
  for (const FitbQuestion& q : questions) {
    const FitbChoice c = fitb_answer(q, embeddings);
    if (static_cast<int>(c.index) == q.answer) ++correct;
    if (c.tie) ++report.ties;
  }
  report.questions = questions.size();
  if (!questions.empty()) {
    report.accuracy = static_cast<double>(correct) / static_cast<double>(questions.size());
  }
  return report;
}

namespace {

// Indices of `sims` ordered by descending value; equal values keep index order.
std::vector<std::size_t> descending_order(const std::vector<double>& sims) {
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  return order;
}

}  // namespace

RecallReport recall_at_k(const std::vector<std::string>& queries,
                         const std::vector<std::string>& gallery,
                         const std::map<std::string, std::vector<std::string>>& ground_truth,
                         std::size_t k, const EmbeddingSet& embeddings) {
  if (queries.empty()) throw ValidationError("recall@k needs at least one query");
  if (gallery.empty()) throw ValidationError("recall@k needs a non-empty gallery");
  if (k == 0) throw ValidationError("recall@k needs k >= 1");
  RecallReport report;
  report.effective_k = std::min(k, gallery.size());
  report.clamped = k > gallery.size();

  std::vector<std::span<const double>> gvecs;
  for (const std::string& id : gallery) gvecs.push_back(embeddings.vector(id));

  std::size_t hits = 0;
  for (const std::string& q : queries) {
    auto truth_it = ground_truth.find(q);
    if (truth_it == ground_truth.end() || truth_it->second.empty()) {
      throw ValidationError("query '" + q + "' has no ground-truth gallery item");
    }
    auto qv = embeddings.vector(q);
    std::vector<double> sims(gallery.size());
    for (std::size_t g = 0; g < gallery.size(); ++g) sims[g] = cosine_similarity(qv, gvecs[g]).value;
    const auto order = descending_order(sims);
    const std::size_t kk = report.effective_k;
    if (kk < order.size() && sims[order[kk - 1]] == sims[order[kk]]) ++report.ties;
    bool hit = false;
    for (std::size_t r = 0; r < kk && !hit; ++r) {
      const std::string& gid = gallery[order[r]];
      hit = std::find(truth_it->second.begin(), truth_it->second.end(), gid) !=
            truth_it->second.end();
    }
    if (hit) ++hits;
  }
  report.recall = static_cast<double>(hits) / static_cast<double>(queries.size());
  return report;
}

KnnReport knn_category_accuracy(const std::vector<std::span<const double>>& vectors,
                                const std::vector<std::string>& labels, std::size_t k,
                                KnnVote vote, double temperature) {
  if (vectors.size() != labels.size()) throw DimensionError("knn: vectors/labels mismatch");
  if (k == 0) throw ValidationError("knn needs k >= 1");
  const std::size_t n = vectors.size();
  std::vector<std::string> classes;
  std::vector<std::size_t> label_index(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::find(classes.begin(), classes.end(), labels[i]);
    label_index[i] = static_cast<std::size_t>(it - classes.begin());
    if (it == classes.end()) classes.push_back(labels[i]);
  }
  if (classes.size() < 2) throw UndefinedMetricError("knn needs at least two classes");

  KnnReport report;
  report.items = n;
  report.effective_k = std::min(k, n - 1);
  report.clamped = k >= n;

  std::vector<double> sims;
  std::vector<std::size_t> others;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sims.clear();
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      others.push_back(j);
      sims.push_back(cosine_similarity(vectors[i], vectors[j]).value);
    }
    const auto order = descending_order(sims);
    std::vector<double> votes(classes.size(), 0.0);
    for (std::size_t r = 0; r < report.effective_k; ++r) {
      const std::size_t j = others[order[r]];
      votes[label_index[j]] += vote == KnnVote::kWeighted ? std::exp(sims[order[r]] / temperature)
                                                          : 1.0;
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(votes.begin(), votes.end()) - votes.begin());
    if (best == label_index[i]) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return report;
}

KnnReport knn_category_accuracy(const EmbeddingSet& embeddings, std::size_t k, KnnVote vote,
                                double temperature) {
  std::vector<std::span<const double>> vecs;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (!embeddings.category(i)) continue;
    vecs.push_back(embeddings.vector(i));
    labels.push_back(*embeddings.category(i));
  }
  return knn_category_accuracy(vecs, labels, k, vote, temperature);
}

}  // namespace sval
