#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sval/errors.hpp"
#include "sval/metrics.hpp"

namespace sval {
namespace {

using namespace sval::testing;

using Vec = std::vector<double>;

std::vector<std::span<const double>> spans(const std::vector<Vec>& vs) {
  return {vs.begin(), vs.end()};
}

// Coarse values so ties show up often.
double coarse(Rng& rng) { return static_cast<double>(uniform_index(rng, 5)) - 2.0; }

Vec coarse_vector(Rng& rng, std::size_t dim) {
  Vec v(dim);
  do {
    for (double& x : v) x = coarse(rng);
  } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  return v;
}

TEST(Compatibility, Examples) {
  const Vec a{1, 0}, b{0, 1}, c{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)};
  EXPECT_NEAR(compatibility_score({a, a}).value, 1.0, 1e-15);
  EXPECT_NEAR(compatibility_score({a, b}).value, 0.0, 1e-15);
  EXPECT_NEAR(compatibility_score({a, b, c}).value, std::sqrt(2.0) / 3, 1e-15);
  EXPECT_NEAR(compatibility_score({a, b, c}).value, 0.4714, 1e-4);
  const Vec zero{0, 0};
  EXPECT_TRUE(compatibility_score({a, zero}).degenerate);
  EXPECT_FALSE(compatibility_score({a, b}).degenerate);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(Vec{0.9, 0.8, 0.1}, {true, true, false}), 1.0);
  EXPECT_EQ(auc(Vec{0.5, 0.5, 0.5, 0.5}, {true, false, true, false}), 0.5);
  EXPECT_EQ(auc(Vec{0.9, 0.4, 0.6, 0.1}, {true, true, false, false}), 0.75);
  EXPECT_THROW(auc(Vec{0.1, 0.2}, {true, true}), UndefinedMetricError);
  EXPECT_THROW(auc(Vec{0.1, 0.2}, {true}), std::invalid_argument);
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision(Vec{0.9, 0.8, 0.1}, {true, true, false}), 1.0);
  EXPECT_EQ(average_precision(Vec{0.9, 0.1}, {false, true}), 0.5);
  EXPECT_NEAR(average_precision(Vec{0.9, 0.8, 0.7}, {true, false, true}), (1 + 2.0 / 3) / 2, 1e-15);
  // Ties keep input order.
  EXPECT_EQ(average_precision(Vec{0.5, 0.5}, {true, false}), 1.0);
  EXPECT_EQ(average_precision(Vec{0.5, 0.5}, {false, true}), 0.5);
  EXPECT_THROW(average_precision(Vec{0.3}, {false}), UndefinedMetricError);
}

TEST(Fitb, Examples) {
  EmbeddingSet e(2);
  e.add("p", {1, 0});
  e.add("same", {1, 0});
  e.add("o1", {0, 1});
  e.add("o2", {0, -1});
  const FitbQuestion q{{"p"}, {"o1", "o2", "same", "o1"}, 2};
  const FitbChoice c = fitb_answer(q, e);
  EXPECT_EQ(c.index, 2u);
  EXPECT_FALSE(c.tie);

  const FitbQuestion all_same{{"p"}, {"o1", "o1", "o1", "o1"}, 1};
  const FitbChoice t = fitb_answer(all_same, e);
  EXPECT_EQ(t.index, 0u);
  EXPECT_TRUE(t.tie);

  const FitbReport r = fitb_accuracy({q, all_same}, e);
  EXPECT_EQ(r.accuracy, 0.5);
  EXPECT_EQ(r.ties, 1u);

  const FitbQuestion missing{{"nope"}, {"o1", "o1", "o1", "o1"}, 0};
  try {
    fitb_answer(missing, e);
    FAIL();
  } catch (const std::out_of_range& err) {
    EXPECT_NE(std::string(err.what()).find("nope"), std::string::npos);
  }
}

TEST(Recall, Examples) {
  EmbeddingSet e(3);
  e.add("q", {1, 2, 3});
  e.add("g0", {-1, 0, 0});
  e.add("g1", {1, 2, 3});
  e.add("g2", {0, 1, 0});
  std::map<std::string, std::vector<std::string>> truth{{"q", {"g1"}}};
  EXPECT_EQ(recall_at_k({"q"}, {"g0", "g1", "g2"}, truth, 1, e).recall, 1.0);

  truth["q"] = {"g0"};
  EXPECT_EQ(recall_at_k({"q"}, {"g0", "g1", "g2"}, truth, 2, e).recall, 0.0);
  const RecallReport all = recall_at_k({"q"}, {"g0", "g1", "g2"}, truth, 3, e);
  EXPECT_EQ(all.recall, 1.0);
  const RecallReport clamped = recall_at_k({"q"}, {"g0", "g1", "g2"}, truth, 10, e);
  EXPECT_TRUE(clamped.clamped);
  EXPECT_EQ(clamped.effective_k, 3u);
  EXPECT_EQ(clamped.recall, 1.0);
}

TEST(Recall, HandSetQueriesMatchExhaustiveRanking) {
  EmbeddingSet e(2);
  e.add("q0", {1, 0});
  e.add("q1", {0, 1});
  e.add("q2", {-1, -1});
  e.add("a", {1, 0.1});
  e.add("b", {0.1, 1});
  e.add("c", {-1, -0.9});
  e.add("d", {1, 1});
  e.add("f", {0.5, -1});
  const std::vector<std::string> queries{"q0", "q1", "q2"}, gallery{"a", "b", "c", "d", "f"};
  const std::map<std::string, std::vector<std::string>> truth{
      {"q0", {"d"}}, {"q1", {"b"}}, {"q2", {"f"}}};
  for (std::size_t k = 1; k <= 5; ++k) {
    EXPECT_EQ(recall_at_k(queries, gallery, truth, k, e).recall,
              oracle_recall(queries, gallery, truth, k, e));
  }
  EXPECT_NEAR(recall_at_k(queries, gallery, truth, 1, e).recall, 1.0 / 3, 1e-15);
  EXPECT_EQ(recall_at_k(queries, gallery, truth, 2, e).recall, 1.0);
}

TEST(Knn, Examples) {
  const std::vector<Vec> v{{1, 0.1}, {1, -0.1}, {1, 0}, {-1, 0.1}, {-1, -0.1}, {-1, 0}};
  const std::vector<std::string> labels{"a", "a", "a", "b", "b", "b"};
  EXPECT_EQ(knn_category_accuracy(spans(v), labels, 1).accuracy, 1.0);
  const KnnReport r = knn_category_accuracy(spans(v), labels, 10);
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.effective_k, 5u);
  EXPECT_THROW(knn_category_accuracy(spans(v), std::vector<std::string>(6, "a"), 1),
               UndefinedMetricError);
  EXPECT_THROW(knn_category_accuracy(spans(v), labels, 0), std::invalid_argument);
}

TEST(Knn, HandSetConfigurationMatchesOracle) {
  const std::vector<Vec> v{{1, 0}, {0.8, 0.6}, {0, 1}, {-0.6, 0.8}, {-1, 0}, {0.6, -0.8}};
  const std::vector<std::string> labels{"x", "y", "x", "y", "x", "y"};
  for (std::size_t k = 1; k <= 5; ++k) {
    for (bool weighted : {true, false}) {
      const KnnVote vote = weighted ? KnnVote::kWeighted : KnnVote::kMajority;
      EXPECT_EQ(knn_category_accuracy(spans(v), labels, k, vote).accuracy,
                oracle_knn(v, labels, k, weighted, kKnnTemperature))
          << k << " " << weighted;
    }
  }
}

TEST(Knn, ShuffledLabelsGiveChance) {
  Rng rng = derive_rng(11);
  std::vector<Vec> v;
  std::vector<std::string> labels;
  for (int i = 0; i < 1200; ++i) {
    v.push_back({standard_normal(rng), standard_normal(rng), standard_normal(rng)});
    labels.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 4))));
  }
  EXPECT_NEAR(knn_category_accuracy(spans(v), labels, 20).accuracy, 0.25, 0.05);
}

TEST(MetricOracles, RandomInstancesAgreeExactly) {
  Rng rng = derive_rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 19);
    Vec scores(n);
    std::vector<bool> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = coarse(rng);
      labels[i] = bernoulli(rng, 0.5);
    }
    labels[0] = true;
    labels[1] = false;
    ASSERT_EQ(auc(scores, labels), oracle_auc(scores, labels)) << trial;
    ASSERT_EQ(average_precision(scores, labels), oracle_average_precision(scores, labels)) << trial;

    const std::size_t dim = 2 + uniform_index(rng, 3);
    EmbeddingSet e(dim);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("i" + std::to_string(i));
      e.add(ids.back(), coarse_vector(rng, dim));
    }
    auto pick = [&] { return ids[uniform_index(rng, n)]; };
    std::vector<FitbQuestion> fq(3);
    for (FitbQuestion& q : fq) {
      q.partial = {pick(), pick()};
      for (auto& c : q.candidates) c = pick();
      q.answer = static_cast<int>(uniform_index(rng, 4));
      const FitbChoice got = fitb_answer(q, e);
      const OracleChoice want = oracle_fitb(q, e);
      ASSERT_EQ(got.index, want.index) << trial;
      ASSERT_EQ(got.tie, want.tie) << trial;
    }
    ASSERT_EQ(fitb_accuracy(fq, e).accuracy, oracle_fitb_accuracy(fq, e)) << trial;

    const std::size_t nq = 1 + uniform_index(rng, n / 2);
    const std::vector<std::string> queries(ids.begin(), ids.begin() + static_cast<long>(nq));
    const std::vector<std::string> gallery(ids.begin() + static_cast<long>(nq), ids.end());
    std::map<std::string, std::vector<std::string>> truth;
    for (const auto& q : queries) truth[q] = {gallery[uniform_index(rng, gallery.size())]};
    const std::size_t k = 1 + uniform_index(rng, gallery.size() + 2);
    ASSERT_EQ(recall_at_k(queries, gallery, truth, k, e).recall,
              oracle_recall(queries, gallery, truth, k, e))
        << trial;

    std::vector<Vec> vectors;
    std::vector<std::string> cats;
    for (std::size_t i = 0; i < n; ++i) {
      vectors.emplace_back(e.vector(i).begin(), e.vector(i).end());
      cats.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 3))));
    }
    cats[0] = "a";
    cats[1] = "b";
    const std::size_t kk = 1 + uniform_index(rng, n + 1);
    for (bool weighted : {true, false}) {
      ASSERT_EQ(knn_category_accuracy(spans(vectors), cats, kk,
                                      weighted ? KnnVote::kWeighted : KnnVote::kMajority)
                    .accuracy,
                oracle_knn(vectors, cats, kk, weighted, kKnnTemperature))
          << trial;
    }
  }
}

TEST(MetricProperties, AucInvariantUnderMonotoneTransform) {
  Rng rng = derive_rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 19);
    Vec s(n), t(n);
    std::vector<bool> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse(rng) + 0.5 * uniform_index(rng, 2);
      t[i] = std::exp(3 * s[i]) - 7.0;
      labels[i] = bernoulli(rng, 0.4);
    }
    labels[0] = true;
    labels[n - 1] = false;
    EXPECT_EQ(auc(s, labels), auc(t, labels));
  }
}

TEST(MetricProperties, PerfectSeparationIffAucAndApAreOne) {
  Rng rng = derive_rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 10);
    Vec s(n);
    std::vector<bool> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse(rng);
      labels[i] = bernoulli(rng, 0.5);
    }
    labels[0] = true;
    labels[1] = false;
    double min_pos = 1e9, max_neg = -1e9;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i]) min_pos = std::min(min_pos, s[i]);
      else max_neg = std::max(max_neg, s[i]);
    }
    const bool dominate = min_pos > max_neg;
    EXPECT_EQ(auc(s, labels) == 1.0, dominate);
    if (dominate) EXPECT_EQ(average_precision(s, labels), 1.0);
  }
}

TEST(MetricProperties, FitbInvariantUnderPositiveScaling) {
  Rng rng = derive_rng(15);
  for (int trial = 0; trial < 300; ++trial) {
    EmbeddingSet e(4), scaled(4);
    const double factor = uniform(rng, 0.01, 100.0);
    for (int i = 0; i < 8; ++i) {
      Vec v(4);
      for (double& x : v) x = standard_normal(rng);
      Vec w = v;
      for (double& x : w) x *= factor;
      e.add("i" + std::to_string(i), v);
      scaled.add("i" + std::to_string(i), w);
    }
    FitbQuestion q{{"i0", "i1"}, {"i2", "i3", "i4", "i5"}, 0};
    EXPECT_EQ(fitb_answer(q, e).index, fitb_answer(q, scaled).index);
  }
}

TEST(MetricProperties, RecallNonDecreasingInK) {
  Rng rng = derive_rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    EmbeddingSet e(3);
    std::vector<std::string> queries, gallery;
    std::map<std::string, std::vector<std::string>> truth;
    for (int i = 0; i < 12; ++i) {
      const std::string id = "g" + std::to_string(i);
      e.add(id, coarse_vector(rng, 3));
      gallery.push_back(id);
    }
    for (int i = 0; i < 5; ++i) {
      const std::string id = "q" + std::to_string(i);
      e.add(id, coarse_vector(rng, 3));
      queries.push_back(id);
      truth[id] = {gallery[uniform_index(rng, 12)]};
    }
    double prev = 0.0;
    for (std::size_t k = 1; k <= 12; ++k) {
      const double r = recall_at_k(queries, gallery, truth, k, e).recall;
      EXPECT_GE(r, prev);
      prev = r;
    }
    EXPECT_EQ(prev, 1.0);
  }
}

TEST(Embeddings, FileRoundTripWithinNineDigits) {
  Rng rng = derive_rng(17);
  EmbeddingSet e(5);
  for (int i = 0; i < 50; ++i) {
    Vec v(5);
    for (double& x : v) x = standard_normal(rng) * std::pow(10.0, uniform(rng, -6, 6));
    e.add("item" + std::to_string(i), v);
  }
  std::stringstream ss;
  write_embeddings(ss, e);
  const EmbeddingSet back = read_embeddings(ss);
  ASSERT_EQ(back.size(), e.size());
  ASSERT_EQ(back.dim(), 5u);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_EQ(back.id(i), e.id(i));
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(back.vector(i)[j], e.vector(i)[j], 1e-7 * std::abs(e.vector(i)[j]));
    }
  }
}

TEST(Embeddings, MalformedFilesAreRejected) {
  std::istringstream bad_dim("id\t3\na\t1,2\n");
  EXPECT_THROW(read_embeddings(bad_dim), IoError);
  std::istringstream bad_value("id\t2\na\t1,x\n");
  EXPECT_THROW(read_embeddings(bad_value), IoError);
  EmbeddingSet e(2);
  e.add("a", {1, 2});
  EXPECT_THROW(e.add("a", {1, 2}), std::invalid_argument);
  EXPECT_THROW(e.add("b", {1, 2, 3}), std::invalid_argument);
}

}  // namespace
}  // namespace sval
