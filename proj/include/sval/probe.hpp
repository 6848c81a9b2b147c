#pragma once

// Frozen-feature linear protocol: a single linear map trained with a triplet
// hinge on compatibility labels, then evaluated with the usual metrics on the
// mapped embeddings.

#include <cstdint>
#include <string>
#include <vector>

#include "sval/metrics.hpp"
#include "sval/rng.hpp"
#include "sval/tensor.hpp"

namespace sval {

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
};

struct ProbeConfig {
  std::size_t output_dim = 64;
  double margin = 0.2;
  int epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

class LinearProbe {
 public:
  /// Identity in the leading block, zeros elsewhere.
  static LinearProbe identity_extension(std::size_t input_dim, std::size_t output_dim);

  explicit LinearProbe(Tensor weight);

  const Tensor& weight() const { return weight_; }
  Tensor& weight() { return weight_; }
  std::size_t input_dim() const { return weight_.dim(1); }
  std::size_t output_dim() const { return weight_.dim(0); }

  /// Unit-normalized W x.
  Tensor map(std::span<const double> feature) const;
  EmbeddingSet apply(const EmbeddingSet& embeddings) const;

 private:
  Tensor weight_;
};

/// max(0, d(a,p) - d(a,n) + margin), d the Euclidean distance between mapped
/// unit vectors.
Tensor triplet_hinge(const LinearProbe& probe, std::span<const double> anchor,
                     std::span<const double> positive, std::span<const double> negative,
                     double margin);

/// Anchor and positive from one outfit, negative from a different outfit.
std::vector<Triplet> sample_compatibility_triplets(
    const std::vector<std::vector<std::string>>& outfits, std::size_t count, Rng& rng);

struct ProbeTraining {
  LinearProbe probe;
  std::vector<double> epoch_losses;
};

ProbeTraining train_linear_probe(const EmbeddingSet& frozen, const std::vector<Triplet>& triplets,
                                 const ProbeConfig& config);

struct ProbeReport {
  double fitb_accuracy = 0.0;
  double compat_auc = 0.0;
  double compat_ap = 0.0;
};

ProbeReport evaluate_probe(const LinearProbe& probe, const EmbeddingSet& embeddings,
                           const std::vector<FitbQuestion>& fitb,
                           const std::vector<CompatibilityQuestion>& compat);

}  // namespace sval
