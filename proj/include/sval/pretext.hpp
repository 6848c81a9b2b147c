#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sval/image.hpp"
#include "sval/model.hpp"
#include "sval/tensor.hpp"

namespace sval {

/// Guard added to target histogram bins inside the log.
inline constexpr double kHistogramEpsilon = 1e-8;

/// Per-instance feature table: one unit-norm row per training image.
class MemoryBank {
 public:
  MemoryBank() = default;
  /// Rows drawn from a seeded spherical Gaussian and normalized.
  MemoryBank(std::size_t size, std::size_t dim, std::uint64_t seed);

  std::size_t size() const { return size_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t index) const;
  /// The whole table as an [N,d] constant tensor (no gradient).
  const Tensor& entries() const { return entries_; }

  /// row <- (1-momentum)*row + momentum*fresh, then renormalized.
  void update(std::size_t index, std::span<const double> fresh, double momentum);
  void set_row(std::size_t index, std::span<const double> values);

  std::vector<double> values() const;
  void assign(std::vector<double> values);

 private:
  void check_index(std::size_t index) const;

  std::size_t size_ = 0;
  std::size_t dim_ = 0;
  Tensor entries_;
};

struct LossWeights {
  double rgb = 1.0;
  double slpd = 1e-2;
  double td = 1e-5;

  void validate() const;
};

/// D_KL[p || h] for p = softmax(logits); h guarded by kHistogramEpsilon.
Tensor histogram_kl(const Tensor& logits, std::span<const double> target);

/// Sum of the three per-channel KL terms for one feature vector.
Tensor rgb_histogram_loss(const Tensor& feature, const ColorHistogram& target,
                          const HeadSet& heads);

/// -log softmax(bank . query / temperature)[index]; the bank is constant.
Tensor contrastive_instance_loss(const Tensor& query, std::size_t index,
                                 const MemoryBank& bank, double temperature);

/// C x C Gram matrix of a [C,h,w] map divided by C*h*w.
Tensor gram_matrix(const Tensor& feature_map);

/// Row-major flattened Gram matrix, unit-normalized.
Tensor gram_texture(const Tensor& feature_map);

}  // namespace sval
