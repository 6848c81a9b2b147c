#include "sval/pretext.hpp"

#include <cmath>
#include <string>

#include "sval/errors.hpp"
#include "sval/rng.hpp"

namespace sval {

MemoryBank::MemoryBank(std::size_t size, std::size_t dim, std::uint64_t seed)
    : size_(size), dim_(dim) {
  if (size == 0 || dim == 0) throw ValidationError("memory bank needs N >= 1 and d >= 1");
  std::vector<double> values(size * dim);
  Rng rng = derive_rng(seed, 0xba4c);
  for (std::size_t i = 0; i < size; ++i) {
    double* row = values.data() + i * dim;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        row[j] = standard_normal(rng);
        norm += row[j] * row[j];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (std::size_t j = 0; j < dim; ++j) row[j] /= norm;
  }
  entries_ = Tensor({size, dim}, std::move(values));
}

void MemoryBank::check_index(std::size_t index) const {
  if (index >= size_) {
    throw std::out_of_range("memory bank index " + std::to_string(index) +
                            " out of range for " + std::to_string(size_) + " rows");
  }
}

std::span<const double> MemoryBank::row(std::size_t index) const {
  check_index(index);
  return entries_.data().subspan(index * dim_, dim_);
}

void MemoryBank::update(std::size_t index, std::span<const double> fresh, double momentum) {
  check_index(index);
  if (fresh.size() != dim_) {
    throw DimensionError("memory update with " + std::to_string(fresh.size()) +
                         " values for a bank of dim " + std::to_string(dim_));
  }
  auto row = entries_.mutable_data().subspan(index * dim_, dim_);
  double norm = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) {
    row[j] = (1.0 - momentum) * row[j] + momentum * fresh[j];
    norm += row[j] * row[j];
  }
  norm = std::max(std::sqrt(norm), kNormFloor);
  for (double& v : row) v /= norm;
}

void MemoryBank::set_row(std::size_t index, std::span<const double> values) {
  check_index(index);
  if (values.size() != dim_) throw DimensionError("memory row has wrong dimension");
  auto row = entries_.mutable_data().subspan(index * dim_, dim_);
  std::copy(values.begin(), values.end(), row.begin());
}

std::vector<double> MemoryBank::values() const {
  return {entries_.data().begin(), entries_.data().end()};
}

void MemoryBank::assign(std::vector<double> values) {
  if (values.size() != size_ * dim_) throw DimensionError("memory bank size mismatch");
  std::copy(values.begin(), values.end(), entries_.mutable_data().begin());
}

void LossWeights::validate() const {
  if (rgb < 0.0 || slpd < 0.0 || td < 0.0) throw ValidationError("loss weights must be >= 0");
  if (rgb == 0.0 && slpd == 0.0 && td == 0.0) {
    throw ValidationError("at least one loss weight must be positive");
  }
}

Tensor histogram_kl(const Tensor& logits, std::span<const double> target) {
  if (logits.rank() != 1 || logits.numel() != target.size()) {
    throw DimensionError("histogram head produced " + shape_to_string(logits.shape()) +
                         " but target has " + std::to_string(target.size()) + " bins");
  }
  std::vector<double> log_target(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    log_target[i] = std::log(target[i] + kHistogramEpsilon);
  }
  Tensor log_p = log_softmax(logits);
  Tensor p = exp(log_p);
  Tensor log_h(Shape{target.size()}, std::move(log_target));
  return sum(p * (log_p - log_h));
}

Tensor rgb_histogram_loss(const Tensor& feature, const ColorHistogram& target,
                          const HeadSet& heads) {
  Tensor loss = histogram_kl(heads.red.forward(feature), target.channels[0]);
  loss = loss + histogram_kl(heads.green.forward(feature), target.channels[1]);
  return loss + histogram_kl(heads.blue.forward(feature), target.channels[2]);
}

Tensor contrastive_instance_loss(const Tensor& query, std::size_t index,
                                 const MemoryBank& bank, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (index >= bank.size()) {
    throw std::out_of_range("instance index " + std::to_string(index) +
                            " out of range for bank of " + std::to_string(bank.size()));
  }
  if (query.rank() != 1 || query.dim(0) != bank.dim()) {
    throw DimensionError("query " + shape_to_string(query.shape()) +
                         " does not match bank dim " + std::to_string(bank.dim()));
  }
  Tensor logits = scale(fully_connected(query, bank.entries(), Tensor{}), 1.0 / temperature);
  return scale(select(log_softmax(logits), index), -1.0);
}

Tensor gram_matrix(const Tensor& feature_map) {
  if (feature_map.rank() != 3) {
    throw DimensionError("gram matrix needs a [C,h,w] map, got " +
                         shape_to_string(feature_map.shape()));
  }
  const std::size_t c = feature_map.dim(0);
  const std::size_t hw = feature_map.dim(1) * feature_map.dim(2);
  Tensor flat = reshape(feature_map, {c, hw});
  return scale(matmul(flat, transpose(flat)), 1.0 / static_cast<double>(c * hw));
}

Tensor gram_texture(const Tensor& feature_map) {
  Tensor g = gram_matrix(feature_map);
  const std::size_t n = g.numel();
  return l2_normalize(reshape(g, {n}));
}

}  // namespace sval
