#include "sval/probe.hpp"

#include <cmath>
#include <numeric>

#include "sval/errors.hpp"
#include "sval/optim.hpp"

namespace sval {
namespace {

// Keeps sqrt differentiable when two mapped vectors coincide.
constexpr double kDistanceFloor = 1e-12;

Tensor constant(std::span<const double> v) {
  return Tensor(Shape{v.size()}, std::vector<double>(v.begin(), v.end()));
}

Tensor distance(const Tensor& a, const Tensor& b) {
  Tensor d = a - b;
  return sqrt(add_scalar(sum(d * d), kDistanceFloor));
}

}  // namespace

LinearProbe LinearProbe::identity_extension(std::size_t input_dim, std::size_t output_dim) {
  std::vector<double> w(output_dim * input_dim, 0.0);
  for (std::size_t i = 0; i < std::min(input_dim, output_dim); ++i) w[i * input_dim + i] = 1.0;
  return LinearProbe(Tensor({output_dim, input_dim}, std::move(w), true));
}

LinearProbe::LinearProbe(Tensor weight) : weight_(std::move(weight)) {
  if (weight_.rank() != 2) throw DimensionError("probe weight must be 2-D");
}

Tensor LinearProbe::map(std::span<const double> feature) const {
  return l2_normalize(fully_connected(constant(feature), weight_, Tensor{}));
}

EmbeddingSet LinearProbe::apply(const EmbeddingSet& embeddings) const {
  EmbeddingSet out(output_dim());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    Tensor m = map(embeddings.vector(i));
    out.add(embeddings.id(i), {m.data().begin(), m.data().end()}, embeddings.category(i));
  }
  return out;
}

Tensor triplet_hinge(const LinearProbe& probe, std::span<const double> anchor,
                     std::span<const double> positive, std::span<const double> negative,
                     double margin) {
  Tensor a = probe.map(anchor), p = probe.map(positive), n = probe.map(negative);
  return relu(add_scalar(distance(a, p) - distance(a, n), margin));
}

std::vector<Triplet> sample_compatibility_triplets(
    const std::vector<std::vector<std::string>>& outfits, std::size_t count, Rng& rng) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < outfits.size(); ++i) {
    if (outfits[i].size() >= 2) usable.push_back(i);
  }
  if (usable.empty() || outfits.size() < 2) {
    throw ValidationError("triplet sampling needs two outfits, one with >= 2 items");
  }
  std::vector<Triplet> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t o = usable[uniform_index(rng, usable.size())];
    const auto& items = outfits[o];
    const std::size_t a = uniform_index(rng, items.size());
    std::size_t p = uniform_index(rng, items.size() - 1);
    if (p >= a) ++p;
    std::size_t other = uniform_index(rng, outfits.size() - 1);
    if (other >= o) ++other;
    if (outfits[other].empty()) continue;
    const auto& neg = outfits[other];
    out.push_back({items[a], items[p], neg[uniform_index(rng, neg.size())]});
  }
  return out;
}

ProbeTraining train_linear_probe(const EmbeddingSet& frozen, const std::vector<Triplet>& triplets,
                                 const ProbeConfig& config) {
  if (triplets.empty()) throw ValidationError("linear probe needs at least one triplet");
  if (config.batch_size == 0) throw ValidationError("probe batch size must be >= 1");
  LinearProbe probe = LinearProbe::identity_extension(frozen.dim(), config.output_dim);
  {
    Rng rng = derive_rng(config.seed, 0x940be);
    for (double& w : probe.weight().mutable_data()) w += 0.01 * standard_normal(rng);
  }
  Adam adam({probe.weight()}, AdamConfig{.learning_rate = config.learning_rate});
  ProbeTraining result{probe, {}};

  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = derive_rng(config.seed, static_cast<std::uint64_t>(epoch), 0x940be);
    shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      adam.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const Triplet& t = triplets[order[i]];
        Tensor loss = triplet_hinge(probe, frozen.vector(t.anchor), frozen.vector(t.positive),
                                    frozen.vector(t.negative), config.margin);
        epoch_loss += loss.item();
        if (loss.requires_grad()) scale(loss, inv).backward();
      }
      adam.step();
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(triplets.size()));
  }
  result.probe = probe;
  return result;
}

ProbeReport evaluate_probe(const LinearProbe& probe, const EmbeddingSet& embeddings,
                           const std::vector<FitbQuestion>& fitb,
                           const std::vector<CompatibilityQuestion>& compat) {
  const EmbeddingSet mapped = probe.apply(embeddings);
  ProbeReport report;
  if (!fitb.empty()) report.fitb_accuracy = fitb_accuracy(fitb, mapped).accuracy;
  if (!compat.empty()) {
    const CompatibilityReport c = compatibility_metrics(compat, mapped);
    report.compat_auc = c.auc;
    report.compat_ap = c.average_precision;
  }
  return report;
}

}  // namespace sval
