#include "sval/trainer.hpp"

#include <cmath>
#include <numeric>

#include "sval/errors.hpp"
#include "sval/rng.hpp"

namespace sval {
namespace {

enum StreamTag : std::uint64_t {
  kPatchStream = 1,
  kAugmentStream = 2,
  kShuffleStream = 3,
};

std::vector<double> copy_values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

NamedTensor scalar_entry(const std::string& name, double v) {
  return {name, Shape{1}, {v}};
}

}  // namespace

void PretextSelection::validate() const {
  if (id_baseline && (rgb || slpd || td)) {
    throw ValidationError("the id_baseline pretext cannot be combined with rgb/slpd/td");
  }
  if (!id_baseline && !rgb && !slpd && !td) {
    throw ValidationError("no pretext task selected");
  }
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(adam.learning_rate >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (momentum < 0.0 || momentum > 1.0) throw ValidationError("momentum must lie in [0,1]");
  weights.validate();
  patch.validate();
  pretext.validate();
  id_augment.validate();
}

TrainingImage prepare_training_image(ImageTensor original, const EncoderConfig& encoder,
                                     bool exclude_background) {
  TrainingImage out;
  out.histogram = compute_histogram(original, encoder.n_bins, exclude_background);
  out.input = resize_bilinear(original, encoder.input_side);
  out.original = std::move(original);
  return out;
}

Trainer::Trainer(Model& model, std::vector<TrainingImage> images, TrainingConfig config)
    : model_(model),
      images_(std::move(images)),
      config_(std::move(config)),
      optimizer_(model.parameters(), config_.adam) {
  config_.validate();
  if (images_.empty()) throw ValidationError("training set is empty");
  const EncoderConfig& enc = model_.config();
  slpd_bank_ = MemoryBank(images_.size(), static_cast<std::size_t>(enc.slpd_dim),
                          config_.seed ^ 0x5151ULL);
  const auto tc = static_cast<std::size_t>(enc.texture_channels);
  texture_bank_ = MemoryBank(images_.size(), tc * tc, config_.seed ^ 0x7d7dULL);
}

ImageLoss Trainer::sval_image_loss(std::size_t index, int epoch) const {
  if (index >= images_.size()) throw std::out_of_range("training index out of range");
  const TrainingImage& img = images_[index];
  const PretextSelection& sel = config_.pretext;
  const LossWeights& w = config_.weights;
  const EncoderConfig& enc = model_.config();
  const HeadSet& heads = model_.heads();

  ImageLoss out;
  std::vector<Tensor> terms;

  const bool need_patch = sel.rgb || sel.slpd;
  const bool need_whole = sel.rgb || sel.td;

  Tensor patch_feature;
  ColorHistogram patch_hist;
  if (need_patch) {
    Rng rng = derive_rng(config_.seed, static_cast<std::uint64_t>(epoch), index, kPatchStream);
    const Rect region =
        sample_patch_region(img.original.width(), img.original.height(), config_.patch, rng);
    ImageTensor patch = crop(img.original, region);
    if (sel.rgb) patch_hist = compute_histogram(patch, enc.n_bins, config_.exclude_background);
    patch_feature = model_.trunk(resize_bilinear(patch, enc.input_side)).feature;
  }
  TrunkOutput whole;
  if (need_whole) whole = model_.trunk(img.input);

  if (sel.rgb) {
    Tensor l = scale(rgb_histogram_loss(whole.feature, img.histogram, heads) +
                         rgb_histogram_loss(patch_feature, patch_hist, heads),
                     0.5);
    out.parts.rgb = l.item();
    terms.push_back(scale(l, w.rgb));
  }
  if (sel.slpd) {
    Tensor v = heads.slpd.forward(patch_feature);
    Tensor l = contrastive_instance_loss(v, index, slpd_bank_, config_.temperature);
    out.parts.slpd = l.item();
    out.slpd_row = copy_values(v);
    terms.push_back(scale(l, w.slpd));
  }
  if (sel.td) {
    Tensor t = gram_texture(heads.texture.forward(whole.feature_map));
    Tensor l = contrastive_instance_loss(t, index, texture_bank_, config_.temperature);
    out.parts.td = l.item();
    out.texture_row = copy_values(t);
    terms.push_back(scale(l, w.td));
  }

  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = out.total + terms[i];
  out.parts.total = out.total.item();
  return out;
}

ImageLoss Trainer::id_image_loss(std::size_t index, int epoch) const {
  if (index >= images_.size()) throw std::out_of_range("training index out of range");
  const TrainingImage& img = images_[index];
  Rng rng = derive_rng(config_.seed, static_cast<std::uint64_t>(epoch), index, kAugmentStream);
  AugmentConfig aug = config_.id_augment;
  aug.output_side = model_.config().input_side;
  ImageTensor view = augment(img.original, aug, rng);

  ImageLoss out;
  Tensor v = model_.heads().slpd.forward(model_.trunk(view).feature);
  out.total = contrastive_instance_loss(v, index, slpd_bank_, config_.temperature);
  out.parts.slpd = out.total.item();
  out.parts.total = out.parts.slpd;
  out.slpd_row = copy_values(v);
  return out;
}

LossBreakdown Trainer::accumulate_gradients(std::span<const std::size_t> batch, int epoch,
                                            std::vector<ImageLoss>* fresh) {
  if (batch.empty()) throw ValidationError("empty batch");
  optimizer_.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  for (std::size_t index : batch) {
    ImageLoss il = config_.pretext.id_baseline ? id_image_loss(index, epoch)
                                               : sval_image_loss(index, epoch);
    if (!std::isfinite(il.parts.total)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", image " +
                         std::to_string(index));
    }
    if (il.total.requires_grad()) scale(il.total, inv).backward();
    mean.rgb += il.parts.rgb * inv;
    mean.slpd += il.parts.slpd * inv;
    mean.td += il.parts.td * inv;
    mean.total += il.parts.total * inv;
    if (fresh) {
      il.total = Tensor{};
      fresh->push_back(std::move(il));
    }
  }
  return mean;
}

void Trainer::check_finite_gradients() const {
  for (const auto& [name, p] : model_.named_parameters()) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
    }
  }
}

LossBreakdown Trainer::apply_step(std::span<const std::size_t> batch, int epoch) {
  std::vector<ImageLoss> fresh;
  LossBreakdown mean = accumulate_gradients(batch, epoch, &fresh);
  check_finite_gradients();
  optimizer_.step();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!fresh[i].slpd_row.empty()) slpd_bank_.update(batch[i], fresh[i].slpd_row, config_.momentum);
    if (!fresh[i].texture_row.empty()) {
      texture_bank_.update(batch[i], fresh[i].texture_row, config_.momentum);
    }
  }
  return mean;
}

LossBreakdown Trainer::sval_step(std::span<const std::size_t> batch, int epoch) {
  if (config_.pretext.id_baseline) throw ContractError("trainer is configured for id_baseline");
  return apply_step(batch, epoch);
}

LossBreakdown Trainer::id_baseline_step(std::span<const std::size_t> batch, int epoch) {
  if (!config_.pretext.id_baseline) throw ContractError("trainer is configured for the pretext tasks");
  return apply_step(batch, epoch);
}

LossBreakdown Trainer::run_epoch(int epoch) {
  std::vector<std::size_t> order(images_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_rng(config_.seed, static_cast<std::uint64_t>(epoch), 0, kShuffleStream);
  shuffle(order.begin(), order.end(), rng);

  LossBreakdown total;
  const double n = static_cast<double>(order.size());
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    std::span<const std::size_t> batch(order.data() + start, end - start);
    const LossBreakdown b = apply_step(batch, epoch);
    const double share = static_cast<double>(batch.size()) / n;
    total.rgb += b.rgb * share;
    total.slpd += b.slpd * share;
    total.td += b.td * share;
    total.total += b.total * share;
  }
  epochs_completed_ = epoch + 1;
  return total;
}

std::vector<NamedTensor> Trainer::state() const {
  std::vector<NamedTensor> out = model_.state();
  const auto params = model_.named_parameters();
  const auto& moments = optimizer_.moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    std::vector<double> m = moments[i].first, v = moments[i].second;
    if (m.empty()) m.assign(p.numel(), 0.0);
    if (v.empty()) v.assign(p.numel(), 0.0);
    out.push_back({"optim.m." + name, p.shape(), std::move(m)});
    out.push_back({"optim.v." + name, p.shape(), std::move(v)});
  }
  out.push_back(scalar_entry("optim.step", static_cast<double>(optimizer_.step_count())));
  out.push_back({"bank.slpd", {slpd_bank_.size(), slpd_bank_.dim()}, slpd_bank_.values()});
  out.push_back({"bank.texture", {texture_bank_.size(), texture_bank_.dim()},
                 texture_bank_.values()});
  out.push_back(scalar_entry("train.epoch", static_cast<double>(epochs_completed_)));
  return out;
}

void Trainer::load_state(const std::map<std::string, NamedTensor>& tensors) {
  model_.load_state(tensors);
  auto need = [&](const std::string& name) -> const NamedTensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DimensionError("checkpoint lacks '" + name + "'");
    return it->second;
  };
  const auto params = model_.named_parameters();
  auto& moments = optimizer_.moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i].first;
    const NamedTensor& m = need("optim.m." + name);
    const NamedTensor& v = need("optim.v." + name);
    if (m.values.size() != params[i].second.numel() || v.values.size() != m.values.size()) {
      throw DimensionError("optimizer state for '" + name + "' has the wrong size");
    }
    moments[i].first = m.values;
    moments[i].second = v.values;
  }
  optimizer_.set_step_count(static_cast<std::int64_t>(need("optim.step").values.at(0)));
  const NamedTensor& bv = need("bank.slpd");
  const NamedTensor& bt = need("bank.texture");
  if (bv.shape != Shape{slpd_bank_.size(), slpd_bank_.dim()} ||
      bt.shape != Shape{texture_bank_.size(), texture_bank_.dim()}) {
    throw DimensionError("checkpoint memory banks do not match the training set");
  }
  slpd_bank_.assign(bv.values);
  texture_bank_.assign(bt.values);
  epochs_completed_ = static_cast<int>(need("train.epoch").values.at(0));
}

}  // namespace sval
