#include "sval/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "sval/checkpoint.hpp"
#include "sval/errors.hpp"

namespace sval {
namespace {

std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void require_path(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw ValidationError(what + " path is not set");
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

ImageTensor load_item_image(const DatasetManifest& manifest, const std::string& id) {
  const ItemRecord& item = manifest.item(id);
  try {
    return load_image(manifest.image_path(item));
  } catch (const IoError& e) {
    throw IoError("item '" + id + "': " + e.what());
  }
}

std::vector<TrainingImage> load_training_images(const DatasetManifest& manifest,
                                                const EncoderConfig& encoder,
                                                bool exclude_background) {
  std::vector<TrainingImage> out;
  for (const std::string& id : manifest.training_item_ids()) {
    out.push_back(prepare_training_image(load_item_image(manifest, id), encoder,
                                         exclude_background));
  }
  return out;
}

std::string format_log_row(int epoch, const LossBreakdown& l) {
  return std::to_string(epoch) + '\t' + format_double(l.rgb) + '\t' + format_double(l.slpd) +
         '\t' + format_double(l.td) + '\t' + format_double(l.total);
}

namespace {

TrainOutcome run_training(const RunConfig& config, const DatasetManifest& manifest, Model& model,
                          bool write_files) {
  Trainer trainer(model, load_training_images(manifest, config.model,
                                              config.train.exclude_background),
                  config.train);
  TrainOutcome outcome;
  if (!config.resume.empty()) {
    trainer.load_state(index_by_name(load_checkpoint(config.resume)));
    outcome.first_epoch = trainer.epochs_completed();
  }

  std::ofstream log;
  if (write_files) {
    const bool append = !config.resume.empty() && std::filesystem::exists(config.log);
    log = open_output(config.log, append ? std::ios::app : std::ios::trunc);
    if (!append) log << kTrainingLogHeader << '\n';
    log.flush();
  }

  for (int epoch = outcome.first_epoch; epoch < config.train.epochs; ++epoch) {
    LossBreakdown losses;
    try {
      losses = trainer.run_epoch(epoch);
    } catch (const NumericError&) {
      if (write_files) {
        save_checkpoint(config.checkpoint.string() + ".nan", trainer.state());
      }
      throw;
    }
    outcome.epochs.push_back(losses);
    if (write_files) {
      log << format_log_row(epoch + 1, losses) << '\n';
      log.flush();
      if (!log) throw IoError("write failed: " + config.log.string());
      if (config.save_interval > 0 && (epoch + 1) % config.save_interval == 0) {
        save_checkpoint(config.checkpoint, trainer.state());
      }
    }
  }
  if (write_files) save_checkpoint(config.checkpoint, trainer.state());
  return outcome;
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config) {
  config.validate();
  require_path(config.manifest, "data.manifest");
  require_path(config.checkpoint, "train.checkpoint");
  require_path(config.log, "train.log");
  const DatasetManifest manifest = load_manifest(config.manifest);
  Model model(config.model, config.seed);
  return run_training(config, manifest, model, true);
}

TrainOutcome train_model(const RunConfig& config, const DatasetManifest& manifest, Model& model) {
  config.validate();
  return run_training(config, manifest, model, false);
}

EmbeddingSet compute_embeddings(const DatasetManifest& manifest, const Model* model,
                                const std::string& features, int n_bins,
                                bool exclude_background) {
  const bool histogram = features == "histogram";
  if (!histogram && features != "trunk") {
    throw ValidationError("unknown feature type '" + features + "'");
  }
  if (!histogram && model == nullptr) throw ValidationError("trunk features need a model");
  const std::size_t dim = histogram ? static_cast<std::size_t>(3 * n_bins)
                                    : static_cast<std::size_t>(model->config().feature_dim);
  EmbeddingSet set(dim);
  for (const ItemRecord& item : manifest.items) {
    const ImageTensor image = load_item_image(manifest, item.id);
    std::vector<double> v;
    if (histogram) {
      v = compute_histogram(image, n_bins, exclude_background).flattened();
    } else {
      const Tensor f =
          model->extract_features(resize_bilinear(image, model->config().input_side));
      v.assign(f.data().begin(), f.data().end());
    }
    set.add(item.id, std::move(v), item.category);
  }
  return set;
}

void cmd_embed(const RunConfig& config) {
  config.validate();
  require_path(config.manifest, "data.manifest");
  require_path(config.embeddings, "embed.output");
  const DatasetManifest manifest = load_manifest(config.manifest);
  EmbeddingSet set;
  if (config.embed_features == "histogram") {
    set = compute_embeddings(manifest, nullptr, "histogram", config.model.n_bins,
                             config.train.exclude_background);
  } else {
    Model model(config.model, config.seed);
    if (!config.embed_checkpoint.empty()) {
      model.load_state(index_by_name(load_checkpoint(config.embed_checkpoint)));
    }
    set = compute_embeddings(manifest, &model, "trunk", config.model.n_bins,
                             config.train.exclude_background);
  }
  save_embeddings(config.embeddings, set);
}

double MetricsReport::at(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw std::out_of_range("metric '" + key + "' not in report");
}

void MetricsReport::write(std::ostream& out) const {
  for (const auto& [k, v] : values) out << k << '=' << format_double(v, "%.10g") << '\n';
}

MetricsReport evaluate_embeddings(const EmbeddingSet& embeddings,
                                  const DatasetManifest& manifest, const RunConfig& config) {
  const EvalProtocols& p = config.protocols;
  std::vector<std::string> needed;
  if (p.compat || p.fitb || p.recall) needed = manifest.question_item_ids();
  std::vector<std::string> missing;
  for (const std::string& id : needed) {
    if (!embeddings.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw ValidationError("embeddings lack " + std::to_string(missing.size()) +
                          " question item(s): " + list);
  }

  MetricsReport report;
  if (p.compat && !manifest.compat.empty()) {
    const CompatibilityReport c = compatibility_metrics(manifest.compat, embeddings);
    report.values.emplace_back("compat_auc", c.auc);
    report.values.emplace_back("compat_ap", c.average_precision);
  }
  if (p.fitb && !manifest.fitb.empty()) {
    report.values.emplace_back("fitb", fitb_accuracy(manifest.fitb, embeddings).accuracy);
  }
  if (p.recall && !manifest.retrieval.empty()) {
    const auto queries = manifest.retrieval_queries();
    const auto gallery = manifest.retrieval_gallery();
    const auto truth = manifest.retrieval_truth();
    for (int k : config.recall_ks) {
      const RecallReport r = recall_at_k(queries, gallery, truth, static_cast<std::size_t>(k),
                                         embeddings);
      report.values.emplace_back("recall@" + std::to_string(k), r.recall);
    }
  }
  if (p.knn) {
    std::set<std::string> queries;
    for (const auto& r : manifest.retrieval) queries.insert(r.query);
    std::vector<std::span<const double>> vectors;
    std::vector<std::string> labels;
    for (const ItemRecord& item : manifest.items) {
      if (!item.category || queries.count(item.id) || !embeddings.contains(item.id)) continue;
      vectors.push_back(embeddings.vector(item.id));
      labels.push_back(*item.category);
    }
    if (std::set<std::string>(labels.begin(), labels.end()).size() >= 2) {
      const KnnReport r = knn_category_accuracy(vectors, labels,
                                                static_cast<std::size_t>(config.knn_k),
                                                config.knn_vote);
      report.values.emplace_back("knn", r.accuracy);
    }
  }
  return report;
}

MetricsReport cmd_eval(const RunConfig& config, std::ostream& out) {
  config.validate();
  require_path(config.manifest, "data.manifest");
  require_path(config.embeddings, "eval.embeddings");
  const DatasetManifest manifest = load_manifest(config.manifest);
  const EmbeddingSet embeddings = load_embeddings(config.embeddings);
  const MetricsReport report = evaluate_embeddings(embeddings, manifest, config);
  if (config.report.empty()) {
    report.write(out);
  } else {
    std::ofstream file = open_output(config.report, std::ios::trunc);
    report.write(file);
    if (!file) throw IoError("write failed: " + config.report.string());
  }
  return report;
}

SyntheticDataset cmd_synth(const RunConfig& config) {
  config.validate();
  require_path(config.synth_dir, "synth.output_dir");
  return generate_synthetic(config.synth, config.seed, config.synth_dir);
}

void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "ratio_lo\tratio_hi\tfitb\tknn\n";
  for (const AblationRow& r : rows) {
    out << format_double(r.ratio.ratio_lo, "%g") << '\t' << format_double(r.ratio.ratio_hi, "%g")
        << '\t' << format_double(r.fitb, "%.10g") << '\t' << format_double(r.knn, "%.10g")
        << '\n';
  }
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config) {
  config.validate();
  require_path(config.manifest, "data.manifest");
  require_path(config.ablate_table, "ablate.output");
  const DatasetManifest manifest = load_manifest(config.manifest);
  RunConfig eval_config = config;
  eval_config.protocols = {false, true, false, true};

  std::vector<AblationRow> rows;
  for (const PatchSpec& cell : config.ablate_grid) {
    RunConfig cell_config = config;
    cell_config.resume.clear();
    cell_config.train.patch = cell;
    if (config.ablate_epochs > 0) cell_config.train.epochs = config.ablate_epochs;
    Model model(cell_config.model, cell_config.seed);
    train_model(cell_config, manifest, model);
    const EmbeddingSet set = compute_embeddings(manifest, &model, "trunk", config.model.n_bins,
                                                config.train.exclude_background);
    const MetricsReport report = evaluate_embeddings(set, manifest, eval_config);
    AblationRow row{cell, 0.0, 0.0};
    for (const auto& [k, v] : report.values) {
      if (k == "fitb") row.fitb = v;
      if (k == "knn") row.knn = v;
    }
    rows.push_back(row);
  }
  std::ofstream out = open_output(config.ablate_table, std::ios::trunc);
  write_ablation_table(out, rows);
  if (!out) throw IoError("write failed: " + config.ablate_table.string());
  return rows;
}

}  // namespace sval
