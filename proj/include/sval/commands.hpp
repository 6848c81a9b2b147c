#pragma once

// Command implementations behind the `sval` executable. Each command reads
// only its inputs and writes only the paths named in the config, so equal
// (seed, inputs) give byte-identical outputs.

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sval/config.hpp"
#include "sval/manifest.hpp"
#include "sval/metrics.hpp"
#include "sval/model.hpp"
#include "sval/synthetic.hpp"
#include "sval/trainer.hpp"

namespace sval {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitIo = 3,
  kExitNumeric = 4,
};

/// Runs `body`, reporting any exception on `err` and mapping it to an exit
/// code: validation and dimension errors 2, I/O 3, non-finite values 4.
int run_guarded(const std::function<void()>& body, std::ostream& err);

/// Decodes one item's image; IoError messages name the item id.
ImageTensor load_item_image(const DatasetManifest& manifest, const std::string& id);

std::vector<TrainingImage> load_training_images(const DatasetManifest& manifest,
                                                const EncoderConfig& encoder,
                                                bool exclude_background);

inline constexpr const char* kTrainingLogHeader = "# epoch\tL_rgb\tL_SLPD\tL_TD\ttotal";
std::string format_log_row(int epoch, const LossBreakdown& losses);

struct TrainOutcome {
  int first_epoch = 0;  // nonzero when resumed
  std::vector<LossBreakdown> epochs;
};

/// Trains on the manifest's training items. Writes `config.log` (one row per
/// epoch, appended on resume) and `config.checkpoint` at the end and every
/// `save_interval` epochs. A non-finite loss or gradient dumps the trainer
/// state to `<checkpoint>.nan` and rethrows NumericError.
TrainOutcome cmd_train(const RunConfig& config);

/// Trains in memory without touching the filesystem beyond reading images.
TrainOutcome train_model(const RunConfig& config, const DatasetManifest& manifest, Model& model);

/// One vector per manifest item: trunk features of the resized image, or the
/// flattened color histogram when `features == "histogram"`.
EmbeddingSet compute_embeddings(const DatasetManifest& manifest, const Model* model,
                                const std::string& features, int n_bins,
                                bool exclude_background);

void cmd_embed(const RunConfig& config);

/// Ordered `key=value` metrics.
struct MetricsReport {
  std::vector<std::pair<std::string, double>> values;

  double at(const std::string& key) const;
  void write(std::ostream& out) const;
};

/// Runs the requested protocols. kNN uses every categorized item that is not
/// a retrieval query. Missing question ids raise ValidationError listing them.
MetricsReport evaluate_embeddings(const EmbeddingSet& embeddings,
                                  const DatasetManifest& manifest, const RunConfig& config);

/// Writes the report to `config.report`, or to `out` when no path is set.
MetricsReport cmd_eval(const RunConfig& config, std::ostream& out);

SyntheticDataset cmd_synth(const RunConfig& config);

struct AblationRow {
  PatchSpec ratio;
  double fitb = 0.0;
  double knn = 0.0;
};

/// Trains one model per grid cell and writes a TSV table with columns
/// ratio_lo, ratio_hi, fitb, knn.
std::vector<AblationRow> cmd_ablate(const RunConfig& config);
void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace sval
