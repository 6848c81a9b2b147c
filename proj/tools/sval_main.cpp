#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sval/commands.hpp"
#include "sval/config.hpp"
#include "sval/errors.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string pretext;
  std::vector<std::string> settings;
};

sval::RunConfig build_config(const Overrides& o,
                             const std::vector<std::pair<std::string, std::string>>& extra) {
  sval::RunConfig config = o.config_path.empty() ? sval::RunConfig{}
                                                 : sval::load_config(o.config_path);
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sval::ValidationError("--set expects key=value: " + s);
    sval::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : extra) {
    if (!value.empty()) sval::apply_setting(config, key, value);
  }
  if (o.seed) sval::apply_setting(config, "run.seed", std::to_string(*o.seed));
  if (!o.pretext.empty()) config.train.pretext = sval::parse_pretext_list(o.pretext);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised visual representation training and outfit evaluation"};
  app.require_subcommand(1);

  Overrides o;
  app.add_option("--config", o.config_path, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Override run.seed");
  app.add_option("--pretext", o.pretext, "Pretext tasks, e.g. rgb,slpd,td or id");
  app.add_option("--set", o.settings, "Override any key: section.key=value");

  std::string manifest, checkpoint, log, resume, epochs, out, features, embeddings, protocols,
      grid;

  auto* train = app.add_subcommand("train", "Train an encoder");
  train->add_option("--manifest", manifest);
  train->add_option("--checkpoint", checkpoint);
  train->add_option("--log", log);
  train->add_option("--resume", resume);
  train->add_option("--epochs", epochs);

  auto* embed = app.add_subcommand("embed", "Write one embedding per manifest item");
  embed->add_option("--manifest", manifest);
  embed->add_option("--checkpoint", checkpoint);
  embed->add_option("--features", features, "trunk or histogram");
  embed->add_option("--out", out);

  auto* eval = app.add_subcommand("eval", "Score embeddings on the manifest's questions");
  eval->add_option("--manifest", manifest);
  eval->add_option("--embeddings", embeddings);
  eval->add_option("--protocols", protocols, "compat,fitb,recall,knn");
  eval->add_option("--out", out, "Report path (stdout when omitted)");

  auto* synth = app.add_subcommand("synth", "Generate a planted-palette dataset");
  synth->add_option("--out", out, "Output directory");

  auto* ablate = app.add_subcommand("ablate", "Patch-ratio sweep");
  ablate->add_option("--manifest", manifest);
  ablate->add_option("--grid", grid, "lo:hi,lo:hi,...");
  ablate->add_option("--epochs", epochs);
  ablate->add_option("--out", out, "TSV table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sval::kExitValidation;
  }

  return sval::run_guarded(
      [&] {
        if (train->parsed()) {
          sval::cmd_train(build_config(o, {{"data.manifest", manifest},
                                           {"train.checkpoint", checkpoint},
                                           {"train.log", log},
                                           {"train.resume", resume},
                                           {"train.epochs", epochs}}));
        } else if (embed->parsed()) {
          sval::cmd_embed(build_config(o, {{"data.manifest", manifest},
                                           {"embed.checkpoint", checkpoint},
                                           {"embed.features", features},
                                           {"embed.output", out}}));
        } else if (eval->parsed()) {
          sval::cmd_eval(build_config(o, {{"data.manifest", manifest},
                                          {"eval.embeddings", embeddings},
                                          {"eval.protocols", protocols},
                                          {"eval.report", out}}),
                         std::cout);
        } else if (synth->parsed()) {
          const auto ds = sval::cmd_synth(build_config(o, {{"synth.output_dir", out}}));
          std::cout << "items=" << ds.manifest.items.size()
                    << " outfits=" << ds.manifest.outfits.size()
                    << " fitb=" << ds.manifest.fitb.size()
                    << " compat=" << ds.manifest.compat.size()
                    << " retrieval=" << ds.manifest.retrieval.size() << '\n';
        } else if (ablate->parsed()) {
          const auto rows = sval::cmd_ablate(build_config(o, {{"data.manifest", manifest},
                                                               {"ablate.grid", grid},
                                                               {"ablate.epochs", epochs},
                                                               {"ablate.output", out}}));
          sval::write_ablation_table(std::cout, rows);
        }
      },
      std::cerr);
}
