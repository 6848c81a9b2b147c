#include "sval/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sval/errors.hpp"

namespace sval {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ValidationError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ValidationError("'" + key + "' expects a boolean, got '" + v + "'");
}

PatchSpec to_range(const std::string& key, const std::string& v) {
  const auto parts = split_list(v, ':');
  if (parts.size() != 2) throw ValidationError("'" + key + "' expects lo:hi, got '" + v + "'");
  return {to_double(key, parts[0]), to_double(key, parts[1])};
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path = [](std::filesystem::path RunConfig::*field) {
      return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
    };
    t["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = to_int<std::uint64_t>(k, v);
    };
    t["data.manifest"] = path(&RunConfig::manifest);

    t["model.widths"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.widths.clear();
      for (const auto& w : split_list(v)) c.model.widths.push_back(to_int<int>(k, w));
    };
    auto model_int = [](int EncoderConfig::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.model.*field = to_int<int>(k, v);
      };
    };
    t["model.kernel_size"] = model_int(&EncoderConfig::kernel_size);
    t["model.feature_dim"] = model_int(&EncoderConfig::feature_dim);
    t["model.input_side"] = model_int(&EncoderConfig::input_side);
    t["model.n_bins"] = model_int(&EncoderConfig::n_bins);
    t["model.slpd_dim"] = model_int(&EncoderConfig::slpd_dim);
    t["model.texture_channels"] = model_int(&EncoderConfig::texture_channels);

    auto num = [](auto field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        field(c) = to_double(k, v);
      };
    };
    t["train.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.epochs = to_int<int>(k, v);
    };
    t["train.batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.batch_size = to_int<std::size_t>(k, v);
    };
    t["train.learning_rate"] = num([](RunConfig& c) -> double& { return c.train.adam.learning_rate; });
    t["train.temperature"] = num([](RunConfig& c) -> double& { return c.train.temperature; });
    t["train.momentum"] = num([](RunConfig& c) -> double& { return c.train.momentum; });
    t["train.lambda_rgb"] = num([](RunConfig& c) -> double& { return c.train.weights.rgb; });
    t["train.lambda_slpd"] = num([](RunConfig& c) -> double& { return c.train.weights.slpd; });
    t["train.lambda_td"] = num([](RunConfig& c) -> double& { return c.train.weights.td; });
    t["train.patch_ratio_lo"] = num([](RunConfig& c) -> double& { return c.train.patch.ratio_lo; });
    t["train.patch_ratio_hi"] = num([](RunConfig& c) -> double& { return c.train.patch.ratio_hi; });
    t["train.exclude_background"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.exclude_background = to_bool(k, v);
    };
    t["train.color_distortion"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.id_augment.color_distortion = to_bool(k, v);
    };
    t["train.checkpoint"] = path(&RunConfig::checkpoint);
    t["train.log"] = path(&RunConfig::log);
    t["train.resume"] = path(&RunConfig::resume);
    t["train.save_interval"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.save_interval = to_int<int>(k, v);
    };

    auto flag = [](bool PretextSelection::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.train.pretext.*field = to_bool(k, v);
      };
    };
    t["pretext.rgb"] = flag(&PretextSelection::rgb);
    t["pretext.slpd"] = flag(&PretextSelection::slpd);
    t["pretext.td"] = flag(&PretextSelection::td);
    t["pretext.id_baseline"] = flag(&PretextSelection::id_baseline);

    t["embed.checkpoint"] = path(&RunConfig::embed_checkpoint);
    t["embed.features"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.embed_features = v;
    };
    t["embed.output"] = path(&RunConfig::embeddings);

    t["eval.embeddings"] = path(&RunConfig::embeddings);
    t["eval.report"] = path(&RunConfig::report);
    t["eval.protocols"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.protocols = {false, false, false, false};
      for (const auto& p : split_list(v)) {
        if (p == "compat") c.protocols.compat = true;
        else if (p == "fitb") c.protocols.fitb = true;
        else if (p == "recall") c.protocols.recall = true;
        else if (p == "knn") c.protocols.knn = true;
        else throw ValidationError("'" + k + "': unknown protocol '" + p + "'");
      }
    };
    t["eval.recall_k"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.recall_ks.clear();
      for (const auto& x : split_list(v)) c.recall_ks.push_back(to_int<int>(k, x));
    };
    t["eval.knn_k"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.knn_k = to_int<int>(k, v);
    };
    t["eval.knn_vote"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "weighted") c.knn_vote = KnnVote::kWeighted;
      else if (v == "majority") c.knn_vote = KnnVote::kMajority;
      else throw ValidationError("'" + k + "' expects weighted or majority");
    };

    t["synth.output_dir"] = path(&RunConfig::synth_dir);
    auto synth_int = [](int SyntheticSpec::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.synth.*field = to_int<int>(k, v);
      };
    };
    t["synth.num_palettes"] = synth_int(&SyntheticSpec::num_palettes);
    t["synth.items_per_outfit"] = synth_int(&SyntheticSpec::items_per_outfit);
    t["synth.outfits"] = synth_int(&SyntheticSpec::outfits);
    t["synth.image_side"] = synth_int(&SyntheticSpec::image_side);
    t["synth.fitb_per_outfit"] = synth_int(&SyntheticSpec::fitb_per_outfit);
    t["synth.noise_sigma"] = num([](RunConfig& c) -> double& { return c.synth.noise_sigma; });
    t["synth.test_fraction"] = num([](RunConfig& c) -> double& { return c.synth.test_fraction; });
    t["synth.max_palette_similarity"] =
        num([](RunConfig& c) -> double& { return c.synth.max_palette_similarity; });
    t["synth.disjoint"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.synth.disjoint = to_bool(k, v);
    };
    t["synth.patterns"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.synth.patterns.clear();
      for (const auto& p : split_list(v)) c.synth.patterns.push_back(parse_pattern(p));
    };
    t["synth.shapes"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.synth.shapes.clear();
      for (const auto& s : split_list(v)) c.synth.shapes.push_back(parse_shape(s));
    };

    t["ablate.grid"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.ablate_grid.clear();
      for (const auto& cell : split_list(v)) c.ablate_grid.push_back(to_range(k, cell));
    };
    t["ablate.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.ablate_epochs = to_int<int>(k, v);
    };
    t["ablate.output"] = path(&RunConfig::ablate_table);
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (train.seed != seed) throw ValidationError("train seed does not match run seed");
  if (save_interval < 0) throw ValidationError("save_interval must be >= 0");
  if (embed_features != "trunk" && embed_features != "histogram") {
    throw ValidationError("embed.features must be trunk or histogram");
  }
  for (int k : recall_ks) {
    if (k < 1) throw ValidationError("recall_k values must be >= 1");
  }
  if (knn_k < 1) throw ValidationError("knn_k must be >= 1");
  synth.validate();
  if (ablate_grid.empty()) throw ValidationError("ablation grid is empty");
  for (const PatchSpec& p : ablate_grid) p.validate();
  if (ablate_epochs < 0) throw ValidationError("ablate.epochs must be >= 0");
}

void apply_setting(RunConfig& config, const std::string& raw_key, const std::string& value) {
  const std::string key = raw_key.find('.') == std::string::npos ? "run." + raw_key : raw_key;
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ValidationError("unknown config key '" + key + "'");
  it->second(config, key, trim(value));
  config.train.seed = config.seed;
}

PretextSelection parse_pretext_list(const std::string& list) {
  PretextSelection sel{false, false, false, false};
  for (const auto& p : split_list(list)) {
    if (p == "rgb") sel.rgb = true;
    else if (p == "slpd") sel.slpd = true;
    else if (p == "td") sel.td = true;
    else if (p == "id" || p == "id_baseline") sel.id_baseline = true;
    else throw ValidationError("unknown pretext task '" + p + "'");
  }
  sel.validate();
  return sel;
}

RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError("config parse error at line " + std::to_string(e.line()) + ": " +
                          e.message());
  }
  RunConfig config;
  for (const auto& [name, node] : tree) {
    static const std::vector<std::string> sections{"run",   "data", "model", "train", "pretext",
                                                   "embed", "eval", "synth", "ablate"};
    const bool is_section = std::find(sections.begin(), sections.end(), name) != sections.end();
    if (node.empty() && is_section && node.data().empty()) continue;
    if (node.empty()) {
      apply_setting(config, name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ValidationError("nested key '" + name + "." + key + "'");
      apply_setting(config, name + "." + key, leaf.data());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  return parse_config(in);
}

}  // namespace sval
