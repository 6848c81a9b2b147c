#include "sval/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace sval {

ManifestError::ManifestError(const std::string& source, std::size_t line,
                             const std::string& message)
    : ValidationError(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

void DatasetManifest::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!index_.emplace(items[i].id, i).second) {
      throw ValidationError("duplicate item id '" + items[i].id + "'");
    }
  }
}

const ItemRecord& DatasetManifest::item(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown item id '" + id + "'");
  return items[it->second];
}

std::filesystem::path DatasetManifest::image_path(const ItemRecord& item) const {
  std::filesystem::path p(item.path);
  return p.is_absolute() ? p : base_dir / p;
}

void DatasetManifest::validate() const {
  if (index_.size() != items.size()) {
    throw ValidationError("manifest index is stale; call reindex()");
  }
  auto require = [&](const std::string& id, const std::string& where) {
    if (!has_item(id)) {
      throw ValidationError("dangling reference to item '" + id + "' in " + where);
    }
  };
  std::set<std::string> outfit_ids;
  for (const OutfitRecord& o : outfits) {
    if (!outfit_ids.insert(o.id).second) throw ValidationError("duplicate outfit id '" + o.id + "'");
    if (o.items.empty()) throw ValidationError("outfit '" + o.id + "' has no items");
    for (const std::string& id : o.items) require(id, "outfit '" + o.id + "'");
  }
  for (std::size_t q = 0; q < compat.size(); ++q) {
    const auto& c = compat[q];
    const std::string where = "compatibility question " + std::to_string(q);
    if (c.outfit.size() < 2) throw ValidationError(where + " has fewer than 2 items");
    std::set<std::string> seen;
    for (const std::string& id : c.outfit) {
      require(id, where);
      if (!seen.insert(id).second) throw ValidationError(where + " repeats item '" + id + "'");
    }
  }
  for (std::size_t q = 0; q < fitb.size(); ++q) {
    const auto& f = fitb[q];
    const std::string where = "FITB question " + std::to_string(q);
    if (f.answer < 0 || f.answer > 3) throw ValidationError(where + " has answer index out of range");
    if (f.partial.empty()) throw ValidationError(where + " has an empty partial outfit");
    for (const std::string& id : f.partial) require(id, where);
    std::set<std::string> seen;
    for (const std::string& id : f.candidates) {
      require(id, where);
      if (!seen.insert(id).second) throw ValidationError(where + " repeats candidate '" + id + "'");
    }
  }
  std::set<std::string> queries;
  for (const RetrievalRecord& r : retrieval) {
    require(r.query, "retrieval query");
    if (!queries.insert(r.query).second) {
      throw ValidationError("duplicate retrieval query '" + r.query + "'");
    }
    if (r.truths.empty()) throw ValidationError("retrieval query '" + r.query + "' has no truth");
    for (const std::string& id : r.truths) require(id, "retrieval query '" + r.query + "'");
  }
}

std::vector<std::string> DatasetManifest::training_item_ids() const {
  std::vector<std::string> out;
  if (outfits.empty()) {
    for (const ItemRecord& it : items) out.push_back(it.id);
    return out;
  }
  std::set<std::string> seen;
  for (const OutfitRecord& o : outfits) {
    for (const std::string& id : o.items) {
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> DatasetManifest::outfit_item_lists() const {
  std::vector<std::vector<std::string>> out;
  for (const OutfitRecord& o : outfits) out.push_back(o.items);
  return out;
}

std::vector<std::string> DatasetManifest::retrieval_queries() const {
  std::vector<std::string> out;
  for (const RetrievalRecord& r : retrieval) out.push_back(r.query);
  return out;
}

std::vector<std::string> DatasetManifest::retrieval_gallery() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const RetrievalRecord& r : retrieval) {
    for (const std::string& id : r.truths) {
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

std::map<std::string, std::vector<std::string>> DatasetManifest::retrieval_truth() const {
  std::map<std::string, std::vector<std::string>> out;
  for (const RetrievalRecord& r : retrieval) out[r.query] = r.truths;
  return out;
}

std::vector<std::string> DatasetManifest::question_item_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& id) {
    if (seen.insert(id).second) out.push_back(id);
  };
  for (const auto& c : compat) std::for_each(c.outfit.begin(), c.outfit.end(), add);
  for (const auto& f : fitb) {
    std::for_each(f.partial.begin(), f.partial.end(), add);
    std::for_each(f.candidates.begin(), f.candidates.end(), add);
  }
  for (const auto& r : retrieval) {
    add(r.query);
    std::for_each(r.truths.begin(), r.truths.end(), add);
  }
  return out;
}

bool DatasetManifest::same_structure(const DatasetManifest& other) const {
  auto compat_eq = [](const CompatibilityQuestion& a, const CompatibilityQuestion& b) {
    return a.outfit == b.outfit && a.compatible == b.compatible;
  };
  auto fitb_eq = [](const FitbQuestion& a, const FitbQuestion& b) {
    return a.partial == b.partial && a.candidates == b.candidates && a.answer == b.answer;
  };
  return items == other.items && outfits == other.outfits &&
         std::equal(compat.begin(), compat.end(), other.compat.begin(), other.compat.end(),
                    compat_eq) &&
         std::equal(fitb.begin(), fitb.end(), other.fitb.begin(), other.fitb.end(), fitb_eq) &&
         retrieval == other.retrieval;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) { throw ManifestError(source_name, line_no, msg); };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string& kind = tokens[0];
    if (kind == "ITEM") {
      if (tokens.size() < 3 || tokens.size() > 4) fail("ITEM expects <id> <path> [category]");
      ItemRecord item{tokens[1], tokens[2], std::nullopt};
      if (tokens.size() == 4) item.category = tokens[3];
      m.items.push_back(std::move(item));
    } else if (kind == "OUTFIT") {
      if (tokens.size() < 3) fail("OUTFIT expects <id> <item_id>+");
      m.outfits.push_back({tokens[1], {tokens.begin() + 2, tokens.end()}});
    } else if (kind == "COMPAT") {
      if (tokens.size() < 4) fail("COMPAT expects <+|-> and at least two item ids");
      if (tokens[1] != "+" && tokens[1] != "-") fail("COMPAT label must be '+' or '-'");
      m.compat.push_back({{tokens.begin() + 2, tokens.end()}, tokens[1] == "+"});
    } else if (kind == "FITB") {
      // Re-split the raw text on '|' so the three groups stay distinct.
      const std::string body = line.substr(line.find("FITB") + 4);
      std::vector<std::string> groups;
      std::size_t start = 0;
      for (std::size_t bar; (bar = body.find('|', start)) != std::string::npos; start = bar + 1) {
        groups.push_back(body.substr(start, bar - start));
      }
      groups.push_back(body.substr(start));
      if (groups.size() != 3) fail("FITB expects '<answer> | <partial ids> | <4 candidates>'");
      const auto answer = split_ws(groups[0]);
      const auto partial = split_ws(groups[1]);
      const auto candidates = split_ws(groups[2]);
      if (answer.size() != 1) fail("FITB answer must be a single index");
      if (candidates.size() != 4) fail("FITB needs exactly 4 candidates");
      if (partial.empty()) fail("FITB partial outfit is empty");
      FitbQuestion q;
      try {
        std::size_t used = 0;
        q.answer = std::stoi(answer[0], &used);
        if (used != answer[0].size()) fail("FITB answer is not an integer");
      } catch (const std::logic_error&) {
        fail("FITB answer is not an integer");
      }
      if (q.answer < 0 || q.answer > 3) fail("FITB answer index must be 0..3");
      q.partial = partial;
      std::copy(candidates.begin(), candidates.end(), q.candidates.begin());
      m.fitb.push_back(std::move(q));
    } else if (kind == "RETR") {
      if (tokens.size() < 3) fail("RETR expects <query_id> <truth_id>+");
      m.retrieval.push_back({tokens[1], {tokens.begin() + 2, tokens.end()}});
    } else {
      fail("unknown record type '" + kind + "'");
    }
  }
  m.reindex();
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << "# sval dataset manifest\n";
  for (const ItemRecord& it : m.items) {
    out << "ITEM " << it.id << ' ' << it.path;
    if (it.category) out << ' ' << *it.category;
    out << '\n';
  }
  for (const OutfitRecord& o : m.outfits) {
    out << "OUTFIT " << o.id;
    for (const auto& id : o.items) out << ' ' << id;
    out << '\n';
  }
  for (const auto& c : m.compat) {
    out << "COMPAT " << (c.compatible ? '+' : '-');
    for (const auto& id : c.outfit) out << ' ' << id;
    out << '\n';
  }
  for (const auto& f : m.fitb) {
    out << "FITB " << f.answer << " |";
    for (const auto& id : f.partial) out << ' ' << id;
    out << " |";
    for (const auto& id : f.candidates) out << ' ' << id;
    out << '\n';
  }
  for (const auto& r : m.retrieval) {
    out << "RETR " << r.query;
    for (const auto& id : r.truths) out << ' ' << id;
    out << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  write_manifest(out, manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sval
