// Copyright 2026 The refgame Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "refgame/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "refgame/rng.h"

namespace refgame::data {
namespace {

namespace pt = boost::property_tree;

void AssignSplits(Dataset& ds, const SplitSizes& sizes, std::uint64_t seed) {
  std::vector<int> order(ds.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.Shuffle(order);
  auto begin = order.begin();
  const int counts[3] = {sizes.train, sizes.dev, sizes.test};
  for (int s = 0; s < 3; ++s) {
    ds.splits[s].assign(begin, begin + counts[s]);
    std::sort(ds.splits[s].begin(), ds.splits[s].end());
    begin += counts[s];
  }
}

std::string Join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

bool Serializable(const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of(",\t\n ") != std::string::npos) {
      return false;
    }
  }
  return true;
}

// ---- XML ingestion --------------------------------------------------------

struct RawConcept {
  std::string name;
  std::string category;
  std::set<std::string> attributes;
};

void CollectTokens(const pt::ptree& node, std::set<std::string>& out) {
  std::istringstream words(node.data());
  std::string w;
  while (words >> w) out.insert(w);
  for (const auto& [key, child] : node) {
    if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
    CollectTokens(child, out);
  }
}

void VisitConcepts(const pt::ptree& node, const std::string& category,
                   const std::string& where, std::vector<RawConcept>& out) {
  for (const auto& [key, child] : node) {
    if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
    if (key == "concept") {
      RawConcept c;
      auto name = child.get_optional<std::string>("<xmlattr>.name");
      if (!name || name->empty()) {
        throw DataError(where + ": <concept> element #" +
                        std::to_string(out.size() + 1) +
                        " has no name attribute");
      }
      c.name = *name;
      c.category =
          child.get<std::string>("<xmlattr>.category", category);
      CollectTokens(child, c.attributes);
      out.push_back(std::move(c));
    } else if (key == "category") {
      VisitConcepts(child,
                    child.get<std::string>("<xmlattr>.name", category), where,
                    out);
    } else {
      VisitConcepts(child, category, where, out);
    }
  }
}

std::vector<RawConcept> ParseConceptFile(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DataError("parse error in " + file.string() + " at line " +
                    std::to_string(e.line()) + ": " + e.message());
  }
  if (tree.empty()) throw DataError("parse error in " + file.string() +
                                    ": document has no root element");
  std::vector<RawConcept> concepts;
  for (const auto& [root_key, root] : tree) {
    if (root_key == "<xmlcomment>") continue;
    const std::string category =
        root.get<std::string>("<xmlattr>.category", file.stem().string());
    VisitConcepts(root, category, file.string() + " <" + root_key + ">",
                  concepts);
  }
  return concepts;
}

}  // namespace

const char* SplitName(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + name + "'");
}

bool Item::Has(int feature) const {
  return std::binary_search(features.begin(), features.end(), feature);
}

SplitSizes Dataset::sizes() const {
  return {static_cast<int>(splits[0].size()), static_cast<int>(splits[1].size()),
          static_cast<int>(splits[2].size())};
}

bool Dataset::has_categories() const {
  return !items.empty() &&
         std::all_of(items.begin(), items.end(),
                     [](const Item& it) { return it.category.has_value(); });
}

int Dataset::num_categories() const {
  int n = static_cast<int>(category_names.size());
  for (const Item& it : items) {
    if (it.category) n = std::max(n, *it.category + 1);
  }
  return n;
}

void Dataset::Validate() const {
  std::vector<int> seen(items.size(), 0);
  for (const auto& split : splits) {
    for (int pos : split) {
      if (pos < 0 || pos >= static_cast<int>(items.size())) {
        throw DataError("split references item position " +
                        std::to_string(pos) + " out of range");
      }
      if (seen[pos]++) {
        throw DataError("item " + std::to_string(items[pos].id) +
                        " appears in more than one split");
      }
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!seen[i]) {
      throw DataError("item " + std::to_string(items[i].id) +
                      " is in no split");
    }
  }
  std::set<int> ids;
  for (const Item& it : items) {
    if (!ids.insert(it.id).second) {
      throw DataError("duplicate item id " + std::to_string(it.id));
    }
    if (it.features.empty()) {
      throw DataError("item " + std::to_string(it.id) + " has no features");
    }
    if (!std::is_sorted(it.features.begin(), it.features.end()) ||
        std::adjacent_find(it.features.begin(), it.features.end()) !=
            it.features.end()) {
      throw DataError("item " + std::to_string(it.id) +
                      " features not strictly ascending");
    }
    if (it.features.front() < 0 || it.features.back() >= feature_dim) {
      throw DataError("item " + std::to_string(it.id) +
                      " has a feature outside [0, " +
                      std::to_string(feature_dim) + ")");
    }
    if (it.category && (*it.category < 0 ||
                        (!category_names.empty() &&
                         *it.category >= static_cast<int>(
                                             category_names.size())))) {
      throw DataError("item " + std::to_string(it.id) +
                      " has an invalid category");
    }
  }
  std::set<std::vector<int>> train_vectors;
  for (int pos : split(Split::kTrain)) train_vectors.insert(items[pos].features);
  for (int pos : split(Split::kTest)) {
    if (train_vectors.count(items[pos].features)) {
      throw DataError("test item " + std::to_string(items[pos].id) +
                      " duplicates a train feature vector");
    }
  }
}

std::vector<std::string> ShapesFeatureNames() {
  return {"red",     "blue",    "green",    "yellow",  "purple",
          "orange",  "black",   "white",    "gray",    "brown",
          "dotted",  "striped", "solid",    "dark",    "light",
          "checked", "hollow",  "shaded",   "glossy",  "matte",
          "circle",  "square",  "triangle", "star",    "hexagon",
          "pentagon", "diamond", "heart",   "cross",   "oval"};
}

Dataset GenerateShapes(std::uint64_t seed) {
  Dataset ds;
  ds.name = "shapes";
  ds.feature_dim = kShapesFeatures;
  ds.vocab_size = kShapesVocab;
  ds.seed = seed;
  ds.feature_names = ShapesFeatureNames();
  ds.items.reserve(1000);
  for (int a0 = 0; a0 < kShapesValues; ++a0) {
    for (int a1 = 0; a1 < kShapesValues; ++a1) {
      for (int a2 = 0; a2 < kShapesValues; ++a2) {
        Item it;
        it.id = 100 * a0 + 10 * a1 + a2;
        it.features = {a0, kShapesValues + a1, 2 * kShapesValues + a2};
        ds.items.push_back(std::move(it));
      }
    }
  }
  AssignSplits(ds, {800, 100, 100}, seed);
  return ds;
}

SplitSizes ConceptsSplitSizes(int n_items) {
  const int held = static_cast<int>(std::lround(n_items * 55.0 / 565.0));
  return {n_items - 2 * held, held, held};
}

Dataset LoadConcepts(const std::filesystem::path& path, int expected_features,
                     std::uint64_t split_seed) {
  if (!std::filesystem::exists(path)) {
    throw DataError("file not found: " + path.string());
  }
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      if (e.path().extension() == ".xml") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .xml files in " + path.string());
  } else {
    files.push_back(path);
  }

  std::vector<RawConcept> raw;
  for (const auto& f : files) {
    auto part = ParseConceptFile(f);
    raw.insert(raw.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  if (raw.empty()) throw DataError("no <concept> elements in " + path.string());

  std::set<std::string> attr_set, cat_set;
  for (const auto& c : raw) {
    if (c.attributes.empty()) {
      throw DataError("schema error: concept '" + c.name +
                      "' has no attributes");
    }
    attr_set.insert(c.attributes.begin(), c.attributes.end());
    cat_set.insert(c.category);
  }
  if (expected_features > 0 &&
      static_cast<int>(attr_set.size()) != expected_features) {
    throw DataError("schema error: corpus defines " +
                    std::to_string(attr_set.size()) + " attributes, expected " +
                    std::to_string(expected_features));
  }

  Dataset ds;
  ds.name = "concepts";
  ds.feature_names.assign(attr_set.begin(), attr_set.end());
  ds.category_names.assign(cat_set.begin(), cat_set.end());
  ds.feature_dim = static_cast<int>(ds.feature_names.size());
  ds.vocab_size = kConceptsVocab;
  ds.seed = split_seed;
  std::map<std::string, int> attr_index, cat_index;
  for (std::size_t i = 0; i < ds.feature_names.size(); ++i) {
    attr_index[ds.feature_names[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < ds.category_names.size(); ++i) {
    cat_index[ds.category_names[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Item it;
    it.id = static_cast<int>(i);
    for (const auto& a : raw[i].attributes) it.features.push_back(attr_index[a]);
    std::sort(it.features.begin(), it.features.end());
    it.category = cat_index[raw[i].category];
    ds.items.push_back(std::move(it));
  }
  AssignSplits(ds, ConceptsSplitSizes(static_cast<int>(ds.items.size())),
               split_seed);
  return ds;
}

Dataset SynthConcepts(std::uint64_t seed, int n_categories, int n_items) {
  constexpr int kCore = 30;
  constexpr double kCoreP = 0.9;
  constexpr double kNoiseP = 0.02;
  if (n_categories < 2 || n_items < n_categories) {
    throw DataError("synth_concepts needs n_items >= n_categories >= 2 (got " +
                    std::to_string(n_items) + ", " +
                    std::to_string(n_categories) + ")");
  }
  Rng rng(seed);
  Dataset ds;
  ds.name = "concepts-synth";
  ds.feature_dim = kConceptsFeatures;
  ds.vocab_size = kConceptsVocab;
  ds.seed = seed;
  for (int f = 0; f < kConceptsFeatures; ++f) {
    ds.feature_names.push_back("attr_" + std::to_string(f));
  }
  std::vector<std::vector<double>> profile(n_categories);
  for (int c = 0; c < n_categories; ++c) {
    ds.category_names.push_back("category_" + std::to_string(c));
    std::vector<int> all(kConceptsFeatures);
    for (int f = 0; f < kConceptsFeatures; ++f) all[f] = f;
    rng.Shuffle(all);
    profile[c].assign(kConceptsFeatures, kNoiseP);
    for (int k = 0; k < kCore; ++k) profile[c][all[k]] = kCoreP;
  }
  std::set<std::vector<int>> seen;
  for (int i = 0; i < n_items; ++i) {
    Item it;
    it.id = i;
    it.category = i % n_categories;
    do {
      it.features.clear();
      for (int f = 0; f < kConceptsFeatures; ++f) {
        if (rng.Bernoulli(profile[*it.category][f])) it.features.push_back(f);
      }
    } while (it.features.empty() || seen.count(it.features));
    seen.insert(it.features);
    ds.items.push_back(std::move(it));
  }
  AssignSplits(ds, ConceptsSplitSizes(n_items), seed);
  return ds;
}

void WriteDataset(const Dataset& ds, std::ostream& out) {
  const SplitSizes s = ds.sizes();
  out << "#refgame-dataset\tname=" << ds.name << "\tF=" << ds.feature_dim
      << "\tV=" << ds.vocab_size << "\tsplits=" << s.train << "/" << s.dev
      << "/" << s.test << "\tseed=" << ds.seed;
  if (!ds.category_names.empty() && Serializable(ds.category_names)) {
    out << "\tcategories=" << Join(ds.category_names, ',');
  }
  if (!ds.feature_names.empty() && Serializable(ds.feature_names)) {
    out << "\tfeatures=" << Join(ds.feature_names, ',');
  }
  out << "\n";
  std::vector<Split> split_of(ds.items.size(), Split::kTrain);
  for (int k = 0; k < 3; ++k) {
    for (int pos : ds.splits[k]) split_of[pos] = static_cast<Split>(k);
  }
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const Item& it = ds.items[i];
    out << it.id << '\t' << SplitName(split_of[i]) << '\t';
    if (it.category) {
      out << *it.category;
    } else {
      out << '-';
    }
    out << '\t';
    for (std::size_t k = 0; k < it.features.size(); ++k) {
      if (k) out << ',';
      out << it.features[k];
    }
    out << '\n';
  }
}

Dataset ReadDataset(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#refgame-dataset", 0) != 0) {
    throw DataError("dataset file: missing #refgame-dataset header");
  }
  Dataset ds;
  SplitSizes declared;
  for (const std::string& field : SplitOn(header, '\t')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    try {
      if (key == "name") ds.name = val;
      else if (key == "F") ds.feature_dim = std::stoi(val);
      else if (key == "V") ds.vocab_size = std::stoi(val);
      else if (key == "seed") ds.seed = std::stoull(val);
      else if (key == "categories") ds.category_names = SplitOn(val, ',');
      else if (key == "features") ds.feature_names = SplitOn(val, ',');
      else if (key == "splits") {
        auto parts = SplitOn(val, '/');
        if (parts.size() != 3) throw DataError("bad splits field");
        declared = {std::stoi(parts[0]), std::stoi(parts[1]),
                    std::stoi(parts[2])};
      }
    } catch (const std::logic_error&) {
      throw DataError("dataset header: bad value for " + key);
    }
  }
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = SplitOn(line, '\t');
    if (cols.size() != 4) {
      throw DataError("dataset line " + std::to_string(lineno) +
                      ": expected 4 tab-separated fields");
    }
    Item it;
    try {
      it.id = std::stoi(cols[0]);
      if (cols[2] != "-") it.category = std::stoi(cols[2]);
      for (const auto& f : SplitOn(cols[3], ',')) {
        it.features.push_back(std::stoi(f));
      }
    } catch (const std::logic_error&) {
      throw DataError("dataset line " + std::to_string(lineno) +
                      ": malformed number");
    }
    const int pos = static_cast<int>(ds.items.size());
    ds.splits[static_cast<int>(ParseSplit(cols[1]))].push_back(pos);
    ds.items.push_back(std::move(it));
  }
  if (ds.sizes() != declared) {
    throw DataError("dataset file: split sizes do not match header");
  }
  ds.Validate();
  return ds;
}

void SaveDataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  WriteDataset(ds, out);
}

Dataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("file not found: " + path.string());
  return ReadDataset(in);
}

}  // namespace refgame::data
