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

#ifndef REFGAME_DATA_H_
#define REFGAME_DATA_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace refgame::data {

inline constexpr int kShapesAttributes = 3;
inline constexpr int kShapesValues = 10;
inline constexpr int kShapesFeatures = kShapesAttributes * kShapesValues;
inline constexpr int kShapesVocab = 30;
inline constexpr int kConceptsFeatures = 597;
inline constexpr int kConceptsVocab = 100;
inline constexpr int kConceptsItems = 565;
inline constexpr std::uint64_t kConceptsSplitSeed = 1;

enum class Split { kTrain = 0, kDev = 1, kTest = 2 };
const char* SplitName(Split s);
Split ParseSplit(const std::string& name);

// Bag of binary features. Only the set indices are stored, sorted ascending.
struct Item {
  int id = 0;
  std::vector<int> features;
  std::optional<int> category;  // never shown to learning agents

  bool Has(int feature) const;
  friend bool operator==(const Item&, const Item&) = default;
};

struct SplitSizes {
  int train = 0, dev = 0, test = 0;
  int total() const { return train + dev + test; }
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  int feature_dim = 0;
  int vocab_size = 0;
  std::uint64_t seed = 0;
  std::vector<Item> items;               // indexed by position, not id
  std::array<std::vector<int>, 3> splits;  // positions into items
  std::vector<std::string> feature_names;   // optional
  std::vector<std::string> category_names;  // optional

  const std::vector<int>& split(Split s) const {
    return splits[static_cast<int>(s)];
  }
  SplitSizes sizes() const;
  int num_categories() const;
  bool has_categories() const;

  // Throws DataError when an invariant is violated: split overlap or
  // incomplete coverage, empty items, out-of-range features, or a test item
  // whose full feature vector also occurs in train.
  void Validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// All 1000 attribute combinations; attribute a with value v sets feature
// 10a+v. Item id is the combination index 100a0 + 10a1 + a2 and does not
// depend on the seed. Split 800/100/100 after a seeded shuffle.
Dataset GenerateShapes(std::uint64_t seed);

// Human-readable feature names for Shapes ("red", "dotted", "circle", ...).
std::vector<std::string> ShapesFeatureNames();

// Parses the Visual-Attributes-for-Concepts XML corpus. `path` is either a
// single XML file or a directory of *.xml files (one per category, parsed in
// name order). Each <concept name="..."> contributes one item whose
// attributes are the whitespace-separated tokens found in its descendant
// elements. The category comes from, in order of precedence, a `category`
// attribute on the concept, an enclosing <category name="...">, a `category`
// attribute on the document root, or the file stem.
//
// Throws DataError for parse failures (naming the element), all-zero items,
// or an attribute inventory that differs from expected_features (pass 0 to
// accept any count).
Dataset LoadConcepts(const std::filesystem::path& path,
                     int expected_features = kConceptsFeatures,
                     std::uint64_t split_seed = kConceptsSplitSeed);

// Stand-in for the Concepts corpus: items drawn from per-category Bernoulli
// profiles (30 core attributes at 0.9, the rest at 0.02) so attributes
// co-occur within categories. Categories are assigned round-robin.
Dataset SynthConcepts(std::uint64_t seed, int n_categories, int n_items);

// Split sizes for n items at the 455/55/55 ratio.
SplitSizes ConceptsSplitSizes(int n_items);

// Text format: one header line, then one tab-separated line per item:
//   id  split  category|-  comma-separated feature indices
void WriteDataset(const Dataset& ds, std::ostream& out);
Dataset ReadDataset(std::istream& in);
void SaveDataset(const Dataset& ds, const std::filesystem::path& path);
Dataset LoadDataset(const std::filesystem::path& path);

}  // namespace refgame::data

#endif  // REFGAME_DATA_H_
