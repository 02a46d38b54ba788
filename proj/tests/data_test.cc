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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace refgame::data {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("refgame_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Shapes, ThousandDistinctItemsThreeAttributes) {
  const Dataset ds = GenerateShapes(1);
  ASSERT_EQ(ds.items.size(), 1000u);
  std::set<std::vector<int>> seen;
  for (const Item& it : ds.items) {
    ASSERT_EQ(it.features.size(), 3u);
    EXPECT_LT(it.features[0], 10);
    EXPECT_GE(it.features[1], 10);
    EXPECT_LT(it.features[1], 20);
    EXPECT_GE(it.features[2], 20);
    EXPECT_LT(it.features[2], 30);
    EXPECT_EQ(it.id, 100 * it.features[0] + 10 * (it.features[1] - 10) +
                         (it.features[2] - 20));
    seen.insert(it.features);
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(ds.feature_dim, 30);
}

TEST(Shapes, SplitSizesAndValidity) {
  const Dataset ds = GenerateShapes(1);
  EXPECT_EQ(ds.sizes(), (SplitSizes{800, 100, 100}));
  EXPECT_NO_THROW(ds.Validate());
}

TEST(Shapes, SeedControlsSplitOnly) {
  const Dataset a = GenerateShapes(1), b = GenerateShapes(1),
                c = GenerateShapes(2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.split(Split::kTest), c.split(Split::kTest));
  EXPECT_EQ(a.items, c.items);
}

TEST(Shapes, FeatureNames) {
  const auto names = ShapesFeatureNames();
  ASSERT_EQ(names.size(), 30u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 30u);
}

TEST(Dataset, ValidateCatchesTrainTestLeak) {
  Dataset ds = GenerateShapes(1);
  const int test_pos = ds.split(Split::kTest)[0];
  const int train_pos = ds.split(Split::kTrain)[0];
  ds.items[test_pos].features = ds.items[train_pos].features;
  EXPECT_THROW(ds.Validate(), DataError);
}

TEST(Dataset, ValidateCatchesOverlappingSplits) {
  Dataset ds = GenerateShapes(1);
  ds.splits[1].push_back(ds.splits[0][0]);
  EXPECT_THROW(ds.Validate(), DataError);
}

TEST(Dataset, ValidateCatchesOutOfRangeFeature) {
  Dataset ds = GenerateShapes(1);
  ds.items[0].features.back() = 30;
  EXPECT_THROW(ds.Validate(), DataError);
}

TEST(Dataset, TextRoundTrip) {
  for (const Dataset& ds : {GenerateShapes(3), SynthConcepts(2, 5, 60)}) {
    std::stringstream s;
    WriteDataset(ds, s);
    const Dataset back = ReadDataset(s);
    EXPECT_EQ(back.items, ds.items);
    EXPECT_EQ(back.splits, ds.splits);
    EXPECT_EQ(back.feature_dim, ds.feature_dim);
    EXPECT_EQ(back.num_categories(), ds.num_categories());
  }
}

TEST(Dataset, ReadRejectsGarbage) {
  std::stringstream s("not a dataset\n");
  EXPECT_THROW(ReadDataset(s), DataError);
}

TEST(SynthConcepts, ShapeAndInvariants) {
  const Dataset ds = SynthConcepts(1, 20, kConceptsItems);
  EXPECT_EQ(ds.items.size(), static_cast<std::size_t>(kConceptsItems));
  EXPECT_EQ(ds.feature_dim, kConceptsFeatures);
  EXPECT_EQ(ds.num_categories(), 20);
  EXPECT_EQ(ds.sizes(), ConceptsSplitSizes(kConceptsItems));
  EXPECT_EQ(ds.sizes(), (SplitSizes{455, 55, 55}));
  EXPECT_NO_THROW(ds.Validate());
  std::set<std::vector<int>> seen;
  for (const Item& it : ds.items) {
    EXPECT_FALSE(it.features.empty());
    EXPECT_TRUE(it.category.has_value());
    seen.insert(it.features);
  }
  EXPECT_EQ(seen.size(), ds.items.size());
  EXPECT_EQ(SynthConcepts(1, 20, kConceptsItems), ds);
}

TEST(SynthConcepts, AttributesClusterByCategory) {
  const Dataset ds = SynthConcepts(4, 10, 300);
  // Items of one category share many more features than items across.
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = i + 1; j < 60; ++j) {
      std::vector<int> common;
      std::set_intersection(ds.items[i].features.begin(),
                            ds.items[i].features.end(),
                            ds.items[j].features.begin(),
                            ds.items[j].features.end(),
                            std::back_inserter(common));
      if (ds.items[i].category == ds.items[j].category) {
        within += common.size();
        ++nw;
      } else {
        across += common.size();
        ++na;
      }
    }
  }
  EXPECT_GT(within / nw, 3 * (across / na));
}

constexpr const char* kXml = R"(<?xml version="1.0"?>
<concepts>
  <category name="animal">
    <concept name="dog"><visual>has_fur four_legs</visual><encyclopedic>barks</encyclopedic></concept>
    <concept name="cat"><visual>has_fur four_legs</visual><encyclopedic>meows</encyclopedic></concept>
  </category>
  <concept name="car" category="vehicle"><visual>has_wheels</visual></concept>
  <concept name="bus" category="vehicle"><visual>has_wheels big</visual></concept>
  <concept name="bike" category="vehicle"><visual>has_wheels pedals</visual></concept>
  <concept name="salmon" category="fish"><visual>scales swims</visual></concept>
  <concept name="trout" category="fish"><visual>scales swims spotted</visual></concept>
</concepts>
)";

TEST(Concepts, ParsesFileWithCategories) {
  const fs::path dir = TempDir("xml");
  const fs::path file = dir / "mini.xml";
  std::ofstream(file) << kXml;
  const Dataset ds = LoadConcepts(file, 0);
  EXPECT_EQ(ds.items.size(), 7u);
  EXPECT_EQ(ds.num_categories(), 3);
  const std::set<std::string> names(ds.feature_names.begin(),
                                    ds.feature_names.end());
  EXPECT_TRUE(names.count("has_fur"));
  EXPECT_TRUE(names.count("barks"));
  EXPECT_EQ(ds.feature_dim, static_cast<int>(names.size()));
  EXPECT_EQ(ds.sizes().total(), 7);
}

TEST(Concepts, ExpectedFeatureCountEnforced) {
  const fs::path dir = TempDir("xml_count");
  std::ofstream(dir / "mini.xml") << kXml;
  EXPECT_THROW(LoadConcepts(dir / "mini.xml"), DataError);  // wants 597
}

TEST(Concepts, DirectoryUsesFileStemAsCategory) {
  const fs::path dir = TempDir("xml_dir");
  std::ofstream(dir / "birds.xml")
      << "<concepts><concept name=\"owl\"><v>wings night</v></concept>"
         "<concept name=\"crow\"><v>wings black</v></concept></concepts>";
  std::ofstream(dir / "tools.xml")
      << "<concepts><concept name=\"saw\"><v>metal teeth</v></concept>"
         "<concept name=\"hammer\"><v>metal handle</v></concept></concepts>";
  const Dataset ds = LoadConcepts(dir, 0);
  EXPECT_EQ(ds.items.size(), 4u);
  EXPECT_EQ(ds.category_names, (std::vector<std::string>{"birds", "tools"}));
}

TEST(Concepts, MissingFileAndMalformedXml) {
  EXPECT_THROW(LoadConcepts("/nonexistent/missing.xml", 0), DataError);
  const fs::path dir = TempDir("xml_bad");
  std::ofstream(dir / "bad.xml") << "<concepts><concept name=\"x\">";
  EXPECT_THROW(LoadConcepts(dir / "bad.xml", 0), DataError);
  std::ofstream(dir / "noname.xml") << "<concepts><concept><v>a</v></concept></concepts>";
  EXPECT_THROW(LoadConcepts(dir / "noname.xml", 0), DataError);
}

TEST(ConceptsSplit, RatioMatchesCorpus) {
  EXPECT_EQ(ConceptsSplitSizes(565), (SplitSizes{455, 55, 55}));
  const auto s = ConceptsSplitSizes(200);
  EXPECT_EQ(s.total(), 200);
  EXPECT_EQ(s.dev, s.test);
}

}  // namespace
}  // namespace refgame::data
