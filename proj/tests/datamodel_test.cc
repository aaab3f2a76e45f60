// Copyright 2026 The uqshift Authors.
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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "uqshift/datamodel.h"
#include "uqshift/rng.h"

namespace uqshift {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uqshift_dm_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path Write(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  fs::path dir_;
};

LabeledSample Sample(std::vector<double> f, int label, uint64_t uid) {
  LabeledSample s;
  s.features = std::move(f);
  s.label = label;
  s.tag = DistributionTag(DistributionTag::Kind::kInTest);
  s.origin = "toy";
  s.uid = uid;
  return s;
}

Dataset Toy(int n) {
  std::vector<LabeledSample> samples;
  for (int i = 0; i < n; ++i) {
    samples.push_back(Sample({0.1 * i, -0.5 * i}, i % 2, i));
  }
  return Dataset("toy", 2, 2, std::move(samples));
}

TEST(RngTest, Deterministic) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
  EXPECT_EQ(a, b);
  RngStream c(42, 8);
  EXPECT_NE(RngStream(42, 7).NextU64(), c.NextU64());
}

TEST(RngTest, DeriveDoesNotAdvance) {
  RngStream a(1, 2);
  const RngStream before = a;
  RngStream child = a.Derive(5);
  EXPECT_EQ(a, before);
  EXPECT_NE(child.NextU64(), a.NextU64());
}

TEST(RngTest, UniformAndNormalMoments) {
  RngStream rng(9, 0);
  const int n = 100000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.Normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.015);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(RngTest, UniformIntRangeAndShuffle) {
  RngStream rng(5, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) counts[rng.UniformInt(7)]++;
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
  std::vector<int> v = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.Shuffle(v);
  EXPECT_EQ(std::multiset<int>(v.begin(), v.end()).size(), 10u);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 10u);
}

TEST(DistributionTagTest, ParseAndClassify) {
  EXPECT_EQ(DistributionTag::Parse("ood_scc").kind(),
            DistributionTag::Kind::kOodScc);
  EXPECT_TRUE(DistributionTag::Parse("ood_cxr").IsOod());
  EXPECT_TRUE(DistributionTag::Parse("in_test").IsInDomain());
  EXPECT_FALSE(DistributionTag::Parse("ext_prot").IsInDomain());
  const DistributionTag custom = DistributionTag::Parse("clinic_b");
  EXPECT_EQ(custom.kind(), DistributionTag::Kind::kCustom);
  EXPECT_EQ(custom.name(), "clinic_b");
  EXPECT_EQ(EvaluationTags().size(), 6u);
}

TEST(DatasetTest, ValidatesInvariants) {
  EXPECT_THROW(Dataset("e", 2, 2, {}), std::invalid_argument);
  EXPECT_THROW(Dataset("bad", 2, 2, {Sample({1.0, 2.0}, 2, 0)}),
               std::invalid_argument);
  EXPECT_THROW(Dataset("bad", 2, 3, {Sample({1.0, 2.0}, 0, 0)}),
               std::invalid_argument);
  EXPECT_THROW(Dataset("bad", 2, 2,
                       {Sample({1.0, std::numeric_limits<double>::infinity()},
                               0, 0)}),
               std::invalid_argument);
  const Dataset ds = Toy(6);
  const auto by_class = ds.IndicesByClass();
  ASSERT_EQ(by_class.size(), 2u);
  EXPECT_EQ(by_class[0], (std::vector<size_t>{0, 2, 4}));
}

TEST(ProbabilityVectorTest, ValidationAndArgmax) {
  EXPECT_THROW(ProbabilityVector({0.6, 0.6}), std::invalid_argument);
  EXPECT_THROW(ProbabilityVector({1.2, -0.2}), std::invalid_argument);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{}), std::invalid_argument);
  EXPECT_EQ(ProbabilityVector({0.5, 0.5}).Argmax(), 0);
  EXPECT_EQ(ProbabilityVector({0.2, 0.4, 0.4}).Argmax(), 1);
  EXPECT_EQ(ProbabilityVector({0.2, 0.8}).Max(), 0.8);
}

using LoadTest = TempDir;

TEST_F(LoadTest, TwoValidLines) {
  const auto p = Write("two.jsonl",
                       R"({"features":[1,2,3,4],"label":0,"dist":"in_test"}
{"features":[0.5,0,0,-1],"label":1,"dist":"ood_scc","meta":"x"}
)");
  const Dataset ds = LoadDataset(p, 4);
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.feature_dim(), 4);
  EXPECT_EQ(ds[1].tag.kind(), DistributionTag::Kind::kOodScc);
  EXPECT_EQ(ds[1].meta, "x");
  EXPECT_EQ(ds[1].origin, "two");
  EXPECT_EQ(ds[1].uid, 1u);
}

TEST_F(LoadTest, Errors) {
  try {
    LoadDataset(Write("empty.jsonl", ""));
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
  try {
    LoadDataset(Write("label.jsonl",
                      R"({"features":[1,2],"label":5,"dist":"in_test"})"),
                std::nullopt, 2);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos)
        << e.what();
  }
  EXPECT_THROW(LoadDataset(Write("dim.jsonl",
                                 R"({"features":[1,2],"label":0,"dist":"in_test"}
{"features":[1],"label":0,"dist":"in_test"})")),
               std::runtime_error);
  EXPECT_THROW(LoadDataset(Write("junk.jsonl", "not json\n")),
               std::runtime_error);
  EXPECT_THROW(LoadDataset(dir_ / "missing.jsonl"), std::runtime_error);
}

TEST_F(LoadTest, RoundTripIsTextExact) {
  RngStream rng(3, 0);
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 20; ++i) {
    samples.push_back(Sample({rng.Normal(), rng.Normal() * 1e-7, 1e300 * rng.Uniform()},
                             i % 2, i));
  }
  const Dataset ds("rt", 2, 3, samples);
  const fs::path a = dir_ / "a.jsonl", b = dir_ / "b.jsonl";
  WriteDataset(ds, a);
  const Dataset loaded = LoadDataset(a);
  for (size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(loaded[i].features, ds[i].features);
  }
  WriteDataset(loaded, b);
  std::ifstream fa(a), fb(b);
  std::string sa((std::istreambuf_iterator<char>(fa)), {});
  std::string sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(sa, sb);
}

TEST_F(LoadTest, Logits) {
  const auto p = Write("logits.jsonl", R"({"logits":[0,0],"label":0}
{"probs":[1,0],"label":0}
{"logits":[2,0],"label":1}
)");
  const auto recs = LoadLogits(p, 2);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].probs[0], 0.5);
  EXPECT_EQ(recs[0].uncertainty, 1.0);
  EXPECT_EQ(recs[1].uncertainty, 0.0);
  EXPECT_NEAR(recs[2].probs[0], 0.8807970779778824, 1e-15);
  EXPECT_NEAR(recs[2].probs[1], 0.11920292202211755, 1e-15);
  for (const auto& r : recs) {
    double sum = 0.0;
    for (double v : r.probs.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_THROW(LoadLogits(Write("bad.jsonl", R"({"probs":[0.7,0.7],"label":0})"), 2),
               std::runtime_error);
  EXPECT_THROW(LoadLogits(Write("wide.jsonl", R"({"logits":[0,0,0],"label":0})"), 2),
               std::runtime_error);
}

TEST(SplitTest, PartitionProperties) {
  const Dataset ds = Toy(10);
  const double halves[] = {0.5, 0.5};
  const auto parts = SplitDataset(ds, halves, 77);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size(), 5u);
  EXPECT_EQ(parts[1].size(), 5u);
  EXPECT_TRUE(AreDisjoint(parts[0], parts[1]));
  std::multiset<uint64_t> all;
  for (const auto& p : parts) {
    for (const auto& s : p.samples()) all.insert(s.uid);
  }
  EXPECT_EQ(all, (std::multiset<uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));

  const auto again = SplitDataset(ds, halves, 77);
  for (size_t i = 0; i < 5; ++i) EXPECT_EQ(again[0][i].uid, parts[0][i].uid);

  const double bad[] = {0.7, 0.7};
  EXPECT_THROW(SplitDataset(ds, bad, 1), std::invalid_argument);
}

TEST(SplitTest, UnevenFractions) {
  const Dataset ds = Toy(37);
  const double f[] = {0.6, 0.3, 0.1};
  const auto parts = SplitDataset(ds, f, 5);
  size_t total = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    total += parts[i].size();
    for (size_t j = i + 1; j < parts.size(); ++j) {
      EXPECT_TRUE(AreDisjoint(parts[i], parts[j]));
    }
  }
  EXPECT_EQ(total, 37u);
}

}  // namespace
}  // namespace uqshift
