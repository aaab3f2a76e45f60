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

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "testing/oracles.h"
#include "uqshift/datamodel.h"
#include "uqshift/metrics.h"

namespace uqshift {
namespace {

using testing::OracleAupr;
using testing::OracleAuroc;
using testing::OracleFprAtTpr;
using testing::RandomScored;

PredictionRecord Rec(std::vector<double> probs, int label) {
  PredictionRecord r;
  r.probs = ProbabilityVector(std::move(probs));
  r.true_label = label;
  r.uncertainty = ShannonEntropy(r.probs);
  return r;
}

TEST(EntropyTest, KnownValues) {
  EXPECT_EQ(ShannonEntropy(std::vector<double>{0.5, 0.5}), 1.0);
  EXPECT_EQ(ShannonEntropy(std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(ShannonEntropy(std::vector<double>{0.9, 0.1}),
              0.4689955935892812, 1e-12);
  EXPECT_NEAR(ShannonEntropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0,
              1e-15);
}

TEST(EntropyTest, BoundsOnRandomVectors) {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int c = 2 + static_cast<int>(rng.UniformInt(6));
    std::vector<double> p(c);
    double sum = 0.0;
    for (double& v : p) sum += (v = -std::log(1.0 - rng.Uniform()));
    for (double& v : p) v /= sum;
    const double h = ShannonEntropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(c) + 1e-12);
    EXPECT_NEAR(h, testing::OracleEntropyBits(p), 1e-12);
  }
}

TEST(EntropyTest, RejectsInvalid) {
  EXPECT_THROW(ShannonEntropy(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(ShannonEntropy(std::vector<double>{0.7, 0.7}),
               std::invalid_argument);
  EXPECT_THROW(ShannonEntropy(std::vector<double>{1.5, -0.5}),
               std::invalid_argument);
}

TEST(AccuracyTest, Counts) {
  std::vector<PredictionRecord> r = {Rec({0.9, 0.1}, 0), Rec({0.2, 0.8}, 1),
                                     Rec({0.3, 0.7}, 1), Rec({0.6, 0.4}, 1)};
  EXPECT_DOUBLE_EQ(Accuracy(r), 0.75);
  r.pop_back();
  EXPECT_DOUBLE_EQ(Accuracy(r), 1.0);
  EXPECT_THROW(Accuracy(std::vector<PredictionRecord>{}), std::invalid_argument);
}

TEST(ConfusionTest, ThresholdIsInclusive) {
  const std::vector<PredictionRecord> r = {Rec({0.6, 0.4}, 0)};
  EXPECT_EQ(Confusion(r, 0).tp, 1);
  const std::vector<PredictionRecord> sure = {Rec({1.0, 0.0}, 0)};
  EXPECT_EQ(Confusion(sure, 0, 1.0).tp, 1);
  EXPECT_EQ(Confusion(std::vector<PredictionRecord>{}, 1).total(), 0);
}

TEST(ConfusionTest, AllCells) {
  const std::vector<PredictionRecord> r = {Rec({0.2, 0.8}, 1), Rec({0.7, 0.3}, 0),
                                           Rec({0.4, 0.6}, 0), Rec({0.9, 0.1}, 1)};
  const ConfusionCounts c = Confusion(r, 1);
  EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(c.tpr(), 0.5);
  EXPECT_DOUBLE_EQ(c.fpr(), 0.5);
  const std::vector<PredictionRecord> three = {Rec({0.2, 0.3, 0.5}, 1)};
  EXPECT_THROW(Confusion(three, 1), std::invalid_argument);
}

TEST(AurocTest, EdgeCases) {
  EXPECT_EQ(Auroc(std::vector<ScoredSample>{{0.1, false}, {0.9, true}}), 1.0);
  EXPECT_EQ(Auroc(std::vector<ScoredSample>{{0.5, false}, {0.5, true}}), 0.5);
  EXPECT_THROW(Auroc(std::vector<ScoredSample>{{0.5, true}}),
               std::invalid_argument);
  EXPECT_THROW(
      Auroc(std::vector<ScoredSample>{
          {std::numeric_limits<double>::quiet_NaN(), true}, {0.0, false}}),
      std::invalid_argument);
}

TEST(AurocTest, HandWorkedTies) {
  // pos {0.1, 0.2}, neg {0.2, 0.3}: only (0.2, 0.2) ties -> 0.5 / 4.
  const std::vector<ScoredSample> s = {
      {0.1, true}, {0.2, true}, {0.2, false}, {0.3, false}};
  EXPECT_DOUBLE_EQ(Auroc(s), 0.125);
}

TEST(AuprTest, EdgeCases) {
  EXPECT_EQ(Aupr(std::vector<ScoredSample>{{0.9, true}, {0.1, false}}), 1.0);
  std::vector<ScoredSample> last = {{0.0, true}};
  for (int i = 1; i < 8; ++i) last.push_back({0.1 * i, false});
  EXPECT_DOUBLE_EQ(Aupr(last), 1.0 / 8.0);
  EXPECT_THROW(Aupr(std::vector<ScoredSample>{{0.2, false}}),
               std::invalid_argument);
}

TEST(AuprTest, PerfectRankingIsExactlyOne) {
  std::vector<ScoredSample> s;
  for (int i = 0; i < 97; ++i) s.push_back({1.0 + 0.01 * i, true});
  for (int i = 0; i < 50; ++i) s.push_back({0.01 * i, false});
  EXPECT_EQ(Aupr(s), 1.0);
}

TEST(FprAtTprTest, EdgeCases) {
  EXPECT_EQ(FprAtTpr(std::vector<ScoredSample>{{0.9, true}, {0.1, false}}), 0.0);
  EXPECT_EQ(FprAtTpr(std::vector<ScoredSample>{
                {0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}}),
            1.0);
  EXPECT_THROW(FprAtTpr(std::vector<ScoredSample>{{0.9, true}, {0.1, false}}, 0.0),
               std::invalid_argument);
}

TEST(FprAtTprTest, TwentyPositivesNeedNineteen) {
  // 20 positives at 1..20, one negative at 1.5: TPR 0.95 is reached once
  // the threshold drops to 2, above the negative.
  std::vector<ScoredSample> s;
  for (int i = 1; i <= 20; ++i) s.push_back({static_cast<double>(i), true});
  s.push_back({1.5, false});
  EXPECT_EQ(FprAtTpr(s), 0.0);
  EXPECT_EQ(FprAtTpr(s, 1.0), 1.0);
}

TEST(MetricOracleTest, RandomInstancesMatchBruteForce) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = RandomScored(rng);
    ASSERT_NEAR(Auroc(s), OracleAuroc(s), 1e-12) << "trial " << trial;
    ASSERT_NEAR(Aupr(s), OracleAupr(s), 1e-12) << "trial " << trial;
    for (double target : {0.5, 0.8, 0.95, 1.0}) {
      ASSERT_NEAR(FprAtTpr(s, target), OracleFprAtTpr(s, target), 1e-12)
          << "trial " << trial << " target " << target;
    }
  }
}

TEST(MetricPropertyTest, MonotoneTransformInvariance) {
  RngStream rng(12, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = RandomScored(rng);
    auto t = s;
    for (auto& x : t) x.score = std::exp(3.0 * x.score) - 7.0;
    EXPECT_NEAR(Auroc(s), Auroc(t), 1e-12);
    EXPECT_NEAR(Aupr(s), Aupr(t), 1e-12);
    EXPECT_NEAR(FprAtTpr(s), FprAtTpr(t), 1e-12);
  }
}

TEST(MetricPropertyTest, NegatedScoresComplementAuroc) {
  RngStream rng(13, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.UniformInt(49));
    std::vector<ScoredSample> s(n);
    for (auto& x : s) x = {rng.Uniform(), rng.Bernoulli(0.5)};
    s[0].positive = true;
    s[1].positive = false;
    auto neg = s;
    for (auto& x : neg) x.score = -x.score;
    EXPECT_NEAR(Auroc(s) + Auroc(neg), 1.0, 1e-12);
  }
}

TEST(MetricBlockTest, ConfidentCorrect) {
  const std::vector<PredictionRecord> r = {Rec({1.0, 0.0}, 0), Rec({0.0, 1.0}, 1)};
  const MetricBlock b = ComputeMetricBlock(r, 1);
  EXPECT_EQ(b.accuracy, 1.0);
  EXPECT_EQ(b.auroc, 1.0);
  EXPECT_EQ(b.mean_entropy, 0.0);
  EXPECT_EQ(b.n, 2);
}

TEST(MetricBlockTest, UniformRecordsHaveOneBit) {
  const std::vector<PredictionRecord> r = {Rec({0.5, 0.5}, 0), Rec({0.5, 0.5}, 1)};
  EXPECT_EQ(ComputeMetricBlock(r, 1).mean_entropy, 1.0);
}

TEST(MetricBlockTest, ComposedFromComponents) {
  RngStream rng(14, 0);
  std::vector<PredictionRecord> r;
  for (int i = 0; i < 40; ++i) {
    const double p = rng.Uniform();
    r.push_back(Rec({1.0 - p, p}, static_cast<int>(rng.UniformInt(2))));
  }
  r[0].true_label = 0;
  r[1].true_label = 1;
  const MetricBlock b = ComputeMetricBlock(r, 1);
  const auto scored = ScoreByClassProbability(r, 1);
  EXPECT_EQ(b.accuracy, Accuracy(r));
  EXPECT_EQ(b.auroc, Auroc(scored));
  EXPECT_EQ(b.aupr, Aupr(scored));
  EXPECT_EQ(b.fpr, FprAtTpr(scored));
  double h = 0.0;
  for (const auto& x : r) h += ShannonEntropy(x.probs);
  EXPECT_NEAR(b.mean_entropy, h / r.size(), 1e-15);
}

TEST(MetricBlockTest, AverageBlocks) {
  MetricBlock a{1.0, 0.5, 0.25, 0.0, 0.2, 10};
  MetricBlock b{0.0, 1.0, 0.75, 1.0, 0.4, 30};
  const std::vector<MetricBlock> blocks = {a, b};
  const MetricBlock m = AverageBlocks(blocks);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.auroc, 0.75);
  EXPECT_DOUBLE_EQ(m.aupr, 0.5);
  EXPECT_DOUBLE_EQ(m.fpr, 0.5);
  EXPECT_DOUBLE_EQ(m.mean_entropy, 0.3);
  EXPECT_EQ(m.n, 40);
}

}  // namespace
}  // namespace uqshift
