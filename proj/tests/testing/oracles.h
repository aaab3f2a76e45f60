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

// Brute-force reference implementations used only by tests. They share no
// code with the library.

#ifndef UQSHIFT_TESTS_TESTING_ORACLES_H_
#define UQSHIFT_TESTS_TESTING_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "uqshift/metrics.h"
#include "uqshift/rng.h"

namespace uqshift::testing {

// Sum over all (positive, negative) pairs of [s+ > s-] + 0.5 [s+ == s-].
inline double OracleAuroc(const std::vector<ScoredSample>& s) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& a : s) {
    if (!a.positive) continue;
    for (const auto& b : s) {
      if (b.positive) continue;
      pairs += 1.0;
      if (a.score > b.score) wins += 1.0;
      if (a.score == b.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Counts of positives / negatives with score >= t.
inline void CountAtOrAbove(const std::vector<ScoredSample>& s, double t,
                           double& tp, double& fp) {
  tp = fp = 0.0;
  for (const auto& x : s) {
    if (x.score >= t) (x.positive ? tp : fp) += 1.0;
  }
}

inline std::vector<double> DescendingThresholds(
    const std::vector<ScoredSample>& s) {
  std::set<double, std::greater<>> t;
  for (const auto& x : s) t.insert(x.score);
  return {t.begin(), t.end()};
}

// Average precision: sum over thresholds of precision * recall increment.
inline double OracleAupr(const std::vector<ScoredSample>& s) {
  double positives = 0.0;
  for (const auto& x : s) positives += x.positive;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : DescendingThresholds(s)) {
    double tp, fp;
    CountAtOrAbove(s, t, tp, fp);
    const double recall = tp / positives;
    if (tp > 0) ap += (tp / (tp + fp)) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

// FPR at the highest threshold whose TPR reaches the target.
inline double OracleFprAtTpr(const std::vector<ScoredSample>& s,
                             double target) {
  double positives = 0.0, negatives = 0.0;
  for (const auto& x : s) (x.positive ? positives : negatives) += 1.0;
  for (double t : DescendingThresholds(s)) {
    double tp, fp;
    CountAtOrAbove(s, t, tp, fp);
    if (tp >= target * positives - 1e-9) return fp / negatives;
  }
  return 1.0;
}

inline double OracleEntropyBits(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v) / std::log(2.0);
  }
  return h;
}

// Random scored set with both classes present and frequent ties.
inline std::vector<ScoredSample> RandomScored(RngStream& rng, int max_n = 50) {
  const int n = 2 + static_cast<int>(rng.UniformInt(max_n - 1));
  const int levels = 1 + static_cast<int>(rng.UniformInt(n));
  std::vector<ScoredSample> s(n);
  for (auto& x : s) {
    x.score = static_cast<double>(rng.UniformInt(levels)) / levels;
    x.positive = rng.Bernoulli(0.5);
  }
  s[0].positive = true;
  s[1].positive = false;
  return s;
}

}  // namespace uqshift::testing

#endif  // UQSHIFT_TESTS_TESTING_ORACLES_H_
