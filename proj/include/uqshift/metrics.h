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

#ifndef UQSHIFT_METRICS_H_
#define UQSHIFT_METRICS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "uqshift/datamodel.h"

namespace uqshift {

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t tn = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  int64_t total() const { return tp + tn + fp + fn; }
  double tpr() const;
  double fpr() const;
  bool operator==(const ConfusionCounts&) const = default;
};

// Ranking atom for ROC/PR: higher score means "more positive".
struct ScoredSample {
  double score = 0.0;
  bool positive = false;
};

struct MetricBlock {
  double accuracy = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr = 0.0;  // at 95% TPR
  double mean_entropy = 0.0;
  int64_t n = 0;
};

// Shannon entropy in bits, with 0 log 0 = 0.
double ShannonEntropy(std::span<const double> p);
double ShannonEntropy(const ProbabilityVector& p);

double Accuracy(std::span<const PredictionRecord> records);

// Binary only; predicts positive iff p[positive_class] >= threshold.
ConfusionCounts Confusion(std::span<const PredictionRecord> records,
                          int positive_class, double threshold = 0.5);

// Mann-Whitney AUROC with ties counted 1/2.
double Auroc(std::span<const ScoredSample> scored);
// Average precision with step interpolation; equal scores form one step.
double Aupr(std::span<const ScoredSample> scored);
// Smallest FPR over thresholds (predict positive iff score >= t) whose TPR
// reaches `target_tpr`.
double FprAtTpr(std::span<const ScoredSample> scored, double target_tpr = 0.95);

// Scores each record by p[positive_class] against label == positive_class.
std::vector<ScoredSample> ScoreByClassProbability(
    std::span<const PredictionRecord> records, int positive_class);

MetricBlock ComputeMetricBlock(std::span<const PredictionRecord> records,
                               int positive_class, double target_tpr = 0.95);

// Element-wise mean of several blocks; n is summed.
MetricBlock AverageBlocks(std::span<const MetricBlock> blocks);

}  // namespace uqshift

#endif  // UQSHIFT_METRICS_H_
