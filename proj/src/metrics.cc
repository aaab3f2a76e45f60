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

#include "uqshift/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uqshift {
namespace {

void CountClasses(std::span<const ScoredSample> scored, int64_t& positives,
                  int64_t& negatives) {
  positives = 0;
  negatives = 0;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw std::invalid_argument("non-finite score");
    (s.positive ? positives : negatives)++;
  }
}

// Indices sorted by descending score.
std::vector<size_t> DescendingOrder(std::span<const ScoredSample> scored) {
  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scored[a].score > scored[b].score;
  });
  return order;
}

}  // namespace

double ConfusionCounts::tpr() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
}

double ConfusionCounts::fpr() const {
  return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / (fp + tn);
}

double ShannonEntropy(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("probability outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("probabilities do not sum to 1");
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return std::max(h, 0.0);
}

double ShannonEntropy(const ProbabilityVector& p) {
  return ShannonEntropy(p.values());
}

double Accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw std::invalid_argument("accuracy of no records");
  size_t correct = 0;
  for (const auto& r : records) correct += r.predicted() == r.true_label;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

ConfusionCounts Confusion(std::span<const PredictionRecord> records,
                          int positive_class, double threshold) {
  if (positive_class != 0 && positive_class != 1) {
    throw std::invalid_argument("positive class must be 0 or 1");
  }
  ConfusionCounts counts;
  for (const auto& r : records) {
    if (r.probs.size() != 2) {
      throw std::invalid_argument("confusion counts need a binary task");
    }
    const bool predicted = r.probs[positive_class] >= threshold;
    const bool actual = r.true_label == positive_class;
    if (predicted && actual) {
      ++counts.tp;
    } else if (predicted) {
      ++counts.fp;
    } else if (actual) {
      ++counts.fn;
    } else {
      ++counts.tn;
    }
  }
  return counts;
}

double Auroc(std::span<const ScoredSample> scored) {
  int64_t positives, negatives;
  CountClasses(scored, positives, negatives);
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("AUROC is undefined without both classes");
  }
  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scored[a].score < scored[b].score;
  });
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (scored[order[k]].positive) rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double Aupr(std::span<const ScoredSample> scored) {
  int64_t positives, negatives;
  CountClasses(scored, positives, negatives);
  if (positives == 0) throw std::invalid_argument("AUPR needs a positive");
  const std::vector<size_t> order = DescendingOrder(scored);
  double ap = 0.0;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < order.size();) {
    int64_t group_tp = 0;
    size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) {
      scored[order[j]].positive ? ++group_tp : ++fp;
      ++j;
    }
    tp += group_tp;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / (tp + fp);
      ap += precision * static_cast<double>(group_tp);
    }
    i = j;
  }
  return ap / static_cast<double>(positives);
}

double FprAtTpr(std::span<const ScoredSample> scored, double target_tpr) {
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw std::invalid_argument("target TPR must lie in (0, 1]");
  }
  int64_t positives, negatives;
  CountClasses(scored, positives, negatives);
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("FPR at TPR needs both classes");
  }
  const double needed = target_tpr * static_cast<double>(positives) - 1e-9;
  const std::vector<size_t> order = DescendingOrder(scored);
  int64_t tp = 0, fp = 0;
  // FPR only grows as the threshold drops, so the first threshold reaching
  // the target TPR is optimal.
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) {
      scored[order[j]].positive ? ++tp : ++fp;
      ++j;
    }
    if (static_cast<double>(tp) >= needed) {
      return static_cast<double>(fp) / static_cast<double>(negatives);
    }
    i = j;
  }
  return 1.0;
}

std::vector<ScoredSample> ScoreByClassProbability(
    std::span<const PredictionRecord> records, int positive_class) {
  std::vector<ScoredSample> scored;
  scored.reserve(records.size());
  for (const auto& r : records) {
    if (positive_class < 0 ||
        positive_class >= static_cast<int>(r.probs.size())) {
      throw std::invalid_argument("positive class out of range");
    }
    scored.push_back({r.probs[positive_class], r.true_label == positive_class});
  }
  return scored;
}

MetricBlock ComputeMetricBlock(std::span<const PredictionRecord> records,
                               int positive_class, double target_tpr) {
  if (records.empty()) throw std::invalid_argument("metric block of no records");
  MetricBlock block;
  block.n = static_cast<int64_t>(records.size());
  block.accuracy = Accuracy(records);
  const std::vector<ScoredSample> scored =
      ScoreByClassProbability(records, positive_class);
  block.auroc = Auroc(scored);
  block.aupr = Aupr(scored);
  block.fpr = FprAtTpr(scored, target_tpr);
  double entropy = 0.0;
  for (const auto& r : records) entropy += ShannonEntropy(r.probs);
  block.mean_entropy = entropy / static_cast<double>(records.size());
  return block;
}

MetricBlock AverageBlocks(std::span<const MetricBlock> blocks) {
  if (blocks.empty()) throw std::invalid_argument("no blocks to average");
  MetricBlock mean;
  for (const auto& b : blocks) {
    mean.accuracy += b.accuracy;
    mean.auroc += b.auroc;
    mean.aupr += b.aupr;
    mean.fpr += b.fpr;
    mean.mean_entropy += b.mean_entropy;
    mean.n += b.n;
  }
  const double k = static_cast<double>(blocks.size());
  mean.accuracy /= k;
  mean.auroc /= k;
  mean.aupr /= k;
  mean.fpr /= k;
  mean.mean_entropy /= k;
  return mean;
}

}  // namespace uqshift
