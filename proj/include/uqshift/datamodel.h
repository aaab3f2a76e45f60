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

#ifndef UQSHIFT_DATAMODEL_H_
#define UQSHIFT_DATAMODEL_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqshift/rng.h"

namespace uqshift {

// Which distribution a sample was drawn from. The fixed kinds mirror the
// in-domain / in-distribution-shift / OOD grid; anything else is `kCustom`
// and keeps its name.
class DistributionTag {
 public:
  enum class Kind {
    kInTrain,
    kInTest,
    kExtProt,
    kExt5ad,
    kOodScc,
    kOodCad,
    kOodCxr,
    kCustom,
  };

  DistributionTag() = default;
  explicit DistributionTag(Kind kind);
  static DistributionTag Custom(std::string name);
  // Parses the canonical names ("in_train", "ood_scc", ...); any other
  // non-empty string becomes a custom tag.
  static DistributionTag Parse(std::string_view name);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool IsTraining() const { return kind_ == Kind::kInTrain; }
  bool IsInDomain() const {
    return kind_ == Kind::kInTrain || kind_ == Kind::kInTest;
  }
  bool IsOod() const {
    return kind_ == Kind::kOodScc || kind_ == Kind::kOodCad ||
           kind_ == Kind::kOodCxr;
  }

  auto operator<=>(const DistributionTag& other) const {
    if (kind_ != other.kind_) return kind_ <=> other.kind_;
    return name_ <=> other.name_;
  }
  bool operator==(const DistributionTag&) const = default;

 private:
  Kind kind_ = Kind::kInTrain;
  std::string name_ = "in_train";
};

// The six tags a full experiment evaluates on, in report order.
const std::vector<DistributionTag>& EvaluationTags();

struct LabeledSample {
  std::vector<double> features;
  int label = 0;
  DistributionTag tag;
  // Free-form annotation, e.g. the sub-type of a sub-type-shift sample.
  std::string meta;
  // Sample identity is (origin, uid): the dataset the sample was first read
  // or generated into, and its line / pool index there.
  std::string origin;
  uint64_t uid = 0;
};

// Validated, immutable collection of samples sharing one feature dimension.
class Dataset {
 public:
  // Throws std::invalid_argument if any invariant is violated.
  Dataset(std::string name, int class_count, int feature_dim,
          std::vector<LabeledSample> samples);

  const std::string& name() const { return name_; }
  int class_count() const { return class_count_; }
  int feature_dim() const { return feature_dim_; }
  size_t size() const { return samples_.size(); }
  const std::vector<LabeledSample>& samples() const { return samples_; }
  const LabeledSample& operator[](size_t i) const { return samples_[i]; }

  // Indices of samples per class label; entry c lists samples of class c.
  std::vector<std::vector<size_t>> IndicesByClass() const;

 private:
  std::string name_;
  int class_count_;
  int feature_dim_;
  std::vector<LabeledSample> samples_;
};

// Normalized class distribution. Construction validates non-negativity and
// unit sum within 1e-9.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> values);

  size_t size() const { return values_.size(); }
  double operator[](size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  // Index of the largest entry; ties resolve to the lower index.
  int Argmax() const;
  double Max() const { return values_[Argmax()]; }

  bool operator==(const ProbabilityVector&) const = default;

 private:
  std::vector<double> values_;
};

struct PredictionRecord {
  ProbabilityVector probs;
  int true_label = 0;
  double uncertainty = 0.0;
  std::string method;

  int predicted() const { return probs.Argmax(); }
};

// Loads a line-delimited dataset file. When `class_count` is absent it is
// inferred as max(label) + 1. Errors name the 1-based line number.
Dataset LoadDataset(const std::filesystem::path& path,
                    std::optional<int> expected_dim = std::nullopt,
                    std::optional<int> class_count = std::nullopt);

void WriteDataset(const Dataset& ds, const std::filesystem::path& path);
std::string SampleToJsonLine(const LabeledSample& s);

// Reads external model outputs ({"logits": [...]} or {"probs": [...]} plus
// "label"). Logits go through softmax; uncertainty is Shannon entropy.
std::vector<PredictionRecord> LoadLogits(const std::filesystem::path& path,
                                         int class_count);

// Deterministic shuffled partition of `ds` into parts sized by `fractions`.
std::vector<Dataset> SplitDataset(const Dataset& ds,
                                  std::span<const double> fractions,
                                  uint64_t seed);

// True if no (origin, uid) identity occurs in both datasets.
bool AreDisjoint(const Dataset& a, const Dataset& b);

}  // namespace uqshift

#endif  // UQSHIFT_DATAMODEL_H_
