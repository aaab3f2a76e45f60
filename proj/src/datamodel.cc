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

#include "uqshift/datamodel.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "uqshift/metrics.h"
#include "uqshift/nets.h"

namespace uqshift {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<DistributionTag::Kind, const char*>, 7>
    kTagNames = {{
        {DistributionTag::Kind::kInTrain, "in_train"},
        {DistributionTag::Kind::kInTest, "in_test"},
        {DistributionTag::Kind::kExtProt, "ext_prot"},
        {DistributionTag::Kind::kExt5ad, "ext_5ad"},
        {DistributionTag::Kind::kOodScc, "ood_scc"},
        {DistributionTag::Kind::kOodCad, "ood_cad"},
        {DistributionTag::Kind::kOodCxr, "ood_cxr"},
    }};

std::string LineError(const std::filesystem::path& path, size_t line,
                      const std::string& what) {
  std::ostringstream os;
  os << path.string() << ": line " << line << ": " << what;
  return os.str();
}

std::vector<double> ReadNumberArray(const json& value) {
  if (!value.is_array()) throw std::invalid_argument("expected an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) throw std::invalid_argument("non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

DistributionTag::DistributionTag(Kind kind) : kind_(kind) {
  if (kind == Kind::kCustom) {
    throw std::invalid_argument("custom tags need a name");
  }
  for (const auto& [k, n] : kTagNames) {
    if (k == kind) name_ = n;
  }
}

DistributionTag DistributionTag::Custom(std::string name) {
  if (name.empty()) throw std::invalid_argument("empty distribution tag");
  DistributionTag tag;
  tag.kind_ = Kind::kCustom;
  tag.name_ = std::move(name);
  return tag;
}

DistributionTag DistributionTag::Parse(std::string_view name) {
  for (const auto& [k, n] : kTagNames) {
    if (name == n) return DistributionTag(k);
  }
  return Custom(std::string(name));
}

const std::vector<DistributionTag>& EvaluationTags() {
  using K = DistributionTag::Kind;
  static const std::vector<DistributionTag> tags = {
      DistributionTag(K::kInTest),  DistributionTag(K::kExtProt),
      DistributionTag(K::kExt5ad),  DistributionTag(K::kOodScc),
      DistributionTag(K::kOodCad),  DistributionTag(K::kOodCxr),
  };
  return tags;
}

Dataset::Dataset(std::string name, int class_count, int feature_dim,
                 std::vector<LabeledSample> samples)
    : name_(std::move(name)),
      class_count_(class_count),
      feature_dim_(feature_dim),
      samples_(std::move(samples)) {
  if (samples_.empty()) throw std::invalid_argument("empty dataset");
  if (class_count_ < 1) throw std::invalid_argument("class_count must be >= 1");
  if (feature_dim_ < 1) throw std::invalid_argument("feature_dim must be >= 1");
  for (size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (static_cast<int>(s.features.size()) != feature_dim_) {
      throw std::invalid_argument("sample " + std::to_string(i) +
                                  ": feature dimension " +
                                  std::to_string(s.features.size()) +
                                  " != " + std::to_string(feature_dim_));
    }
    if (s.label < 0 || s.label >= class_count_) {
      throw std::invalid_argument("sample " + std::to_string(i) + ": label " +
                                  std::to_string(s.label) + " out of range");
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("sample " + std::to_string(i) +
                                    ": non-finite feature");
      }
    }
  }
}

std::vector<std::vector<size_t>> Dataset::IndicesByClass() const {
  std::vector<std::vector<size_t>> by_class(class_count_);
  for (size_t i = 0; i < samples_.size(); ++i) {
    by_class[samples_[i].label].push_back(i);
  }
  return by_class;
}

ProbabilityVector::ProbabilityVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("empty probability vector");
  double sum = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("probability outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
  }
}

int ProbabilityVector::Argmax() const {
  // max_element returns the first maximum, i.e. the lower index on ties.
  return static_cast<int>(std::max_element(values_.begin(), values_.end()) -
                          values_.begin());
}

Dataset LoadDataset(const std::filesystem::path& path,
                    std::optional<int> expected_dim,
                    std::optional<int> class_count) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabeledSample> samples;
  std::optional<int> dim = expected_dim;
  int max_label = -1;
  const std::string origin = path.stem().string();
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LabeledSample s;
    try {
      const json rec = json::parse(line);
      if (!rec.is_object()) throw std::invalid_argument("not an object");
      s.features = ReadNumberArray(rec.at("features"));
      const auto& label = rec.at("label");
      if (!label.is_number_integer()) {
        throw std::invalid_argument("label must be an integer");
      }
      s.label = label.get<int>();
      s.tag = DistributionTag::Parse(rec.at("dist").get<std::string>());
      if (rec.contains("meta")) s.meta = rec.at("meta").get<std::string>();
    } catch (const std::exception& e) {
      throw std::runtime_error(
          LineError(path, line_no, std::string("malformed record: ") + e.what()));
    }
    if (!dim) dim = static_cast<int>(s.features.size());
    if (static_cast<int>(s.features.size()) != *dim) {
      throw std::runtime_error(LineError(
          path, line_no,
          "feature dimension " + std::to_string(s.features.size()) +
              ", expected " + std::to_string(*dim)));
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) {
        throw std::runtime_error(LineError(path, line_no, "non-finite feature"));
      }
    }
    if (s.label < 0 || (class_count && s.label >= *class_count)) {
      throw std::runtime_error(LineError(
          path, line_no, "label " + std::to_string(s.label) + " out of range"));
    }
    max_label = std::max(max_label, s.label);
    s.origin = origin;
    s.uid = line_no - 1;
    samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw std::runtime_error(path.string() + ": empty dataset");
  }
  return Dataset(origin, class_count.value_or(max_label + 1), *dim,
                 std::move(samples));
}

std::string SampleToJsonLine(const LabeledSample& s) {
  json rec;
  rec["features"] = s.features;
  rec["label"] = s.label;
  rec["dist"] = s.tag.name();
  if (!s.meta.empty()) rec["meta"] = s.meta;
  return rec.dump();
}

void WriteDataset(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : ds.samples()) out << SampleToJsonLine(s) << '\n';
}

std::vector<PredictionRecord> LoadLogits(const std::filesystem::path& path,
                                         int class_count) {
  if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PredictionRecord r;
    r.method = "external";
    try {
      const json rec = json::parse(line);
      const bool has_logits = rec.contains("logits");
      const bool has_probs = rec.contains("probs");
      if (has_logits == has_probs) {
        throw std::invalid_argument("need exactly one of logits / probs");
      }
      std::vector<double> values =
          ReadNumberArray(rec.at(has_logits ? "logits" : "probs"));
      if (static_cast<int>(values.size()) != class_count) {
        throw std::invalid_argument("expected " + std::to_string(class_count) +
                                    " values, got " +
                                    std::to_string(values.size()));
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite value");
      }
      if (has_logits) {
        r.probs = Softmax(values);
      } else {
        double sum = 0.0;
        for (double v : values) {
          if (v < 0.0) throw std::invalid_argument("negative probability");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
          throw std::invalid_argument("probabilities sum to " +
                                      std::to_string(sum));
        }
        for (double& v : values) v /= sum;
        r.probs = ProbabilityVector(std::move(values));
      }
      r.true_label = rec.at("label").get<int>();
      if (r.true_label < 0 || r.true_label >= class_count) {
        throw std::invalid_argument("label out of range");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(LineError(path, line_no, e.what()));
    }
    r.uncertainty = ShannonEntropy(r.probs);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error(path.string() + ": no records");
  return out;
}

std::vector<Dataset> SplitDataset(const Dataset& ds,
                                  std::span<const double> fractions,
                                  uint64_t seed) {
  if (fractions.empty()) throw std::invalid_argument("no split fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("split fractions must be > 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions sum to " +
                                std::to_string(total));
  }
  std::vector<size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, /*stream_id=*/0x5B117);
  rng.Shuffle(order);

  std::vector<Dataset> parts;
  const double n = static_cast<double>(ds.size());
  double cumulative = 0.0;
  size_t begin = 0;
  for (size_t p = 0; p < fractions.size(); ++p) {
    cumulative += fractions[p];
    const size_t end = p + 1 == fractions.size()
                           ? ds.size()
                           : static_cast<size_t>(std::llround(cumulative * n));
    if (end <= begin) {
      throw std::invalid_argument("split part " + std::to_string(p) +
                                  " is empty");
    }
    std::vector<size_t> idx(order.begin() + begin, order.begin() + end);
    std::sort(idx.begin(), idx.end());
    std::vector<LabeledSample> samples;
    samples.reserve(idx.size());
    for (size_t i : idx) samples.push_back(ds[i]);
    parts.emplace_back(ds.name() + "/part" + std::to_string(p),
                       ds.class_count(), ds.feature_dim(), std::move(samples));
    begin = end;
  }
  return parts;
}

bool AreDisjoint(const Dataset& a, const Dataset& b) {
  std::set<std::pair<std::string, uint64_t>> ids;
  for (const auto& s : a.samples()) ids.emplace(s.origin, s.uid);
  for (const auto& s : b.samples()) {
    if (ids.contains({s.origin, s.uid})) return false;
  }
  return true;
}

}  // namespace uqshift
