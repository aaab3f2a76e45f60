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

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqshift/harness.h"

namespace uqshift {
namespace {

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("config key '" + key + "': not a number: " +
                                text);
  }
  return v;
}

int64_t ParseInt(const std::string& key, const std::string& text) {
  int64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("config key '" + key +
                                "': not an integer: " + text);
  }
  return v;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

// One config key: how to print it and how to assign it.
struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Member>
Field DoubleField(std::string key, Member member) {
  return {key,
          [member](const ExperimentConfig& c) { return FormatDouble(member(c)); },
          [member, key](ExperimentConfig& c, const std::string& v) {
            member(c) = ParseDouble(key, v);
          }};
}

template <typename Member>
Field IntField(std::string key, Member member) {
  return {key,
          [member](const ExperimentConfig& c) {
            return std::to_string(member(c));
          },
          [member, key](ExperimentConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            member(c) = static_cast<T>(ParseInt(key, v));
          }};
}

template <typename Member>
Field IntListField(std::string key, Member member) {
  return {key,
          [member](const ExperimentConfig& c) {
            std::string out;
            for (int v : member(c)) {
              if (!out.empty()) out += ", ";
              out += std::to_string(v);
            }
            return out;
          },
          [member, key](ExperimentConfig& c, const std::string& v) {
            std::vector<int> values;
            for (const auto& item : SplitList(v)) {
              values.push_back(static_cast<int>(ParseInt(key, item)));
            }
            member(c) = std::move(values);
          }};
}

template <typename Member>
Field DoubleListField(std::string key, Member member) {
  return {key,
          [member](const ExperimentConfig& c) {
            std::string out;
            for (double v : member(c)) {
              if (!out.empty()) out += ", ";
              out += FormatDouble(v);
            }
            return out;
          },
          [member, key](ExperimentConfig& c, const std::string& v) {
            std::vector<double> values;
            for (const auto& item : SplitList(v)) {
              values.push_back(ParseDouble(key, item));
            }
            member(c) = std::move(values);
          }};
}

#define UQ_REF(type, expr) \
  [](auto& c) -> type& { return const_cast<ExperimentConfig&>(c).expr; }

void AddTrainFields(std::vector<Field>& fields, const std::string& prefix,
                    TrainConfig ExperimentConfig::*train) {
  auto ref = [train](auto& c) -> TrainConfig& {
    return const_cast<ExperimentConfig&>(c).*train;
  };
  fields.push_back(DoubleField(prefix + ".learning_rate", [ref](auto& c) -> double& {
    return ref(c).learning_rate;
  }));
  fields.push_back(IntField(prefix + ".epochs",
                            [ref](auto& c) -> int& { return ref(c).epochs; }));
  fields.push_back(IntField(prefix + ".batch_size",
                            [ref](auto& c) -> int& { return ref(c).batch_size; }));
  fields.push_back(IntField(prefix + ".plateau_patience", [ref](auto& c) -> int& {
    return ref(c).plateau_patience;
  }));
  fields.push_back(DoubleField(prefix + ".lr_decay_factor", [ref](auto& c) -> double& {
    return ref(c).lr_decay_factor;
  }));
  fields.push_back(DoubleField(prefix + ".l2_weight", [ref](auto& c) -> double& {
    return ref(c).l2_weight;
  }));
}


const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(IntField("seed", UQ_REF(uint64_t, master_seed)));
    f.push_back(DoubleField("val_fraction", UQ_REF(double, val_fraction)));
    f.push_back(DoubleField("target_tpr", UQ_REF(double, target_tpr)));

    f.push_back(IntField("suite.feature_dim", UQ_REF(int, suite.base.feature_dim)));
    f.push_back(DoubleField("suite.separation", UQ_REF(double, suite.base.separation)));
    f.push_back(IntField("suite.n_train_per_class", UQ_REF(int, suite.n_train_per_class)));
    f.push_back(IntField("suite.n_test_per_class", UQ_REF(int, suite.n_test_per_class)));
    f.push_back(IntField("suite.n_shift_per_class", UQ_REF(int, suite.n_shift_per_class)));
    f.push_back(IntField("suite.subtypes", UQ_REF(int, suite.subtypes)));
    f.push_back(DoubleField("suite.subtype_spread", UQ_REF(double, suite.subtype_spread)));
    f.push_back(DoubleField("suite.covariate_scale", UQ_REF(double, suite.covariate_scale)));
    f.push_back(DoubleField("suite.covariate_angle", UQ_REF(double, suite.covariate_angle)));
    f.push_back(DoubleField("suite.covariate_offset", UQ_REF(double, suite.covariate_offset)));
    f.push_back(DoubleField("suite.scc_along", UQ_REF(double, suite.scc_along)));
    f.push_back(DoubleField("suite.scc_orthogonal", UQ_REF(double, suite.scc_orthogonal)));
    f.push_back(DoubleField("suite.cad_along", UQ_REF(double, suite.cad_along)));
    f.push_back(DoubleField("suite.cad_orthogonal", UQ_REF(double, suite.cad_orthogonal)));
    f.push_back(DoubleField("suite.modality_class_offset",
                            UQ_REF(double, suite.modality.class_offset)));
    f.push_back(DoubleField("suite.modality_warp", UQ_REF(double, suite.modality.warp)));
    f.push_back(DoubleListField("suite.modality_axis_scales",
                                UQ_REF(std::vector<double>, suite.modality.axis_scales)));

    f.push_back(IntListField("baseline.hidden", UQ_REF(std::vector<int>, baseline_hidden)));
    AddTrainFields(f, "baseline", &ExperimentConfig::baseline_train);
    f.push_back(IntListField("mc_dropout.hidden", UQ_REF(std::vector<int>, mc_hidden)));
    f.push_back(DoubleListField("mc_dropout.rates",
                                UQ_REF(std::vector<double>, mc_dropout_rates)));
    f.push_back(IntField("mc_dropout.passes", UQ_REF(int, mc_passes)));
    AddTrainFields(f, "mc_dropout", &ExperimentConfig::mc_train);
    f.push_back(IntListField("ensemble.widths", UQ_REF(std::vector<int>, ensemble_widths)));
    AddTrainFields(f, "ensemble", &ExperimentConfig::ensemble_train);

    f.push_back(IntListField("fsl.hidden", UQ_REF(std::vector<int>, fsl_hidden)));
    f.push_back(IntField("fsl.way", UQ_REF(int, fsl.way)));
    f.push_back(IntField("fsl.shot", UQ_REF(int, fsl.shot)));
    f.push_back(IntField("fsl.query_per_class", UQ_REF(int, fsl.query_per_class)));
    f.push_back(IntField("fsl.train_episodes", UQ_REF(int, fsl.train_episodes)));
    f.push_back(IntField("fsl.val_every", UQ_REF(int, fsl.val_every)));
    f.push_back(IntField("fsl.val_episodes", UQ_REF(int, fsl.val_episodes)));
    f.push_back(DoubleField("fsl.learning_rate", UQ_REF(double, fsl.learning_rate)));
    f.push_back(DoubleField("fsl.l2_weight", UQ_REF(double, fsl.l2_weight)));
    f.push_back(IntField("fsl.test_tasks", UQ_REF(int, fsl_test_tasks)));
    f.push_back(IntField("fsl.test_queries", UQ_REF(int, fsl_test_queries)));
    return f;
  }();
  return fields;
}

#undef UQ_REF

}  // namespace

void ValidateConfig(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid config: " + what);
  };
  if (cfg.suite.base.feature_dim < 2) fail("suite.feature_dim must be >= 2");
  if (!(cfg.suite.base.separation > 0.0)) fail("suite.separation must be > 0");
  if (cfg.suite.n_train_per_class < 2 || cfg.suite.n_test_per_class < 1 ||
      cfg.suite.n_shift_per_class < 1) {
    fail("suite sizes too small");
  }
  if (cfg.suite.subtypes < 2) fail("suite.subtypes must be >= 2");
  if (!cfg.suite.modality.axis_scales.empty() &&
      static_cast<int>(cfg.suite.modality.axis_scales.size()) !=
          cfg.suite.base.feature_dim) {
    fail("suite.modality_axis_scales needs feature_dim entries");
  }
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    fail("val_fraction must lie in (0, 1)");
  }
  if (!(cfg.target_tpr > 0.0 && cfg.target_tpr <= 1.0)) {
    fail("target_tpr must lie in (0, 1]");
  }
  for (const auto* train :
       {&cfg.baseline_train, &cfg.mc_train, &cfg.ensemble_train}) {
    try {
      ValidateTrainConfig(*train);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  for (const auto* hidden : {&cfg.baseline_hidden, &cfg.mc_hidden}) {
    for (int h : *hidden) {
      if (h < 1) fail("hidden widths must be >= 1");
    }
  }
  if (cfg.mc_hidden.size() != cfg.mc_dropout_rates.size()) {
    fail("mc_dropout.rates needs one rate per hidden layer");
  }
  if (cfg.mc_passes < 1) fail("mc_dropout.passes must be >= 1");
  if (cfg.ensemble_widths.size() < 2) fail("ensemble needs >= 2 members");
  for (int w : cfg.ensemble_widths) {
    if (w < 1) fail("ensemble widths must be >= 1");
  }
  if (cfg.fsl_hidden.empty()) fail("fsl.hidden needs at least one layer");
  if (cfg.fsl.way < 2 || cfg.fsl.shot < 1 || cfg.fsl.query_per_class < 1 ||
      cfg.fsl.train_episodes < 0 || cfg.fsl.val_every < 1 ||
      cfg.fsl.val_episodes < 1 || cfg.fsl_test_tasks < 1 ||
      cfg.fsl_test_queries < 1) {
    fail("invalid fsl episode settings");
  }
}

ExperimentConfig ParseConfig(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_version = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key == "config_version") {
      if (ParseInt(key, value) != kConfigVersion) {
        throw std::invalid_argument("unsupported config_version " + value);
      }
      saw_version = true;
      continue;
    }
    bool known = false;
    for (const Field& field : Fields()) {
      if (field.key == key) {
        field.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    }
  }
  if (!saw_version) {
    throw std::invalid_argument("config is missing config_version");
  }
  ValidateConfig(cfg);
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string SerializeConfig(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "config_version = " << kConfigVersion << '\n';
  for (const Field& field : Fields()) {
    out << field.key << " = " << field.get(cfg) << '\n';
  }
  return out.str();
}

std::string ConfigHash(const ExperimentConfig& cfg) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : SerializeConfig(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace uqshift
