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

#include "uqshift/harness.h"

#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <iostream>
#include <stdexcept>

#include "json.hpp"

namespace uqshift {
namespace {

using Kind = DistributionTag::Kind;

// Seed labels; every random component derives its seed from the master seed.
enum SeedLabel : uint64_t {
  kSeedSuite = 1,
  kSeedSplit = 11,
  kSeedBaselineInit = 101,
  kSeedBaselineTrain = 102,
  kSeedMcInit = 201,
  kSeedMcTrain = 202,
  kSeedMcPredict = 203,
  kSeedEnsemble = 300,
  kSeedFslInit = 401,
  kSeedFslTrain = 402,
  kSeedFslEval = 403,
};

std::vector<int> Dims(int input, const std::vector<int>& hidden, int classes) {
  std::vector<int> dims = {input};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(classes);
  return dims;
}

TrainConfig Seeded(TrainConfig train, uint64_t seed) {
  train.seed = seed;
  return train;
}

std::string Timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename F>
auto Stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what());
  }
}

void WriteRecords(const ReportCell& cell, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (size_t i = 0; i < cell.records.size(); ++i) {
    const PredictionRecord& r = cell.records[i];
    nlohmann::json rec;
    rec["method"] = cell.method;
    rec["dist"] = cell.tag.name();
    if (!cell.task_of_record.empty()) rec["task"] = cell.task_of_record[i];
    rec["probs"] = std::vector<double>(r.probs.values().begin(),
                                       r.probs.values().end());
    rec["label"] = r.true_label;
    rec["uncertainty"] = r.uncertainty;
    out << rec.dump() << '\n';
  }
}

}  // namespace

const std::vector<std::string>& Methods() {
  static const std::vector<std::string> methods = {
      kMethodBaseline, kMethodMcDropout, kMethodEnsemble, kMethodFsl};
  return methods;
}

const ReportCell* EvalReport::Find(std::string_view method,
                                   const DistributionTag& tag) const {
  for (const auto& cell : cells) {
    if (cell.method == method && cell.tag == tag) return &cell;
  }
  return nullptr;
}

MlpModel InitBaseline(const ExperimentConfig& cfg) {
  return InitModel(
      Dims(cfg.suite.base.feature_dim, cfg.baseline_hidden, 2),
      std::vector<double>(cfg.baseline_hidden.size(), 0.0),
      DeriveSeed(cfg.master_seed, kSeedBaselineInit));
}

MlpModel InitMcDropout(const ExperimentConfig& cfg) {
  return InitModel(Dims(cfg.suite.base.feature_dim, cfg.mc_hidden, 2),
                   cfg.mc_dropout_rates,
                   DeriveSeed(cfg.master_seed, kSeedMcInit));
}

MlpModel InitFslBackbone(const ExperimentConfig& cfg) {
  return InitModel(Dims(cfg.suite.base.feature_dim, cfg.fsl_hidden, 2),
                   std::vector<double>(cfg.fsl_hidden.size(), 0.0),
                   DeriveSeed(cfg.master_seed, kSeedFslInit));
}

std::vector<MemberSpec> EnsembleSpecs(const ExperimentConfig& cfg) {
  std::vector<MemberSpec> specs;
  for (size_t i = 0; i < cfg.ensemble_widths.size(); ++i) {
    MemberSpec spec;
    spec.layer_dims = {cfg.suite.base.feature_dim, cfg.ensemble_widths[i], 2};
    spec.dropout_rates = {0.0};
    spec.train =
        Seeded(cfg.ensemble_train, DeriveSeed(cfg.master_seed, kSeedEnsemble + i));
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::map<DistributionTag, Dataset> GenerateSuite(const ExperimentConfig& cfg) {
  return GenSuite(DeriveSeed(cfg.master_seed, kSeedSuite), cfg.suite);
}

std::pair<Dataset, Dataset> TrainValidationSplit(const Dataset& in_train,
                                                 const ExperimentConfig& cfg) {
  const double fractions[] = {1.0 - cfg.val_fraction, cfg.val_fraction};
  auto parts =
      SplitDataset(in_train, fractions, DeriveSeed(cfg.master_seed, kSeedSplit));
  return {std::move(parts[0]), std::move(parts[1])};
}

void TrainMethod(const std::string& method, const ExperimentConfig& cfg,
                 const Dataset& train, const Dataset& val,
                 TrainedMethods& models) {
  Stage("train " + method, [&] {
    if (method == kMethodBaseline) {
      models.baseline =
          Train(InitBaseline(cfg), train, val,
                Seeded(cfg.baseline_train,
                       DeriveSeed(cfg.master_seed, kSeedBaselineTrain)))
              .model;
    } else if (method == kMethodMcDropout) {
      MlpModel init = InitMcDropout(cfg);
      if (!init.HasDropout()) {
        std::cerr << "warning: MC-dropout model has no dropout; it will match "
                     "the baseline\n";
      }
      models.mc_dropout =
          Train(init, train, val,
                Seeded(cfg.mc_train, DeriveSeed(cfg.master_seed, kSeedMcTrain)))
              .model;
    } else if (method == kMethodEnsemble) {
      models.ensemble = EnsembleTrain(EnsembleSpecs(cfg), train, val);
    } else if (method == kMethodFsl) {
      EpisodicConfig ep = cfg.fsl;
      ep.seed = DeriveSeed(cfg.master_seed, kSeedFslTrain);
      models.fsl = EpisodicTrain(InitFslBackbone(cfg), train, ep, &val).model;
    } else {
      throw std::invalid_argument("unknown method '" + method + "'");
    }
    return 0;
  });
}

TrainedMethods TrainAll(const ExperimentConfig& cfg,
                        const std::map<DistributionTag, Dataset>& suite) {
  const Dataset& in_train = suite.at(DistributionTag(Kind::kInTrain));
  const auto [train, val] = TrainValidationSplit(in_train, cfg);
  TrainedMethods models;
  // Each task writes a distinct member of models.
  std::vector<std::future<void>> tasks;
  for (const std::string method :
       {kMethodBaseline, kMethodMcDropout, kMethodFsl}) {
    tasks.push_back(std::async(std::launch::async, [&, method] {
      TrainMethod(method, cfg, train, val, models);
    }));
  }
  TrainMethod(kMethodEnsemble, cfg, train, val, models);
  for (auto& t : tasks) t.get();
  return models;
}

void SaveMethod(const std::string& method, const TrainedMethods& models,
                const std::filesystem::path& dir) {
  if (method == kMethodBaseline) {
    SaveModel(models.baseline, dir / "baseline.mlp");
  } else if (method == kMethodMcDropout) {
    SaveModel(models.mc_dropout, dir / "mc_dropout.mlp");
  } else if (method == kMethodEnsemble) {
    SaveEnsemble(models.ensemble, dir / "ensemble");
  } else if (method == kMethodFsl) {
    SaveModel(models.fsl, dir / "fsl.mlp");
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
}

void LoadMethod(const std::string& method, const std::filesystem::path& dir,
                TrainedMethods& models) {
  if (method == kMethodBaseline) {
    models.baseline = LoadModel(dir / "baseline.mlp");
  } else if (method == kMethodMcDropout) {
    models.mc_dropout = LoadModel(dir / "mc_dropout.mlp");
  } else if (method == kMethodEnsemble) {
    models.ensemble = LoadEnsemble(dir / "ensemble");
  } else if (method == kMethodFsl) {
    models.fsl = LoadModel(dir / "fsl.mlp");
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
}

Dataset EvaluationSet(const std::map<DistributionTag, Dataset>& suite,
                      const DistributionTag& tag) {
  const auto it = suite.find(tag);
  if (it == suite.end()) {
    throw std::invalid_argument("suite has no dataset tagged " + tag.name());
  }
  if (tag.kind() != Kind::kExt5ad) return it->second;
  std::vector<LabeledSample> samples = it->second.samples();
  for (LabeledSample s : suite.at(DistributionTag(Kind::kInTest)).samples()) {
    if (s.label != 0) continue;
    s.tag = tag;
    s.meta = "pooled_normal";
    samples.push_back(std::move(s));
  }
  return Dataset(tag.name(), 2, it->second.feature_dim(), std::move(samples));
}

ReportCell EvaluateMethod(const std::string& method,
                          const TrainedMethods& models, const Dataset& ds,
                          const DistributionTag& tag,
                          const ExperimentConfig& cfg) {
  ReportCell cell;
  cell.method = method;
  cell.tag = tag;
  if (method == kMethodFsl) {
    if (tag.IsInDomain()) {
      throw std::invalid_argument(
          "few-shot evaluation is not defined on " + tag.name() +
          ": its support sets would come from the training distribution");
    }
    RngStream rng(DeriveSeed(cfg.master_seed, kSeedFslEval),
                  static_cast<uint64_t>(tag.kind()));
    EpisodicEvalResult eval = EpisodicEval(
        models.fsl, ds, cfg.fsl_test_tasks, cfg.fsl.way, cfg.fsl.shot,
        cfg.fsl_test_queries, /*positive_class=*/1, rng, cfg.target_tpr);
    for (size_t t = 0; t < eval.task_records.size(); ++t) {
      for (auto& r : eval.task_records[t]) {
        cell.records.push_back(std::move(r));
        cell.task_of_record.push_back(static_cast<int>(t));
      }
    }
    cell.block = eval.mean;
    return cell;
  }

  const McDropoutConfig mc{cfg.mc_passes,
                           DeriveSeed(cfg.master_seed, kSeedMcPredict)};
  for (const auto& s : ds.samples()) {
    if (method == kMethodBaseline) {
      cell.records.push_back(BaselinePredict(models.baseline, s.features, s.label));
    } else if (method == kMethodMcDropout) {
      cell.records.push_back(
          McDropoutPredict(models.mc_dropout, s.features, mc, s.label));
    } else if (method == kMethodEnsemble) {
      cell.records.push_back(EnsemblePredict(models.ensemble, s.features, s.label));
    } else {
      throw std::invalid_argument("unknown method '" + method + "'");
    }
  }
  cell.block = ComputeMetricBlock(cell.records, /*positive_class=*/1,
                                  cfg.target_tpr);
  return cell;
}

std::vector<OodDetectionRow> OodDetectionEval(
    const EvalReport& report, const DistributionTag& id_tag,
    const DistributionTag& ood_tag, double target_tpr,
    std::optional<DistributionTag> fsl_id_tag) {
  std::vector<OodDetectionRow> rows;
  bool any_ood = false;
  for (const std::string& method : Methods()) {
    const DistributionTag reference =
        method == kMethodFsl && fsl_id_tag ? *fsl_id_tag : id_tag;
    const ReportCell* id_cell = report.Find(method, reference);
    const ReportCell* ood_cell = report.Find(method, ood_tag);
    if (ood_cell != nullptr) any_ood = true;
    if (id_cell == nullptr || ood_cell == nullptr) continue;
    std::vector<ScoredSample> scored;
    for (const auto& r : id_cell->records) scored.push_back({r.uncertainty, false});
    for (const auto& r : ood_cell->records) scored.push_back({r.uncertainty, true});
    OodDetectionRow row;
    row.method = method;
    row.id_tag = reference;
    row.ood_tag = ood_tag;
    row.auroc = Auroc(scored);
    row.aupr = Aupr(scored);
    row.fpr = FprAtTpr(scored, target_tpr);
    rows.push_back(row);
  }
  if (!any_ood || rows.empty()) {
    throw std::invalid_argument("report lacks records for " + id_tag.name() +
                                " / " + ood_tag.name());
  }
  return rows;
}

EvalReport RunExperiment(const ExperimentConfig& cfg) {
  ValidateConfig(cfg);
  EvalReport report;
  report.started_at = Timestamp();
  report.seed = cfg.master_seed;
  report.config_hash = ConfigHash(cfg);
  const std::filesystem::path& out = cfg.output_dir;
  const bool persist = !out.empty();

  const auto suite = Stage("generate", [&] {
    auto s = GenerateSuite(cfg);
    if (persist) {
      std::filesystem::create_directories(out);
      std::ofstream(out / "config.cfg") << SerializeConfig(cfg);
      for (const auto& [tag, ds] : s) {
        WriteDataset(ds, out / "datasets" / (tag.name() + ".jsonl"));
      }
    }
    return s;
  });

  const TrainedMethods models = TrainAll(cfg, suite);
  if (persist) {
    Stage("save models", [&] {
      for (const std::string& method : Methods()) {
        SaveMethod(method, models, out / "models");
      }
      return 0;
    });
  }

  Stage("evaluate", [&] {
    if (persist) std::filesystem::create_directories(out / "records");
    for (const DistributionTag& tag : EvaluationTags()) {
      const Dataset ds = EvaluationSet(suite, tag);
      for (const std::string& method : Methods()) {
        if (method == kMethodFsl && tag.IsInDomain()) continue;
        report.cells.push_back(EvaluateMethod(method, models, ds, tag, cfg));
        if (persist) {
          WriteRecords(report.cells.back(),
                       out / "records" / (method + "__" + tag.name() + ".jsonl"));
        }
      }
    }
    return 0;
  });

  Stage("ood detection", [&] {
    const DistributionTag in_test(Kind::kInTest);
    const DistributionTag fsl_reference(Kind::kExtProt);
    for (Kind k : {Kind::kExt5ad, Kind::kOodScc, Kind::kOodCad, Kind::kOodCxr}) {
      auto rows = OodDetectionEval(report, in_test, DistributionTag(k),
                                   cfg.target_tpr, fsl_reference);
      report.ood_detection.insert(report.ood_detection.end(), rows.begin(),
                                  rows.end());
    }
    return 0;
  });

  report.finished_at = Timestamp();
  if (persist) Stage("write report", [&] {
      SaveReport(report, out);
      return 0;
    });
  return report;
}

}  // namespace uqshift
