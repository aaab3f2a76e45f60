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

#ifndef UQSHIFT_HARNESS_H_
#define UQSHIFT_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uqshift/datamodel.h"
#include "uqshift/metrics.h"
#include "uqshift/nets.h"
#include "uqshift/shiftgen.h"
#include "uqshift/uq.h"

namespace uqshift {

inline constexpr int kConfigVersion = 1;

// Every knob of a full run. Defaults are the shipped desk-scale setup.
struct ExperimentConfig {
  uint64_t master_seed = 7;
  SuiteParams suite;
  double val_fraction = 0.2;

  std::vector<int> baseline_hidden = {32, 32};
  TrainConfig baseline_train{.learning_rate = 0.01};

  std::vector<int> mc_hidden = {32, 32};
  std::vector<double> mc_dropout_rates = {0.25, 0.5};
  TrainConfig mc_train{.learning_rate = 0.01};
  int mc_passes = 50;

  std::vector<int> ensemble_widths = {8, 12, 16, 24, 32};
  TrainConfig ensemble_train{.learning_rate = 0.01};

  std::vector<int> fsl_hidden = {32, 16};
  EpisodicConfig fsl;
  int fsl_test_tasks = 20;
  int fsl_test_queries = 15;

  // The 0.95 operating point for FPR.
  double target_tpr = 0.95;

  std::filesystem::path output_dir;
};

// Throws std::invalid_argument describing the first invalid field.
void ValidateConfig(const ExperimentConfig& cfg);

// Key-value text ("key = value", '#' comments). Unknown keys are errors.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
// Canonical text with every key; ParseConfig(SerializeConfig(c)) == c.
std::string SerializeConfig(const ExperimentConfig& cfg);
// FNV-1a of the canonical serialization, as 16 hex digits.
std::string ConfigHash(const ExperimentConfig& cfg);

// Per-method member specs derived from the config.
MlpModel InitBaseline(const ExperimentConfig& cfg);
MlpModel InitMcDropout(const ExperimentConfig& cfg);
MlpModel InitFslBackbone(const ExperimentConfig& cfg);
std::vector<MemberSpec> EnsembleSpecs(const ExperimentConfig& cfg);

struct ReportCell {
  std::string method;
  DistributionTag tag;
  MetricBlock block;
  std::vector<PredictionRecord> records;
  std::vector<int> task_of_record;  // FSL only: episode index per record
};

struct OodDetectionRow {
  std::string method;
  DistributionTag id_tag;
  DistributionTag ood_tag;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr = 0.0;
};

struct EvalReport {
  std::vector<ReportCell> cells;
  std::vector<OodDetectionRow> ood_detection;
  std::string config_hash;
  uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;

  const ReportCell* Find(std::string_view method,
                         const DistributionTag& tag) const;
};

// Method names in report order.
const std::vector<std::string>& Methods();

struct TrainedMethods {
  MlpModel baseline;
  MlpModel mc_dropout;
  EnsembleModel ensemble;
  MlpModel fsl;
};

// Train/validation split of in_train shared by every method.
std::map<DistributionTag, Dataset> GenerateSuite(const ExperimentConfig& cfg);

std::pair<Dataset, Dataset> TrainValidationSplit(const Dataset& in_train,
                                                 const ExperimentConfig& cfg);

// Trains one method on the given split and stores it in models.
void TrainMethod(const std::string& method, const ExperimentConfig& cfg,
                 const Dataset& train, const Dataset& val,
                 TrainedMethods& models);

TrainedMethods TrainAll(const ExperimentConfig& cfg,
                        const std::map<DistributionTag, Dataset>& suite);

// The dataset a given tag is scored on. ext_5ad holds only disease
// samples, so the internal-test normals are pooled in (re-tagged ext_5ad).
// Files under a models/ directory: baseline.mlp, mc_dropout.mlp, fsl.mlp,
// ensemble/.
void SaveMethod(const std::string& method, const TrainedMethods& models,
                const std::filesystem::path& dir);
void LoadMethod(const std::string& method, const std::filesystem::path& dir,
                TrainedMethods& models);

Dataset EvaluationSet(const std::map<DistributionTag, Dataset>& suite,
                      const DistributionTag& tag);

// Scores one probabilistic method on one dataset.
ReportCell EvaluateMethod(const std::string& method,
                          const TrainedMethods& models, const Dataset& ds,
                          const DistributionTag& tag,
                          const ExperimentConfig& cfg);

// Generate -> train -> evaluate -> persist (when cfg.output_dir is set).
EvalReport RunExperiment(const ExperimentConfig& cfg);

// Uncertainty as an OOD score: positives are the samples of `ood_tag`,
// negatives those of `id_tag`. Methods lacking either cell are skipped
// unless `fsl_id_tag` supplies FSL's in-distribution reference.
std::vector<OodDetectionRow> OodDetectionEval(
    const EvalReport& report, const DistributionTag& id_tag,
    const DistributionTag& ood_tag, double target_tpr = 0.95,
    std::optional<DistributionTag> fsl_id_tag = std::nullopt);

enum class ReportStyle { kTable2, kTable3, kTable4, kTable5 };
ReportStyle ParseReportStyle(std::string_view name);

struct RenderedTable {
  std::string text;   // aligned plain text
  std::string jsonl;  // one {"method","dist","metric","value"} per line
};

RenderedTable RenderReport(const EvalReport& report, ReportStyle style);
// Writes <path> (text) and <path>.jsonl.
void WriteRenderedReport(const EvalReport& report, ReportStyle style,
                         const std::filesystem::path& path);

// Machine-readable form of every metric block.
std::string ReportBody(const EvalReport& report);
void SaveReport(const EvalReport& report, const std::filesystem::path& dir);
// Rebuilds metric blocks from <dir>/report.jsonl (records are not loaded).
EvalReport LoadReport(const std::filesystem::path& dir);

std::string FormatMetricBlock(const MetricBlock& block);

// Entry point for the command-line tool. Returns the process exit code:
// 0 success, 1 usage error, 2 runtime failure.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace uqshift

#endif  // UQSHIFT_HARNESS_H_
