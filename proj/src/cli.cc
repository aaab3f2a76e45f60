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

#include <filesystem>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "uqshift/harness.h"

namespace uqshift {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir = "uqshift_out";
};

ExperimentConfig ResolveConfig(const GlobalOptions& g) {
  ExperimentConfig cfg =
      g.config_path.empty() ? ExperimentConfig{} : LoadConfig(g.config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  cfg.output_dir = g.out_dir;
  ValidateConfig(cfg);
  return cfg;
}

void CheckMethod(const std::string& method) {
  for (const auto& m : Methods()) {
    if (m == method) return;
  }
  throw std::invalid_argument("unknown method '" + method + "'");
}

// A dataset argument is either an existing file or a suite tag name.
Dataset ResolveDataset(const std::string& arg, const ExperimentConfig& cfg) {
  if (fs::is_regular_file(arg)) {
    return LoadDataset(arg, cfg.suite.base.feature_dim, 2);
  }
  const DistributionTag tag = DistributionTag::Parse(arg);
  if (tag.kind() == DistributionTag::Kind::kCustom) {
    throw std::invalid_argument("no dataset file or suite tag named '" + arg +
                                "'");
  }
  return EvaluationSet(GenerateSuite(cfg), tag);
}

int CmdGen(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.output_dir / "datasets";
  for (const auto& [tag, ds] : GenerateSuite(cfg)) {
    WriteDataset(ds, dir / (tag.name() + ".jsonl"));
    out << tag.name() << ": " << ds.size() << " samples\n";
  }
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "config.cfg") << SerializeConfig(cfg);
  out << "datasets written to " << dir.string() << '\n';
  return 0;
}

int CmdTrain(const ExperimentConfig& cfg, const std::string& method,
             std::ostream& out) {
  CheckMethod(method);
  const auto suite = GenerateSuite(cfg);
  const auto [train, val] = TrainValidationSplit(
      suite.at(DistributionTag(DistributionTag::Kind::kInTrain)), cfg);
  TrainedMethods models;
  TrainMethod(method, cfg, train, val, models);
  const fs::path dir = cfg.output_dir / "models";
  SaveMethod(method, models, dir);
  out << "trained " << method << ", saved under " << dir.string() << '\n';
  return 0;
}

int CmdEval(const ExperimentConfig& cfg, const std::string& method,
            const std::string& dataset_arg, std::string models_dir,
            std::ostream& out) {
  CheckMethod(method);
  const Dataset ds = ResolveDataset(dataset_arg, cfg);
  const DistributionTag tag = ds.samples().front().tag;
  if (method == kMethodFsl && tag.IsInDomain()) {
    throw std::invalid_argument("fsl is not evaluated on " + tag.name() +
                                " (support sets would overlap training data)");
  }
  if (models_dir.empty()) models_dir = (cfg.output_dir / "models").string();
  TrainedMethods models;
  LoadMethod(method, models_dir, models);
  const ReportCell cell = EvaluateMethod(method, models, ds, tag, cfg);
  out << method << " on " << tag.name() << ": " << FormatMetricBlock(cell.block)
      << '\n';
  return 0;
}

int CmdRun(const ExperimentConfig& cfg, std::ostream& out) {
  const EvalReport report = RunExperiment(cfg);
  out << RenderReport(report, ReportStyle::kTable2).text;
  out << "report written to " << cfg.output_dir.string() << '\n';
  return 0;
}

int CmdScoreLogits(const std::string& path, int classes, int positive,
                   double target_tpr, std::ostream& out) {
  if (positive < 0 || positive >= classes) {
    throw std::invalid_argument("positive class out of range");
  }
  const auto records = LoadLogits(path, classes);
  out << FormatMetricBlock(ComputeMetricBlock(records, positive, target_tpr))
      << '\n';
  return 0;
}

int CmdReport(const std::string& run_dir, const std::string& style_name,
              const std::string& output, std::ostream& out) {
  const ReportStyle style = ParseReportStyle(style_name);
  const EvalReport report = LoadReport(run_dir);
  if (output.empty()) {
    out << RenderReport(report, style).text;
  } else {
    WriteRenderedReport(report, style, output);
    out << "wrote " << output << '\n';
  }
  return 0;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Predictive uncertainty under dataset shift", "uqshift"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the master seed");
  app.add_option("--out", g.out_dir, "Output directory")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen", "Write the synthetic suite datasets");
  gen->fallthrough();

  std::string method;
  auto* train = app.add_subcommand("train", "Train one method");
  train->fallthrough();
  train->add_option("method", method, "baseline | mc_dropout | ensemble | fsl")
      ->required();

  std::string dataset, models_dir;
  auto* eval = app.add_subcommand("eval", "Evaluate one method on one dataset");
  eval->fallthrough();
  eval->add_option("method", method, "baseline | mc_dropout | ensemble | fsl")
      ->required();
  eval->add_option("--dataset", dataset, "Suite tag or dataset file")
      ->required();
  eval->add_option("--models", models_dir, "Models directory (default <out>/models)");

  auto* run = app.add_subcommand("run", "Train and evaluate the full grid");
  run->fallthrough();

  std::string logits_path;
  int classes = 0;
  int positive = 1;
  double target_tpr = 0.95;
  auto* score = app.add_subcommand("score-logits",
                                   "Metrics over an external logits file");
  score->fallthrough();
  score->add_option("file", logits_path, "Line-delimited logits or probs")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--classes", classes, "Number of classes")
      ->required()
      ->check(CLI::PositiveNumber);
  score->add_option("--positive", positive, "Positive class")
      ->capture_default_str();
  score->add_option("--target-tpr", target_tpr, "TPR operating point for FPR")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  std::string run_dir, style, output;
  auto* report = app.add_subcommand("report", "Render a table from a run");
  report->fallthrough();
  report->add_option("--run", run_dir, "Run directory (default <out>)");
  report->add_option("--style", style, "table2 | table3 | table4 | table5")
      ->required();
  report->add_option("--output", output, "Write to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*score) return CmdScoreLogits(logits_path, classes, positive, target_tpr, out);
    if (*report) return CmdReport(run_dir.empty() ? g.out_dir : run_dir, style, output, out);
    const ExperimentConfig cfg = ResolveConfig(g);
    if (*gen) return CmdGen(cfg, out);
    if (*train) return CmdTrain(cfg, method, out);
    if (*eval) return CmdEval(cfg, method, dataset, models_dir, out);
    if (*run) return CmdRun(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace uqshift
