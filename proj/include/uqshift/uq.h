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

#ifndef UQSHIFT_UQ_H_
#define UQSHIFT_UQ_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uqshift/datamodel.h"
#include "uqshift/metrics.h"
#include "uqshift/nets.h"
#include "uqshift/rng.h"

namespace uqshift {

inline constexpr char kMethodBaseline[] = "baseline";
inline constexpr char kMethodMcDropout[] = "mc_dropout";
inline constexpr char kMethodEnsemble[] = "ensemble";
inline constexpr char kMethodFsl[] = "fsl";

// ---------------------------------------------------------------------------
// Deterministic baseline and MC-dropout.

PredictionRecord BaselinePredict(const MlpModel& model,
                                 std::span<const double> x,
                                 int true_label = 0);

struct McDropoutConfig {
  int passes = 50;
  uint64_t seed = 0;
};

// Averages the softmax of `passes` stochastic forwards. Pass t draws its
// masks from RngStream(seed, t), so the same T sub-networks are applied to
// every input.
PredictionRecord McDropoutPredict(const MlpModel& model,
                                  std::span<const double> x,
                                  const McDropoutConfig& cfg,
                                  int true_label = 0);

// ---------------------------------------------------------------------------
// Deep ensemble.

struct EnsembleModel {
  std::vector<MlpModel> members;
};

struct MemberSpec {
  std::vector<int> layer_dims;
  std::vector<double> dropout_rates;
  TrainConfig train;
};

// Trains every member independently (in parallel). Member i is initialized
// from its TrainConfig seed.
EnsembleModel EnsembleTrain(std::span<const MemberSpec> specs,
                            const Dataset& train_ds, const Dataset& val_ds);

// Unweighted mean of member softmax outputs.
PredictionRecord EnsemblePredict(const EnsembleModel& ensemble,
                                 std::span<const double> x,
                                 int true_label = 0);

void SaveEnsemble(const EnsembleModel& ensemble,
                  const std::filesystem::path& dir);
EnsembleModel LoadEnsemble(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Prototypical few-shot classification.

struct Episode {
  // Episode classes in ascending label order; local class index i refers to
  // classes[i].
  std::vector<int> classes;
  std::vector<std::vector<LabeledSample>> support;  // [class][shot]
  std::vector<LabeledSample> queries;
  int way = 0;
  int shot = 0;

  // Position of `label` in `classes`, or -1.
  int LocalIndex(int label) const;
};

struct PrototypeSet {
  std::vector<int> classes;
  std::vector<Eigen::VectorXd> prototypes;
};

PrototypeSet ComputePrototypes(const MlpModel& model, const Episode& episode);
PrototypeSet ComputePrototypes(
    const MlpModel& model, const std::vector<int>& classes,
    const std::vector<std::vector<LabeledSample>>& support);

// Softmax over negative Euclidean distances between the query embedding and
// each prototype. Probabilities are ordered like protos.classes and
// true_label is the local index. Uncertainty is 1 - max p.
PredictionRecord ProtoPredictEmbedding(const Eigen::VectorXd& embedding,
                                       const PrototypeSet& protos,
                                       int true_label_local = 0);
PredictionRecord ProtoPredict(const MlpModel& model,
                              const PrototypeSet& protos,
                              std::span<const double> x,
                              int true_label_local = 0);

// Uniformly picks `way` classes, then `shot` support and `query_per_class`
// query samples per class without replacement.
Episode SampleEpisode(const Dataset& ds, int way, int shot,
                      int query_per_class, RngStream& rng);

// Mean query cross-entropy of one episode under softmax(-distance); adds its
// parameter gradient (through query embeddings and prototypes) to `grads`.
double EpisodeGradient(const MlpModel& model, const Episode& episode,
                       Gradients& grads);

struct EpisodicConfig {
  int way = 2;
  int shot = 5;
  int query_per_class = 5;
  int train_episodes = 1000;
  int val_every = 200;
  int val_episodes = 100;
  double learning_rate = 1e-4;
  double l2_weight = 5e-5;
  uint64_t seed = 0;
};

struct EpisodicTrainResult {
  MlpModel model;  // best-validation snapshot
  int best_episode = 0;  // 0 = the initial model
  double best_val_accuracy = 0.0;
  std::vector<std::pair<int, double>> val_history;  // (episode, accuracy)
};

// Episodic prototypical training. Validation episodes are drawn from
// `val_ds` (or `train_ds` when absent) with a fixed stream, so every
// checkpoint is scored on the same episodes.
EpisodicTrainResult EpisodicTrain(const MlpModel& init, const Dataset& train_ds,
                                  const EpisodicConfig& cfg,
                                  const Dataset* val_ds = nullptr);

// Mean query accuracy of `episodes` episodes drawn from `rng`.
double EpisodicAccuracy(const MlpModel& model, const Dataset& ds, int way,
                        int shot, int query_per_class, int episodes,
                        RngStream& rng);

struct EpisodicEvalResult {
  MetricBlock mean;  // per-task blocks averaged; n = total queries
  std::vector<MetricBlock> per_task;
  std::vector<std::vector<PredictionRecord>> task_records;
};

// Evaluates on `tasks` episodes sampled from a non-training dataset. Refuses
// (std::invalid_argument) if any sample is tagged in_train or in_test.
// `positive_class` is a dataset label; it must be drawn in every episode.
EpisodicEvalResult EpisodicEval(const MlpModel& model, const Dataset& test_ds,
                                int tasks, int way, int shot,
                                int query_per_class, int positive_class,
                                RngStream& rng, double target_tpr = 0.95);

}  // namespace uqshift

#endif  // UQSHIFT_UQ_H_
