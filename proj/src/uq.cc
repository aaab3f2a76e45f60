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

#include "uqshift/uq.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace uqshift {
namespace {

// Incremental mean; adding a value equal to the running mean leaves it
// bit-identical, so averaging identical vectors reproduces them exactly.
void AccumulateMean(std::vector<double>& mean, std::span<const double> value,
                    int count_after) {
  for (size_t c = 0; c < mean.size(); ++c) {
    mean[c] += (value[c] - mean[c]) / static_cast<double>(count_after);
  }
}

ProbabilityVector Renormalized(std::vector<double> p) {
  // Guards the 1e-9 unit-sum invariant against accumulated rounding.
  double sum = 0.0;
  for (double v : p) sum += v;
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& v : p) v /= sum;
  }
  return ProbabilityVector(std::move(p));
}

PredictionRecord MakeRecord(ProbabilityVector probs, int true_label,
                            const char* method) {
  PredictionRecord r;
  r.uncertainty = ShannonEntropy(probs);
  r.probs = std::move(probs);
  r.true_label = true_label;
  r.method = method;
  return r;
}

double Distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm();
}

}  // namespace

PredictionRecord BaselinePredict(const MlpModel& model,
                                 std::span<const double> x, int true_label) {
  return MakeRecord(Softmax(Forward(model, x).logits), true_label,
                    kMethodBaseline);
}

PredictionRecord McDropoutPredict(const MlpModel& model,
                                  std::span<const double> x,
                                  const McDropoutConfig& cfg, int true_label) {
  if (cfg.passes < 1) throw std::invalid_argument("MC dropout needs passes >= 1");
  std::vector<double> mean(model.class_count(), 0.0);
  for (int t = 0; t < cfg.passes; ++t) {
    RngStream rng(cfg.seed, static_cast<uint64_t>(t));
    const ProbabilityVector p = Softmax(Forward(model, x, rng).logits);
    AccumulateMean(mean, p.values(), t + 1);
  }
  return MakeRecord(Renormalized(std::move(mean)), true_label,
                    kMethodMcDropout);
}

EnsembleModel EnsembleTrain(std::span<const MemberSpec> specs,
                            const Dataset& train_ds, const Dataset& val_ds) {
  if (specs.size() < 2) {
    throw std::invalid_argument("an ensemble needs at least 2 members");
  }
  std::vector<std::future<MlpModel>> jobs;
  for (const MemberSpec& spec : specs) {
    jobs.push_back(std::async(std::launch::async, [&spec, &train_ds, &val_ds] {
      const MlpModel init =
          InitModel(spec.layer_dims, spec.dropout_rates, spec.train.seed);
      return Train(init, train_ds, val_ds, spec.train).model;
    }));
  }
  EnsembleModel ensemble;
  for (size_t i = 0; i < jobs.size(); ++i) {
    try {
      ensemble.members.push_back(jobs[i].get());
    } catch (const std::exception& e) {
      // Drain the remaining jobs before reporting.
      for (size_t j = i + 1; j < jobs.size(); ++j) {
        try {
          jobs[j].get();
        } catch (...) {
        }
      }
      throw std::runtime_error("ensemble member " + std::to_string(i) + ": " +
                               e.what());
    }
  }
  return ensemble;
}

PredictionRecord EnsemblePredict(const EnsembleModel& ensemble,
                                 std::span<const double> x, int true_label) {
  if (ensemble.members.empty()) throw std::invalid_argument("empty ensemble");
  const int classes = ensemble.members.front().class_count();
  std::vector<double> mean(classes, 0.0);
  int count = 0;
  for (const MlpModel& member : ensemble.members) {
    if (member.class_count() != classes) {
      throw std::invalid_argument("ensemble members disagree on class count");
    }
    const ProbabilityVector p = Softmax(Forward(member, x).logits);
    AccumulateMean(mean, p.values(), ++count);
  }
  return MakeRecord(Renormalized(std::move(mean)), true_label,
                    kMethodEnsemble);
}

void SaveEnsemble(const EnsembleModel& ensemble,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["members"] = nlohmann::json::array();
  for (size_t i = 0; i < ensemble.members.size(); ++i) {
    const std::string file = "member_" + std::to_string(i) + ".mlp";
    SaveModel(ensemble.members[i], dir / file);
    manifest["members"].push_back(file);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

EnsembleModel LoadEnsemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no ensemble manifest in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.at("version").get<int>() != 1) {
    throw std::runtime_error("unsupported ensemble manifest version");
  }
  EnsembleModel ensemble;
  for (const auto& file : manifest.at("members")) {
    ensemble.members.push_back(LoadModel(dir / file.get<std::string>()));
  }
  if (ensemble.members.empty()) throw std::runtime_error("empty ensemble");
  return ensemble;
}

int Episode::LocalIndex(int label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

PrototypeSet ComputePrototypes(
    const MlpModel& model, const std::vector<int>& classes,
    const std::vector<std::vector<LabeledSample>>& support) {
  if (classes.empty() || classes.size() != support.size()) {
    throw std::invalid_argument("support set does not match the class list");
  }
  PrototypeSet protos;
  protos.classes = classes;
  for (size_t c = 0; c < support.size(); ++c) {
    if (support[c].empty()) {
      throw std::invalid_argument("class " + std::to_string(classes[c]) +
                                  " has no support samples");
    }
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.embedding_dim());
    for (const auto& s : support[c]) sum += Embed(model, s.features);
    protos.prototypes.push_back(sum / static_cast<double>(support[c].size()));
  }
  return protos;
}

PrototypeSet ComputePrototypes(const MlpModel& model, const Episode& episode) {
  return ComputePrototypes(model, episode.classes, episode.support);
}

PredictionRecord ProtoPredictEmbedding(const Eigen::VectorXd& embedding,
                                       const PrototypeSet& protos,
                                       int true_label_local) {
  if (protos.prototypes.empty()) throw std::invalid_argument("no prototypes");
  std::vector<double> neg_dist;
  neg_dist.reserve(protos.prototypes.size());
  for (const auto& z : protos.prototypes) {
    if (z.size() != embedding.size()) {
      throw std::invalid_argument("embedding / prototype dimension mismatch");
    }
    neg_dist.push_back(-Distance(embedding, z));
  }
  PredictionRecord r;
  r.probs = Softmax(neg_dist);
  r.uncertainty = 1.0 - r.probs.Max();
  r.true_label = true_label_local;
  r.method = kMethodFsl;
  return r;
}

PredictionRecord ProtoPredict(const MlpModel& model,
                              const PrototypeSet& protos,
                              std::span<const double> x,
                              int true_label_local) {
  return ProtoPredictEmbedding(Embed(model, x), protos, true_label_local);
}

Episode SampleEpisode(const Dataset& ds, int way, int shot,
                      int query_per_class, RngStream& rng) {
  if (way < 1 || shot < 1 || query_per_class < 0) {
    throw std::invalid_argument("invalid episode shape");
  }
  const auto by_class = ds.IndicesByClass();
  std::vector<int> available;
  for (int c = 0; c < ds.class_count(); ++c) {
    if (!by_class[c].empty()) available.push_back(c);
  }
  if (static_cast<int>(available.size()) < way) {
    throw std::invalid_argument("dataset " + ds.name() + " has only " +
                                std::to_string(available.size()) +
                                " classes, episode needs " +
                                std::to_string(way));
  }
  rng.Shuffle(available);
  std::vector<int> classes(available.begin(), available.begin() + way);
  std::sort(classes.begin(), classes.end());

  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.classes = classes;
  const size_t needed = static_cast<size_t>(shot + query_per_class);
  for (int c : classes) {
    std::vector<size_t> idx = by_class[c];
    if (idx.size() < needed) {
      throw std::invalid_argument(
          "class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
          " samples, episode needs " + std::to_string(needed));
    }
    rng.Shuffle(idx);
    std::vector<LabeledSample> support;
    for (int k = 0; k < shot; ++k) support.push_back(ds[idx[k]]);
    ep.support.push_back(std::move(support));
    for (size_t k = shot; k < needed; ++k) ep.queries.push_back(ds[idx[k]]);
  }
  return ep;
}

double EpisodicAccuracy(const MlpModel& model, const Dataset& ds, int way,
                        int shot, int query_per_class, int episodes,
                        RngStream& rng) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const Episode ep = SampleEpisode(ds, way, shot, query_per_class, rng);
    const PrototypeSet protos = ComputePrototypes(model, ep);
    size_t correct = 0;
    for (const auto& q : ep.queries) {
      const PredictionRecord r = ProtoPredict(model, protos, q.features);
      correct += protos.classes[r.predicted()] == q.label;
    }
    total += static_cast<double>(correct) / ep.queries.size();
  }
  return total / episodes;
}

double EpisodeGradient(const MlpModel& model, const Episode& ep,
                       Gradients& grads) {
  const int way = static_cast<int>(ep.classes.size());
  std::vector<std::vector<ForwardPass>> support_passes(way);
  std::vector<Eigen::VectorXd> protos(way);
  for (int c = 0; c < way; ++c) {
    protos[c] = Eigen::VectorXd::Zero(model.embedding_dim());
    for (const auto& s : ep.support[c]) {
      support_passes[c].push_back(Forward(model, s.features));
      protos[c] += support_passes[c].back().cache.activations.back();
    }
    protos[c] /= static_cast<double>(ep.support[c].size());
  }

  std::vector<Eigen::VectorXd> grad_protos(
      way, Eigen::VectorXd::Zero(model.embedding_dim()));
  const double inv_q = 1.0 / static_cast<double>(ep.queries.size());
  double loss = 0.0;
  for (const auto& q : ep.queries) {
    const ForwardPass pass = Forward(model, q.features);
    const Eigen::VectorXd& e = pass.cache.activations.back();
    std::vector<double> neg_dist(way);
    std::vector<double> dist(way);
    for (int c = 0; c < way; ++c) {
      dist[c] = Distance(e, protos[c]);
      neg_dist[c] = -dist[c];
    }
    const ProbabilityVector p = Softmax(neg_dist);
    const int y = ep.LocalIndex(q.label);
    loss += CrossEntropyLoss(p, y) * inv_q;

    Eigen::VectorXd grad_e = Eigen::VectorXd::Zero(e.size());
    for (int c = 0; c < way; ++c) {
      // dL/d(dist_c) = -(p_c - [c == y]); d(dist_c)/de = (e - z_c) / dist_c.
      const double g_dist = -(p[c] - (c == y ? 1.0 : 0.0)) * inv_q;
      if (dist[c] < 1e-12) continue;
      const Eigen::VectorXd unit = (e - protos[c]) / dist[c];
      grad_e += g_dist * unit;
      grad_protos[c] -= g_dist * unit;
    }
    grads += BackwardFromEmbedding(model, pass.cache, grad_e);
  }
  for (int c = 0; c < way; ++c) {
    const Eigen::VectorXd g_support =
        grad_protos[c] / static_cast<double>(ep.support[c].size());
    for (const auto& pass : support_passes[c]) {
      grads += BackwardFromEmbedding(model, pass.cache, g_support);
    }
  }
  return loss;
}

EpisodicTrainResult EpisodicTrain(const MlpModel& init, const Dataset& train_ds,
                                  const EpisodicConfig& cfg,
                                  const Dataset* val_ds) {
  ValidateModel(init);
  if (init.hidden_count() < 1) {
    throw std::invalid_argument("FSL backbone needs a hidden layer");
  }
  if (cfg.train_episodes < 0 || cfg.val_every < 1 || cfg.val_episodes < 1) {
    throw std::invalid_argument("invalid episodic schedule");
  }
  if (!(cfg.learning_rate >= 0.0) || !(cfg.l2_weight >= 0.0)) {
    throw std::invalid_argument("invalid episodic optimizer settings");
  }
  const Dataset& val = val_ds != nullptr ? *val_ds : train_ds;
  const RngStream val_stream(cfg.seed, /*stream_id=*/0xFA11);
  auto validate = [&](const MlpModel& m) {
    RngStream rng = val_stream;
    return EpisodicAccuracy(m, val, cfg.way, cfg.shot, cfg.query_per_class,
                            cfg.val_episodes, rng);
  };

  EpisodicTrainResult result;
  result.model = init;
  if (cfg.train_episodes == 0) return result;

  result.best_val_accuracy = validate(init);
  result.val_history.emplace_back(0, result.best_val_accuracy);
  MlpModel model = init;
  AdamOptimizer adam(model);
  RngStream episode_rng(cfg.seed, /*stream_id=*/0xE915);
  for (int step = 1; step <= cfg.train_episodes; ++step) {
    const Episode ep = SampleEpisode(train_ds, cfg.way, cfg.shot,
                                     cfg.query_per_class, episode_rng);
    Gradients grads = Gradients::ZerosLike(model);
    const double loss = EpisodeGradient(model, ep, grads);
    AddL2(model, cfg.l2_weight, grads);
    adam.Step(model, grads, cfg.learning_rate);
    if (!std::isfinite(loss) || !model.AllFinite()) {
      throw std::runtime_error("episodic training diverged at episode " +
                               std::to_string(step));
    }
    if (step % cfg.val_every == 0 || step == cfg.train_episodes) {
      const double acc = validate(model);
      result.val_history.emplace_back(step, acc);
      if (acc > result.best_val_accuracy) {
        result.best_val_accuracy = acc;
        result.best_episode = step;
        result.model = model;
      }
    }
  }
  return result;
}

EpisodicEvalResult EpisodicEval(const MlpModel& model, const Dataset& test_ds,
                                int tasks, int way, int shot,
                                int query_per_class, int positive_class,
                                RngStream& rng, double target_tpr) {
  for (const auto& s : test_ds.samples()) {
    if (s.tag.IsInDomain()) {
      throw std::invalid_argument(
          "few-shot evaluation refuses " + s.tag.name() +
          " data: support sets must come from an unseen distribution");
    }
  }
  if (tasks < 1) throw std::invalid_argument("need at least one task");
  EpisodicEvalResult result;
  for (int t = 0; t < tasks; ++t) {
    const Episode ep = SampleEpisode(test_ds, way, shot, query_per_class, rng);
    const int positive_local = ep.LocalIndex(positive_class);
    if (positive_local < 0) {
      throw std::invalid_argument("episode does not contain the positive class");
    }
    const PrototypeSet protos = ComputePrototypes(model, ep);
    std::vector<PredictionRecord> records;
    for (const auto& q : ep.queries) {
      records.push_back(
          ProtoPredict(model, protos, q.features, ep.LocalIndex(q.label)));
    }
    result.per_task.push_back(
        ComputeMetricBlock(records, positive_local, target_tpr));
    result.task_records.push_back(std::move(records));
  }
  result.mean = AverageBlocks(result.per_task);
  return result;
}

}  // namespace uqshift
