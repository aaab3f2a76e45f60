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

#ifndef UQSHIFT_NETS_H_
#define UQSHIFT_NETS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uqshift/datamodel.h"
#include "uqshift/rng.h"

namespace uqshift {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// Fully connected ReLU classifier with (inverted) dropout after every hidden
// layer. layer_dims = [input, hidden..., classes].
struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<double> dropout_rates;  // one per hidden layer
  uint64_t seed = 0;
  std::vector<DenseLayer> layers;

  int input_dim() const { return layer_dims.front(); }
  int class_count() const { return layer_dims.back(); }
  int hidden_count() const { return static_cast<int>(layer_dims.size()) - 2; }
  int embedding_dim() const { return layer_dims[layer_dims.size() - 2]; }
  size_t ParameterCount() const;
  bool HasDropout() const;
  bool AllFinite() const;

  bool operator==(const MlpModel& other) const;
};

// Throws std::invalid_argument on inconsistent shapes.
void ValidateModel(const MlpModel& model);

// Weights ~ N(0, 1/fan_in), biases zero.
MlpModel InitModel(std::vector<int> layer_dims,
                   std::vector<double> dropout_rates, uint64_t seed);

// Everything backward() needs from one forward pass.
struct ForwardCache {
  std::vector<int> layer_dims;
  // activations[0] is the input; activations[l] is the (masked, rescaled)
  // output of hidden layer l, i.e. the input of layer l.
  std::vector<Eigen::VectorXd> activations;
  std::vector<Eigen::VectorXd> pre_activations;  // per hidden layer
  // Per hidden layer multiplier: 0 or 1/(1-rate) for dropped/kept units.
  // Empty vectors in deterministic mode.
  std::vector<Eigen::VectorXd> masks;
  Eigen::VectorXd logits;
};

struct ForwardPass {
  Eigen::VectorXd logits;
  ForwardCache cache;
};

// Deterministic forward: no masking.
ForwardPass Forward(const MlpModel& model, std::span<const double> features);
// Stochastic forward: Bernoulli(1 - rate) mask per hidden unit drawn from
// `rng`, kept units scaled by 1/(1 - rate).
ForwardPass Forward(const MlpModel& model, std::span<const double> features,
                    RngStream& rng);

// Post-ReLU activation of the last hidden layer, no dropout.
Eigen::VectorXd Embed(const MlpModel& model, std::span<const double> features);

// Max-subtracted softmax.
ProbabilityVector Softmax(std::span<const double> logits);
ProbabilityVector Softmax(const Eigen::VectorXd& logits);

// Natural-log cross-entropy, probabilities clamped at 1e-12.
double CrossEntropyLoss(const ProbabilityVector& probs, int true_label);

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients ZerosLike(const MlpModel& model);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  double MaxAbs() const;
};

// Gradient of CE(softmax(logits), true_label) + (l2/2) * ||theta||^2.
// The L2 term contributes l2 * theta to every parameter's gradient.
Gradients Backward(const MlpModel& model, const ForwardCache& cache,
                   int true_label, double l2_weight = 0.0);
// Backpropagates an arbitrary upstream gradient on the logits.
Gradients BackwardFromLogits(const MlpModel& model, const ForwardCache& cache,
                             const Eigen::VectorXd& grad_logits);
// Backpropagates a gradient on the last hidden activation (the embedding).
// Output-layer gradients are zero.
Gradients BackwardFromEmbedding(const MlpModel& model,
                                const ForwardCache& cache,
                                const Eigen::VectorXd& grad_embedding);
// Adds l2 * theta to `grads`.
void AddL2(const MlpModel& model, double l2_weight, Gradients& grads);

// Adam with bias correction.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const MlpModel& model, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);
  void Step(MlpModel& model, const Gradients& grads, double learning_rate);
  int64_t steps() const { return steps_; }

 private:
  double beta1_, beta2_, epsilon_;
  int64_t steps_ = 0;
  Gradients m_, v_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  int plateau_patience = 5;
  double lr_decay_factor = 0.1;
  double l2_weight = 0.0;
  uint64_t seed = 0;
};

void ValidateTrainConfig(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  MlpModel model;  // best-validation snapshot
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 = the initial model
  double best_val_accuracy = 0.0;
};

// Mini-batch Adam on cross-entropy with dropout active, per-epoch shuffling,
// reduce-on-plateau learning rate and best-snapshot selection.
TrainResult Train(const MlpModel& init, const Dataset& train_ds,
                  const Dataset& val_ds, const TrainConfig& cfg);

double DeterministicAccuracy(const MlpModel& model, const Dataset& ds);

// Binary container; layout documented in the README.
void SaveModel(const MlpModel& model, const std::filesystem::path& path);
MlpModel LoadModel(const std::filesystem::path& path);

}  // namespace uqshift

#endif  // UQSHIFT_NETS_H_
