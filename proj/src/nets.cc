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

#include "uqshift/nets.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace uqshift {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are written in host byte order");

constexpr char kModelMagic[8] = {'U', 'Q', 'S', 'H', 'M', 'L', 'P', '\0'};
constexpr uint32_t kModelVersion = 1;

ForwardPass ForwardImpl(const MlpModel& model, std::span<const double> features,
                        RngStream* rng) {
  if (static_cast<int>(features.size()) != model.input_dim()) {
    throw std::invalid_argument(
        "input dimension " + std::to_string(features.size()) + " != " +
        std::to_string(model.input_dim()));
  }
  const int num_layers = static_cast<int>(model.layers.size());
  ForwardPass pass;
  ForwardCache& cache = pass.cache;
  cache.layer_dims = model.layer_dims;
  cache.activations.reserve(num_layers);
  cache.activations.emplace_back(
      Eigen::Map<const Eigen::VectorXd>(features.data(), features.size()));
  for (int l = 0; l + 1 < num_layers; ++l) {
    const DenseLayer& layer = model.layers[l];
    Eigen::VectorXd z = layer.weight * cache.activations.back() + layer.bias;
    Eigen::VectorXd h = z.cwiseMax(0.0);
    Eigen::VectorXd mask;
    const double rate = model.dropout_rates[l];
    if (rng != nullptr && rate > 0.0) {
      const double keep_scale = 1.0 / (1.0 - rate);
      mask.resize(h.size());
      for (Eigen::Index j = 0; j < h.size(); ++j) {
        mask[j] = rng->Bernoulli(1.0 - rate) ? keep_scale : 0.0;
      }
      h = h.cwiseProduct(mask);
    }
    cache.pre_activations.push_back(std::move(z));
    cache.masks.push_back(std::move(mask));
    cache.activations.push_back(std::move(h));
  }
  const DenseLayer& out = model.layers.back();
  cache.logits = out.weight * cache.activations.back() + out.bias;
  if (!cache.logits.allFinite()) {
    throw std::runtime_error("non-finite activation in forward pass");
  }
  pass.logits = cache.logits;
  return pass;
}

void CheckCache(const MlpModel& model, const ForwardCache& cache) {
  if (cache.layer_dims != model.layer_dims ||
      cache.activations.size() != model.layers.size() ||
      cache.logits.size() != model.class_count()) {
    throw std::invalid_argument("forward cache does not match the model");
  }
}

// Gradient w.r.t. hidden layer k's pre-activation, given the gradient
// w.r.t. its (masked) output.
Eigen::VectorXd ThroughHidden(const ForwardCache& cache, int k,
                              Eigen::VectorXd g) {
  if (cache.masks[k].size() > 0) g = g.cwiseProduct(cache.masks[k]);
  const Eigen::VectorXd relu_grad =
      (cache.pre_activations[k].array() > 0.0).cast<double>().matrix();
  return g.cwiseProduct(relu_grad);
}

// g_pre is the gradient w.r.t. the pre-activation of layer `top`.
Gradients Backprop(const MlpModel& model, const ForwardCache& cache, int top,
                   Eigen::VectorXd g_pre) {
  Gradients grads = Gradients::ZerosLike(model);
  for (int l = top; l >= 0; --l) {
    grads.weight[l].noalias() = g_pre * cache.activations[l].transpose();
    grads.bias[l] = g_pre;
    if (l == 0) break;
    Eigen::VectorXd g_act = model.layers[l].weight.transpose() * g_pre;
    g_pre = ThroughHidden(cache, l - 1, std::move(g_act));
  }
  return grads;
}

template <typename T>
void WritePod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("model file truncated");
  }
  return value;
}

}  // namespace

size_t MlpModel::ParameterCount() const {
  size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool MlpModel::HasDropout() const {
  return std::any_of(dropout_rates.begin(), dropout_rates.end(),
                     [](double r) { return r > 0.0; });
}

bool MlpModel::AllFinite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (layer_dims != other.layer_dims || dropout_rates != other.dropout_rates ||
      seed != other.seed || layers.size() != other.layers.size()) {
    return false;
  }
  for (size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight != other.layers[l].weight ||
        layers[l].bias != other.layers[l].bias) {
      return false;
    }
  }
  return true;
}

void ValidateModel(const MlpModel& model) {
  if (model.layer_dims.size() < 2) {
    throw std::invalid_argument("layer_dims needs at least input and output");
  }
  for (int d : model.layer_dims) {
    if (d <= 0) throw std::invalid_argument("layer dimensions must be > 0");
  }
  if (static_cast<int>(model.dropout_rates.size()) != model.hidden_count()) {
    throw std::invalid_argument("need one dropout rate per hidden layer");
  }
  for (double r : model.dropout_rates) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw std::invalid_argument("dropout rates must lie in [0, 1)");
    }
  }
  if (model.layers.size() + 1 != model.layer_dims.size()) {
    throw std::invalid_argument("layer count does not match layer_dims");
  }
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (layer.weight.rows() != model.layer_dims[l + 1] ||
        layer.weight.cols() != model.layer_dims[l] ||
        layer.bias.size() != model.layer_dims[l + 1]) {
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " shape does not chain with layer_dims");
    }
  }
  if (!model.AllFinite()) {
    throw std::invalid_argument("model has non-finite parameters");
  }
}

MlpModel InitModel(std::vector<int> layer_dims,
                   std::vector<double> dropout_rates, uint64_t seed) {
  MlpModel model;
  model.layer_dims = std::move(layer_dims);
  model.dropout_rates = std::move(dropout_rates);
  model.seed = seed;
  if (model.layer_dims.size() < 2) {
    throw std::invalid_argument("layer_dims needs at least input and output");
  }
  for (int d : model.layer_dims) {
    if (d <= 0) throw std::invalid_argument("layer dimensions must be > 0");
  }
  RngStream rng(seed, /*stream_id=*/0x1A17);
  for (size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const int fan_in = model.layer_dims[l];
    const int fan_out = model.layer_dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * rng.Normal();
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    model.layers.push_back(std::move(layer));
  }
  ValidateModel(model);
  return model;
}

ForwardPass Forward(const MlpModel& model, std::span<const double> features) {
  return ForwardImpl(model, features, nullptr);
}

ForwardPass Forward(const MlpModel& model, std::span<const double> features,
                    RngStream& rng) {
  return ForwardImpl(model, features, &rng);
}

Eigen::VectorXd Embed(const MlpModel& model, std::span<const double> features) {
  if (model.hidden_count() < 1) {
    throw std::invalid_argument("model has no hidden layer to embed with");
  }
  ForwardPass pass = Forward(model, features);
  return std::move(pass.cache.activations.back());
}

ProbabilityVector Softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return ProbabilityVector(std::move(p));
}

ProbabilityVector Softmax(const Eigen::VectorXd& logits) {
  return Softmax(std::span<const double>(logits.data(), logits.size()));
}

double CrossEntropyLoss(const ProbabilityVector& probs, int true_label) {
  if (true_label < 0 || true_label >= static_cast<int>(probs.size())) {
    throw std::invalid_argument("label out of range");
  }
  return -std::log(std::max(probs[true_label], 1e-12));
}

Gradients Gradients::ZerosLike(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers) {
    g.weight.push_back(
        Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (size_t l = 0; l < weight.size(); ++l) {
    weight[l] *= s;
    bias[l] *= s;
  }
  return *this;
}

double Gradients::MaxAbs() const {
  double m = 0.0;
  for (size_t l = 0; l < weight.size(); ++l) {
    if (weight[l].size() > 0) m = std::max(m, weight[l].cwiseAbs().maxCoeff());
    if (bias[l].size() > 0) m = std::max(m, bias[l].cwiseAbs().maxCoeff());
  }
  return m;
}

Gradients BackwardFromLogits(const MlpModel& model, const ForwardCache& cache,
                             const Eigen::VectorXd& grad_logits) {
  CheckCache(model, cache);
  if (grad_logits.size() != model.class_count()) {
    throw std::invalid_argument("logit gradient has the wrong size");
  }
  return Backprop(model, cache, static_cast<int>(model.layers.size()) - 1,
                  grad_logits);
}

Gradients BackwardFromEmbedding(const MlpModel& model,
                                const ForwardCache& cache,
                                const Eigen::VectorXd& grad_embedding) {
  CheckCache(model, cache);
  if (model.hidden_count() < 1) {
    throw std::invalid_argument("model has no hidden layer");
  }
  if (grad_embedding.size() != model.embedding_dim()) {
    throw std::invalid_argument("embedding gradient has the wrong size");
  }
  const int top = model.hidden_count() - 1;
  return Backprop(model, cache, top, ThroughHidden(cache, top, grad_embedding));
}

void AddL2(const MlpModel& model, double l2_weight, Gradients& grads) {
  if (l2_weight == 0.0) return;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    grads.weight[l] += l2_weight * model.layers[l].weight;
    grads.bias[l] += l2_weight * model.layers[l].bias;
  }
}

Gradients Backward(const MlpModel& model, const ForwardCache& cache,
                   int true_label, double l2_weight) {
  CheckCache(model, cache);
  if (true_label < 0 || true_label >= model.class_count()) {
    throw std::invalid_argument("label out of range");
  }
  const ProbabilityVector probs = Softmax(cache.logits);
  Eigen::VectorXd g(probs.size());
  for (size_t c = 0; c < probs.size(); ++c) g[c] = probs[c];
  g[true_label] -= 1.0;
  Gradients grads = BackwardFromLogits(model, cache, g);
  AddL2(model, l2_weight, grads);
  return grads;
}

AdamOptimizer::AdamOptimizer(const MlpModel& model, double beta1, double beta2,
                             double epsilon)
    : beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      m_(Gradients::ZerosLike(model)),
      v_(Gradients::ZerosLike(model)) {}

void AdamOptimizer::Step(MlpModel& model, const Gradients& grads,
                         double learning_rate) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + epsilon_);
  };
  for (size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weight, m_.weight[l], v_.weight[l], grads.weight[l]);
    update(model.layers[l].bias, m_.bias[l], v_.bias[l], grads.bias[l]);
  }
}

void ValidateTrainConfig(const TrainConfig& cfg) {
  // A zero rate is accepted: it freezes the parameters.
  if (!(cfg.learning_rate >= 0.0)) {
    throw std::invalid_argument("learning_rate must be >= 0");
  }
  if (!(cfg.lr_decay_factor > 0.0 && cfg.lr_decay_factor < 1.0)) {
    throw std::invalid_argument("lr_decay_factor must lie in (0, 1)");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.plateau_patience < 1) {
    throw std::invalid_argument("plateau_patience must be >= 1");
  }
  if (!(cfg.l2_weight >= 0.0)) throw std::invalid_argument("l2_weight < 0");
}

double DeterministicAccuracy(const MlpModel& model, const Dataset& ds) {
  size_t correct = 0;
  for (const auto& s : ds.samples()) {
    const ForwardPass pass = Forward(model, s.features);
    Eigen::Index best;
    pass.logits.maxCoeff(&best);
    if (static_cast<int>(best) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult Train(const MlpModel& init, const Dataset& train_ds,
                  const Dataset& val_ds, const TrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  ValidateModel(init);
  for (const Dataset* ds : {&train_ds, &val_ds}) {
    if (ds->class_count() != init.class_count() ||
        ds->feature_dim() != init.input_dim()) {
      throw std::invalid_argument("dataset " + ds->name() +
                                  " does not match the model's shape");
    }
  }

  TrainResult result;
  MlpModel model = init;
  AdamOptimizer adam(model);
  double lr = cfg.learning_rate;
  result.model = model;
  result.best_val_accuracy = DeterministicAccuracy(model, val_ds);
  int epochs_without_gain = 0;

  std::vector<size_t> order(train_ds.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng(cfg.seed, 2 * static_cast<uint64_t>(epoch));
    RngStream dropout_rng(cfg.seed, 2 * static_cast<uint64_t>(epoch) + 1);
    shuffle_rng.Shuffle(order);

    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      Gradients batch = Gradients::ZerosLike(model);
      for (size_t i = begin; i < end; ++i) {
        const LabeledSample& s = train_ds[order[i]];
        const ForwardPass pass = Forward(model, s.features, dropout_rng);
        const ProbabilityVector probs = Softmax(pass.logits);
        loss_sum += CrossEntropyLoss(probs, s.label);
        Eigen::VectorXd g(probs.size());
        for (size_t c = 0; c < probs.size(); ++c) g[c] = probs[c];
        g[s.label] -= 1.0;
        batch += BackwardFromLogits(model, pass.cache, g);
      }
      batch *= 1.0 / static_cast<double>(end - begin);
      AddL2(model, cfg.l2_weight, batch);
      adam.Step(model, batch, lr);
    }
    const double mean_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(mean_loss) || !model.AllFinite()) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << " (loss " << mean_loss
         << ")";
      throw std::runtime_error(os.str());
    }

    const double val_acc = DeterministicAccuracy(model, val_ds);
    result.history.push_back({epoch, mean_loss, val_acc, lr});
    if (val_acc > result.best_val_accuracy) {
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      result.model = model;
      epochs_without_gain = 0;
    } else if (++epochs_without_gain >= cfg.plateau_patience) {
      lr *= cfg.lr_decay_factor;
      epochs_without_gain = 0;
    }
  }
  return result;
}

void SaveModel(const MlpModel& model, const std::filesystem::path& path) {
  ValidateModel(model);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  WritePod(out, kModelVersion);
  WritePod(out, static_cast<uint32_t>(model.layer_dims.size()));
  for (int d : model.layer_dims) WritePod(out, static_cast<uint32_t>(d));
  for (double r : model.dropout_rates) WritePod(out, r);
  WritePod(out, model.seed);
  for (const auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        WritePod(out, layer.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      WritePod(out, layer.bias[r]);
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MlpModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[sizeof(kModelMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + ": not a model file");
  }
  const auto version = ReadPod<uint32_t>(in);
  if (version != kModelVersion) {
    throw std::runtime_error(path.string() + ": unsupported model version " +
                             std::to_string(version));
  }
  const auto n_dims = ReadPod<uint32_t>(in);
  if (n_dims < 2 || n_dims > 64) {
    throw std::runtime_error(path.string() + ": corrupt layer count");
  }
  MlpModel model;
  for (uint32_t i = 0; i < n_dims; ++i) {
    const auto d = ReadPod<uint32_t>(in);
    if (d == 0 || d > (1u << 20)) {
      throw std::runtime_error(path.string() + ": corrupt layer dimension");
    }
    model.layer_dims.push_back(static_cast<int>(d));
  }
  for (uint32_t i = 0; i + 2 < n_dims; ++i) {
    model.dropout_rates.push_back(ReadPod<double>(in));
  }
  model.seed = ReadPod<uint64_t>(in);
  for (size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    DenseLayer layer;
    layer.weight.resize(model.layer_dims[l + 1], model.layer_dims[l]);
    layer.bias.resize(model.layer_dims[l + 1]);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = ReadPod<double>(in);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias[r] = ReadPod<double>(in);
    }
    model.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path.string() + ": trailing bytes");
  }
  try {
    ValidateModel(model);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace uqshift
