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

#ifndef UQSHIFT_RNG_H_
#define UQSHIFT_RNG_H_

#include <cstdint>
#include <vector>

namespace uqshift {

// Counter-based random stream. The draw sequence is a pure function of
// (seed, stream_id, counter), so a copied stream replays the same draws and
// independent streams can be handed to parallel workers without coordination.
class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t seed, uint64_t stream_id, uint64_t counter = 0)
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t counter() const { return counter_; }

  uint64_t NextU64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform();
  // Uniform integer in [0, n). n must be > 0.
  uint64_t UniformInt(uint64_t n);
  // Standard normal via Box-Muller; consumes two draws.
  double Normal();
  bool Bernoulli(double p) { return Uniform() < p; }

  // Independent child stream keyed by this stream's identity and `sub`.
  // Does not advance this stream.
  RngStream Derive(uint64_t sub) const;

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  bool operator==(const RngStream&) const = default;

 private:
  uint64_t seed_ = 0;
  uint64_t stream_id_ = 0;
  uint64_t counter_ = 0;
};

uint64_t SplitMix64(uint64_t x);

// Hash-combines a seed with a label, for deriving per-component seeds.
uint64_t DeriveSeed(uint64_t seed, uint64_t label);

}  // namespace uqshift

#endif  // UQSHIFT_RNG_H_
