// Copyright 2026 The natts Authors
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

// Parameter storage and the small set of layers the model is built from.
// Layers hold indices into a ParamStore and read their weights at call time,
// so one layer description works with any set of parameter values (training
// leaves, perturbed copies for gradient checks, loaded checkpoints).

#ifndef NATTS_NN_HPP_
#define NATTS_NN_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "natts/rng.hpp"
#include "natts/tensor.hpp"

namespace natts {

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  /// Xavier-uniform matrix [fan_in, fan_out].
  std::size_t AddXavier(const std::string& name, std::size_t fan_in,
                        std::size_t fan_out, Rng& rng);
  std::size_t AddConstant(const std::string& name, Shape shape, double value,
                          bool trainable = true);
  std::size_t AddUniform(const std::string& name, Shape shape, double limit,
                         Rng& rng);

  const Tensor& operator[](std::size_t index) const {
    return entries_[index].value;
  }
  const Entry& entry(std::size_t index) const { return entries_[index]; }
  std::size_t size() const { return entries_.size(); }
  std::size_t Find(const std::string& name) const;
  bool Contains(const std::string& name) const {
    return index_.count(name) != 0;
  }

  /// Replaces a value (shape must match). Trainable entries become fresh
  /// leaves that require a gradient.
  void Set(std::size_t index, std::vector<double> values);
  void Set(std::size_t index, Tensor value);
  /// Stores `value` itself, keeping its graph connections.
  void Bind(std::size_t index, const Tensor& value);

  /// Fresh leaves for every trainable entry (gradients cleared).
  void ResetLeaves();
  std::size_t TrainableCount() const;

 private:
  std::size_t Add(Entry entry);

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;

  static Linear Create(ParamStore& ps, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng);
  Tensor operator()(const ParamStore& ps, const Tensor& x) const;
  std::size_t in_dim(const ParamStore& ps) const { return ps[weight].rows(); }
  std::size_t out_dim(const ParamStore& ps) const { return ps[weight].cols(); }
};

struct Conv1dLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;

  static Conv1dLayer Create(ParamStore& ps, const std::string& name,
                            std::size_t in, std::size_t out, std::size_t kernel,
                            Rng& rng);
  Tensor operator()(const ParamStore& ps, const Tensor& x) const {
    return Conv1d(x, ps[weight], ps[bias]);
  }
};

/// Per-channel normalisation with running mean/variance buffers (used in
/// place of batch normalisation). The buffers act as constants inside the
/// graph; training updates them from observed statistics after each step.
struct RunningNorm {
  std::size_t mean = 0;
  std::size_t var = 0;
  std::size_t gain = 0;
  std::size_t bias = 0;

  static RunningNorm Create(ParamStore& ps, const std::string& name,
                            std::size_t channels);
  Tensor operator()(const ParamStore& ps, const Tensor& x) const;
  /// Exponential moving update: buf = decay * buf + (1 - decay) * observed.
  void Update(ParamStore& ps, std::span<const double> observed_mean,
              std::span<const double> observed_var, double decay) const;
};

/// Per-channel mean and (biased) variance over the rows of `x`.
void ChannelStats(const Tensor& x, std::vector<double>* mean,
                  std::vector<double>* var);

/// Gated recurrent cell with zoneout. In training mode each hidden unit keeps
/// its previous value with probability `zoneout`; in evaluation mode the two
/// are mixed by the expected keep rate.
struct Gru {
  std::size_t w_input = 0;   // [in, 3H]
  std::size_t w_hidden = 0;  // [H, 3H]
  std::size_t b_input = 0;   // [3H]
  std::size_t b_hidden = 0;  // [3H]

  static Gru Create(ParamStore& ps, const std::string& name, std::size_t in,
                    std::size_t hidden, Rng& rng);
  std::size_t hidden_dim(const ParamStore& ps) const {
    return ps[w_hidden].rows();
  }

  /// Input-side gate pre-activations for every row at once: x W + b.
  Tensor InputGates(const ParamStore& ps, const Tensor& x) const;
  /// One step from precomputed input gates [1, 3H] and state [1, H].
  Tensor Step(const ParamStore& ps, const Tensor& input_gates,
              const Tensor& h, double zoneout, bool training, Rng* rng) const;
  /// Full pass over the rows of `x` ([T, in] -> [T, H]).
  Tensor Run(const ParamStore& ps, const Tensor& x, bool reverse,
             double zoneout, bool training, Rng rng) const;
};

struct BiGru {
  Gru forward;
  Gru backward;

  static BiGru Create(ParamStore& ps, const std::string& name, std::size_t in,
                      std::size_t hidden, Rng& rng);
  /// [T, in] -> [T, 2H], forward states then backward states.
  Tensor operator()(const ParamStore& ps, const Tensor& x, double zoneout,
                    bool training, Rng rng) const;
};

}  // namespace natts

#endif  // NATTS_NN_HPP_
