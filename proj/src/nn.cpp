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

#include "natts/nn.hpp"

#include <cmath>
#include <utility>

namespace natts {

// ---- ParamStore ---------------------------------------------------------------

std::size_t ParamStore::Add(Entry entry) {
  if (index_.count(entry.name)) {
    throw Error("duplicate parameter name: " + entry.name);
  }
  const std::size_t id = entries_.size();
  index_.emplace(entry.name, id);
  entries_.push_back(std::move(entry));
  return id;
}

std::size_t ParamStore::AddXavier(const std::string& name, std::size_t fan_in,
                                  std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return AddUniform(name, {fan_in, fan_out}, limit, rng);
}

std::size_t ParamStore::AddUniform(const std::string& name, Shape shape,
                                   double limit, Rng& rng) {
  std::vector<double> v(NumElements(shape));
  Rng stream = rng.Split(index_.size() + 1);
  for (auto& x : v) x = (2.0 * stream.Uniform() - 1.0) * limit;
  return Add({name, Tensor::FromVector(std::move(shape), std::move(v), true),
              true});
}

std::size_t ParamStore::AddConstant(const std::string& name, Shape shape,
                                    double value, bool trainable) {
  return Add({name, Tensor::Full(std::move(shape), value, trainable),
              trainable});
}

std::size_t ParamStore::Find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

void ParamStore::Set(std::size_t index, std::vector<double> values) {
  Entry& e = entries_.at(index);
  e.value = Tensor::FromVector(e.value.shape(), std::move(values), e.trainable);
}

void ParamStore::Set(std::size_t index, Tensor value) {
  Entry& e = entries_.at(index);
  if (value.shape() != e.value.shape()) {
    throw Error("parameter " + e.name + ": shape " +
                ShapeString(value.shape()) + " does not match " +
                ShapeString(e.value.shape()));
  }
  e.value = Tensor::FromVector(value.shape(), value.ToVector(), e.trainable);
}

void ParamStore::Bind(std::size_t index, const Tensor& value) {
  Entry& e = entries_.at(index);
  if (value.shape() != e.value.shape()) {
    throw Error("parameter " + e.name + ": shape " +
                ShapeString(value.shape()) + " does not match " +
                ShapeString(e.value.shape()));
  }
  e.value = value;
}

void ParamStore::ResetLeaves() {
  for (auto& e : entries_) {
    e.value = Tensor::FromVector(e.value.shape(), e.value.ToVector(),
                                 e.trainable);
  }
}

std::size_t ParamStore::TrainableCount() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.trainable ? e.value.numel() : 0;
  return n;
}

// ---- layers ---------------------------------------------------------------------

Linear Linear::Create(ParamStore& ps, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng) {
  Linear l;
  l.weight = ps.AddXavier(name + ".w", in, out, rng);
  l.bias = ps.AddConstant(name + ".b", {out}, 0.0);
  return l;
}

Tensor Linear::operator()(const ParamStore& ps, const Tensor& x) const {
  return Add(MatMul(x, ps[weight]), ps[bias]);
}

Conv1dLayer Conv1dLayer::Create(ParamStore& ps, const std::string& name,
                                std::size_t in, std::size_t out,
                                std::size_t kernel, Rng& rng) {
  Conv1dLayer c;
  const double limit =
      std::sqrt(6.0 / static_cast<double>(kernel * in + out));
  c.weight = ps.AddUniform(name + ".w", {kernel * in, out}, limit, rng);
  c.bias = ps.AddConstant(name + ".b", {out}, 0.0);
  return c;
}

RunningNorm RunningNorm::Create(ParamStore& ps, const std::string& name,
                                std::size_t channels) {
  RunningNorm n;
  n.mean = ps.AddConstant(name + ".running_mean", {channels}, 0.0, false);
  n.var = ps.AddConstant(name + ".running_var", {channels}, 1.0, false);
  n.gain = ps.AddConstant(name + ".gain", {channels}, 1.0);
  n.bias = ps.AddConstant(name + ".bias", {channels}, 0.0);
  return n;
}

Tensor RunningNorm::operator()(const ParamStore& ps, const Tensor& x) const {
  std::vector<double> inv_std = ps[var].ToVector();
  for (auto& v : inv_std) v = 1.0 / std::sqrt(v + 1e-5);
  const std::size_t n = inv_std.size();
  const Tensor scale = Mul(ps[gain], Tensor::FromVector({n}, std::move(inv_std)));
  return Add(Mul(Sub(x, ps[mean]), scale), ps[bias]);
}

void RunningNorm::Update(ParamStore& ps, std::span<const double> observed_mean,
                         std::span<const double> observed_var,
                         double decay) const {
  std::vector<double> m = ps[mean].ToVector();
  std::vector<double> v = ps[var].ToVector();
  for (std::size_t c = 0; c < m.size(); ++c) {
    m[c] = decay * m[c] + (1.0 - decay) * observed_mean[c];
    v[c] = decay * v[c] + (1.0 - decay) * observed_var[c];
  }
  ps.Set(mean, std::move(m));
  ps.Set(var, std::move(v));
}

void ChannelStats(const Tensor& x, std::vector<double>* mean,
                  std::vector<double>* var) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const auto xv = x.values();
  mean->assign(cols, 0.0);
  var->assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols; ++c) (*mean)[c] += xv[i * cols + c];
  }
  for (auto& m : *mean) m /= static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv[i * cols + c] - (*mean)[c];
      (*var)[c] += d * d;
    }
  }
  for (auto& v : *var) v /= static_cast<double>(rows);
}

// ---- recurrent ------------------------------------------------------------------

Gru Gru::Create(ParamStore& ps, const std::string& name, std::size_t in,
                std::size_t hidden, Rng& rng) {
  Gru g;
  g.w_input = ps.AddXavier(name + ".w_input", in, 3 * hidden, rng);
  g.w_hidden = ps.AddXavier(name + ".w_hidden", hidden, 3 * hidden, rng);
  g.b_input = ps.AddConstant(name + ".b_input", {3 * hidden}, 0.0);
  g.b_hidden = ps.AddConstant(name + ".b_hidden", {3 * hidden}, 0.0);
  return g;
}

Tensor Gru::InputGates(const ParamStore& ps, const Tensor& x) const {
  return Add(MatMul(x, ps[w_input]), ps[b_input]);
}

Tensor Gru::Step(const ParamStore& ps, const Tensor& input_gates,
                 const Tensor& h, double zoneout, bool training,
                 Rng* rng) const {
  const std::size_t H = hidden_dim(ps);
  const Tensor hg = Add(MatMul(h, ps[w_hidden]), ps[b_hidden]);
  const Tensor r = Sigmoid(Add(SliceCols(input_gates, 0, H), SliceCols(hg, 0, H)));
  const Tensor z =
      Sigmoid(Add(SliceCols(input_gates, H, 2 * H), SliceCols(hg, H, 2 * H)));
  const Tensor n = Tanh(Add(SliceCols(input_gates, 2 * H, 3 * H),
                            Mul(r, SliceCols(hg, 2 * H, 3 * H))));
  // h' = (1 - z) n + z h
  const Tensor updated = Add(n, Mul(z, Sub(h, n)));
  if (zoneout <= 0.0) return updated;
  if (training) {
    std::vector<double> keep(H);
    for (auto& k : keep) k = rng->Uniform() < zoneout ? 1.0 : 0.0;
    const Tensor mask = Tensor::FromVector({1, H}, std::move(keep));
    return Add(updated, Mul(mask, Sub(h, updated)));
  }
  return Add(updated, Scale(Sub(h, updated), zoneout));
}

Tensor Gru::Run(const ParamStore& ps, const Tensor& x, bool reverse,
                double zoneout, bool training, Rng rng) const {
  const std::size_t T = x.rows();
  const std::size_t H = hidden_dim(ps);
  const Tensor gates = InputGates(ps, x);
  std::vector<Tensor> states(T);
  Tensor h = Tensor::Zeros({1, H});
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    h = Step(ps, SliceRows(gates, t, t + 1), h, zoneout, training, &rng);
    states[t] = h;
  }
  return ConcatRows(states);
}

BiGru BiGru::Create(ParamStore& ps, const std::string& name, std::size_t in,
                    std::size_t hidden, Rng& rng) {
  BiGru b;
  b.forward = Gru::Create(ps, name + ".fwd", in, hidden, rng);
  b.backward = Gru::Create(ps, name + ".bwd", in, hidden, rng);
  return b;
}

Tensor BiGru::operator()(const ParamStore& ps, const Tensor& x, double zoneout,
                         bool training, Rng rng) const {
  const Tensor parts[] = {
      forward.Run(ps, x, false, zoneout, training, rng.Split(1)),
      backward.Run(ps, x, true, zoneout, training, rng.Split(2))};
  return ConcatCols(parts);
}

}  // namespace natts
