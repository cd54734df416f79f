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

#include "natts/decoder.hpp"

namespace natts {

namespace {

// Inverted-dropout mask whose row r is drawn from the stream of frame
// first_frame + r, so a frame sees the same mask whether it is processed alone
// or inside a whole sequence.
Tensor FrameMasks(std::size_t rows, std::size_t cols, std::size_t first_frame,
                  std::uint64_t layer, double rate, const Rng& rng) {
  std::vector<double> mask(rows * cols);
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t r = 0; r < rows; ++r) {
    Rng stream = rng.Split(first_frame + r).Split(layer);
    for (std::size_t c = 0; c < cols; ++c) {
      mask[r * cols + c] = stream.Uniform() < rate ? 0.0 : keep;
    }
  }
  return Tensor::Matrix(rows, cols, std::move(mask));
}

}  // namespace

Decoder::Decoder(ParamStore& ps, const std::string& name,
                 const DecoderConfig& config, Rng& rng)
    : config_(config) {
  if (config.input_dim == 0) throw Error("decoder: input_dim must be set");
  if (!(config.prenet_dropout >= 0.0 && config.prenet_dropout < 1.0)) {
    throw Error("decoder: prenet dropout must lie in [0, 1)");
  }
  prenet_[0] = Linear::Create(ps, name + ".prenet0", config.frame_dim,
                              config.prenet_dims[0], rng);
  prenet_[1] = Linear::Create(ps, name + ".prenet1", config.prenet_dims[0],
                              config.prenet_dims[1], rng);
  rnn1_ = Gru::Create(ps, name + ".rnn1", config.prenet_dims[1] + config.input_dim,
                      config.rnn_dim, rng);
  rnn2_ = Gru::Create(ps, name + ".rnn2", config.rnn_dim, config.rnn_dim, rng);
  projection_ = Linear::Create(ps, name + ".proj", config.rnn_dim + config.input_dim,
                               config.frame_dim, rng);
  std::size_t width = config.frame_dim;
  for (std::size_t l = 0; l < config.postnet_layers; ++l) {
    const bool last = l + 1 == config.postnet_layers;
    const std::size_t out = last ? config.frame_dim : config.postnet_channels;
    postnet_.push_back(Conv1dLayer::Create(
        ps, name + ".postnet" + std::to_string(l), width, out,
        config.postnet_kernel, rng));
    width = out;
  }
}

Tensor Decoder::Prenet(const ParamStore& ps, const Tensor& frames,
                       std::size_t first_frame, bool dropout,
                       const Rng& rng) const {
  Tensor x = frames;
  for (std::size_t l = 0; l < 2; ++l) {
    x = Relu(prenet_[l](ps, x));
    if (dropout && config_.prenet_dropout > 0.0) {
      x = Mul(x, FrameMasks(x.rows(), x.cols(), first_frame, l + 1,
                            config_.prenet_dropout, rng));
    }
  }
  return x;
}

Tensor Decoder::Step(const ParamStore& ps, const Tensor& prenet_gates_row,
                     const Tensor& context_gates_row, StepState* state,
                     bool training, const Rng& frame_rng) const {
  Rng z1 = frame_rng.Split(3);
  Rng z2 = frame_rng.Split(4);
  state->h1 = rnn1_.Step(ps, Add(prenet_gates_row, context_gates_row), state->h1,
                         config_.zoneout, training, &z1);
  state->h2 = rnn2_.Step(ps, rnn2_.InputGates(ps, state->h1), state->h2,
                         config_.zoneout, training, &z2);
  return state->h2;
}

Tensor Decoder::Postnet(const ParamStore& ps, const Tensor& pre) const {
  Tensor x = pre;
  for (std::size_t l = 0; l < postnet_.size(); ++l) {
    x = postnet_[l](ps, x);
    if (l + 1 < postnet_.size()) x = Tanh(x);
  }
  return Add(pre, x);
}

DecoderOutput Decoder::TeacherForced(const ParamStore& ps,
                                     const Tensor& upsampled,
                                     const Tensor& target, bool training,
                                     Rng rng) const {
  const std::size_t T = upsampled.rows();
  if (target.rows() != T || target.cols() != config_.frame_dim) {
    throw Error("decoder: upsampled sequence " + ShapeString(upsampled.shape()) +
                " does not match target " + ShapeString(target.shape()));
  }
  if (upsampled.cols() != config_.input_dim) {
    throw Error("decoder: expected input width " +
                std::to_string(config_.input_dim) + ", got " +
                ShapeString(upsampled.shape()));
  }
  const std::size_t P = config_.prenet_dims[1];
  const std::size_t H = config_.rnn_dim;
  const Tensor w_in = ps[rnn1_.w_input];
  const Tensor context_gates =
      Add(MatMul(upsampled, SliceRows(w_in, P, P + config_.input_dim)),
          ps[rnn1_.b_input]);

  // Previous frames: zeros, then targets 0..T-2.
  Tensor previous = Tensor::Zeros({1, config_.frame_dim});
  if (T > 1) {
    const Tensor rows[] = {previous, SliceRows(target, 0, T - 1)};
    previous = ConcatRows(rows);
  }
  const Tensor prenet_gates =
      MatMul(Prenet(ps, previous, 0, training, rng), SliceRows(w_in, 0, P));

  StepState state{Tensor::Zeros({1, H}), Tensor::Zeros({1, H})};
  std::vector<Tensor> tops(T);
  for (std::size_t t = 0; t < T; ++t) {
    tops[t] = Step(ps, SliceRows(prenet_gates, t, t + 1),
                   SliceRows(context_gates, t, t + 1), &state, training,
                   rng.Split(t));
  }
  const Tensor parts[] = {ConcatRows(tops), upsampled};
  DecoderOutput out;
  out.pre = projection_(ps, ConcatCols(parts));
  out.post = Postnet(ps, out.pre);
  return out;
}

DecoderOutput Decoder::Autoregressive(const ParamStore& ps,
                                      const Tensor& upsampled,
                                      bool prenet_dropout, bool training,
                                      Rng rng,
                                      const FeedbackFn& feedback) const {
  const std::size_t T = upsampled.rows();
  if (T == 0) throw Error("decoder: empty upsampled sequence");
  if (upsampled.cols() != config_.input_dim) {
    throw Error("decoder: expected input width " +
                std::to_string(config_.input_dim) + ", got " +
                ShapeString(upsampled.shape()));
  }
  const std::size_t P = config_.prenet_dims[1];
  const std::size_t H = config_.rnn_dim;
  const Tensor w_in = ps[rnn1_.w_input];
  const Tensor w_prenet = SliceRows(w_in, 0, P);
  const Tensor context_gates =
      Add(MatMul(upsampled, SliceRows(w_in, P, P + config_.input_dim)),
          ps[rnn1_.b_input]);

  StepState state{Tensor::Zeros({1, H}), Tensor::Zeros({1, H})};
  Tensor previous = Tensor::Zeros({1, config_.frame_dim});
  std::vector<Tensor> frames(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor prenet_gates =
        MatMul(Prenet(ps, previous, t, prenet_dropout, rng), w_prenet);
    const Tensor top = Step(ps, prenet_gates, SliceRows(context_gates, t, t + 1),
                            &state, training, rng.Split(t));
    const Tensor parts[] = {top, SliceRows(upsampled, t, t + 1)};
    frames[t] = projection_(ps, ConcatCols(parts));
    previous = feedback ? feedback(t, frames[t]) : frames[t];
  }
  DecoderOutput out;
  out.pre = ConcatRows(frames);
  out.post = Postnet(ps, out.pre);
  return out;
}

}  // namespace natts
