#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "golfsig/nn/graph.hpp"
#include "golfsig/nn/params.hpp"
#include "golfsig/util/random.hpp"

namespace golfsig::nn {

enum class LayerKind {
  linear,
  conv1x1_time,
  layernorm,
  silu,
  relu,
  softmax,
  dropout,
  embedding,
  lstm_cell,
  multihead_attention,
  batchnorm,
};

const char* layer_kind_name(LayerKind kind);

/// Static description of one layer. Parameter names are derived from the
/// prefix passed at construction and forward time:
///
///   linear              <p>.weight (in x out), <p>.bias (out)
///   conv1x1_time        <p>.weight (in x in), <p>.bias (in); `in` is the window length
///   layernorm           <p>.gamma, <p>.beta (in)
///   embedding           <p>.table (in = vocabulary x out)
///   lstm_cell           <p>.w_input (in x 4out), <p>.w_hidden (out x 4out), <p>.bias (4out)
///   multihead_attention <p>.q, <p>.k, <p>.v, <p>.o linear sublayers (in x in)
///   batchnorm           <p>.gamma, <p>.beta, <p>.running_mean, <p>.running_var (in)
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t heads = 1;
  double dropout = 0.0;
  bool bias = true;
  bool reverse = false;  // lstm_cell: run the recurrence backwards in time

  static LayerSpec linear(std::size_t in, std::size_t out, bool bias = true) {
    return {LayerKind::linear, in, out, 1, 0.0, bias, false};
  }
  static LayerSpec conv1x1_time(std::size_t window) { return {LayerKind::conv1x1_time, window, window}; }
  static LayerSpec layernorm(std::size_t width) { return {LayerKind::layernorm, width, width}; }
  static LayerSpec activation(LayerKind kind) { return {kind}; }
  static LayerSpec dropout_layer(double rate) { return {LayerKind::dropout, 0, 0, 1, rate}; }
  static LayerSpec embedding(std::size_t vocab, std::size_t width) { return {LayerKind::embedding, vocab, width}; }
  static LayerSpec lstm(std::size_t in, std::size_t hidden, bool reverse = false) {
    return {LayerKind::lstm_cell, in, hidden, 1, 0.0, true, reverse};
  }
  static LayerSpec attention(std::size_t width, std::size_t heads) {
    return {LayerKind::multihead_attention, width, width, heads};
  }
  static LayerSpec batchnorm(std::size_t width) { return {LayerKind::batchnorm, width, width}; }

  /// Throws ConfigError when the dimensions are inconsistent with the kind.
  void validate() const;
};

/// How the rows of a 2-D input split into sequences (rows = batch * length).
struct SequenceLayout {
  std::size_t batch = 1;
  std::size_t length = 0;  // 0: every row is its own sequence
};

/// Adds the layer's parameters under `prefix`, fan-in scaled uniform for
/// weight matrices, ones/zeros for normalisation affine terms.
void init_layer(const LayerSpec& spec, ParameterStore& params, const std::string& prefix, Rng& rng);

/// Applies one layer. Embedding layers read token ids from `x`'s values.
/// `blocked` is an optional seq x seq attention mask (1 = may not attend).
/// Batch-norm layers in training mode stage their running-statistics update
/// in the graph (see Graph::buffer_updates).
Var primitive_forward(Graph& g, const LayerSpec& spec, Var x, const ParameterStore& params, const std::string& prefix,
                      const SequenceLayout& layout = {}, const std::vector<std::uint8_t>* blocked = nullptr);

/// Bidirectional LSTM: forward pass in the first H channels, backward pass in
/// the last H. Parameters live under <prefix>.fwd and <prefix>.bwd.
Var bilstm_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix,
                   const SequenceLayout& layout);
void init_bilstm(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);

/// Multi-head self-attention over `layout` sequences.
Var mha_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix, std::size_t heads,
                const SequenceLayout& layout, const std::vector<std::uint8_t>* blocked = nullptr);

/// Fan-in scaled uniform matrix, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
NDArray uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace golfsig::nn
