#pragma once

#include "golfsig/nn/layers.hpp"

namespace golfsig::nn {

struct TransformerConfig {
  std::size_t width = 256;
  std::size_t heads = 4;
  std::size_t layers = 4;
  std::size_t ff = 512;
  double dropout = 0.1;

  void validate() const;
};

template <class V>
void describe(V& v, TransformerConfig& c) {
  v("width", c.width);
  v("heads", c.heads);
  v("layers", c.layers);
  v("ff", c.ff);
  v("dropout", c.dropout);
}

/// Pre-norm encoder stack: x + MHA(LN(x)), x + W2 silu(W1 LN(x)), then a
/// final layer norm.
void init_transformer(ParameterStore& params, const std::string& prefix, const TransformerConfig& config, Rng& rng);
Var transformer_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix,
                        const TransformerConfig& config, const SequenceLayout& layout,
                        const std::vector<std::uint8_t>* blocked = nullptr);

/// length x width sinusoidal position table.
NDArray sinusoidal_encoding(std::size_t length, std::size_t width);

/// Learning rate that drops from `initial` to `final` at iteration `drop_at`.
struct StepSchedule {
  double initial = 3e-4;
  double final = 3e-5;
  std::size_t drop_at = 0;

  double at(std::size_t iteration) const { return iteration < drop_at ? initial : final; }
};

/// Shuffled index batches covering [0, n).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng);

/// Deterministic split: a shuffled permutation, the first `fraction` of it
/// in `first`.
struct Split {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};
Split split_indices(std::size_t n, double fraction, Rng& rng);

}  // namespace golfsig::nn
