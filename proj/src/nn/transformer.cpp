#include "golfsig/nn/transformer.hpp"

#include <cmath>
#include <numeric>

#include "golfsig/nn/ops.hpp"
#include "golfsig/util/error.hpp"

namespace golfsig::nn {

void TransformerConfig::validate() const {
  if (width == 0 || layers == 0 || ff == 0) throw ConfigError("transformer sizes must be positive");
  if (heads == 0 || width % heads != 0)
    throw ConfigError("transformer heads (" + std::to_string(heads) + ") must divide width (" + std::to_string(width) +
                      ")");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("transformer dropout must be in [0, 1)");
}

void init_transformer(ParameterStore& params, const std::string& prefix, const TransformerConfig& c, Rng& rng) {
  c.validate();
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    init_layer(LayerSpec::layernorm(c.width), params, p + ".ln1", rng);
    init_layer(LayerSpec::attention(c.width, c.heads), params, p + ".attn", rng);
    init_layer(LayerSpec::layernorm(c.width), params, p + ".ln2", rng);
    init_layer(LayerSpec::linear(c.width, c.ff), params, p + ".ff1", rng);
    init_layer(LayerSpec::linear(c.ff, c.width), params, p + ".ff2", rng);
  }
  init_layer(LayerSpec::layernorm(c.width), params, prefix + ".final_ln", rng);
}

Var transformer_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix,
                        const TransformerConfig& c, const SequenceLayout& layout,
                        const std::vector<std::uint8_t>* blocked) {
  const auto ln = LayerSpec::layernorm(c.width);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    auto a = mha_forward(g, primitive_forward(g, ln, x, params, p + ".ln1"), params, p + ".attn", c.heads, layout,
                         blocked);
    x = add(x, dropout(a, c.dropout));
    auto h = primitive_forward(g, ln, x, params, p + ".ln2");
    h = silu(primitive_forward(g, LayerSpec::linear(c.width, c.ff), h, params, p + ".ff1"));
    h = primitive_forward(g, LayerSpec::linear(c.ff, c.width), h, params, p + ".ff2");
    x = add(x, dropout(h, c.dropout));
  }
  return primitive_forward(g, ln, x, params, prefix + ".final_ln");
}

NDArray sinusoidal_encoding(std::size_t length, std::size_t width) {
  NDArray pe({length, width});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      pe(t, i) = i % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
    }
  }
  return pe;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng) {
  if (batch == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  return out;
}

Split split_indices(std::size_t n, double fraction, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  cut = std::min(cut, n);
  return {{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut)},
          {idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end()}};
}

}  // namespace golfsig::nn
