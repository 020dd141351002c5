#include "golfsig/nn/layers.hpp"

#include <cmath>

#include "golfsig/nn/ops.hpp"
#include "golfsig/util/error.hpp"

namespace golfsig::nn {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::conv1x1_time: return "conv1x1-over-time";
    case LayerKind::layernorm: return "layernorm";
    case LayerKind::silu: return "silu";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
    case LayerKind::dropout: return "dropout";
    case LayerKind::embedding: return "embedding";
    case LayerKind::lstm_cell: return "lstm-cell";
    case LayerKind::multihead_attention: return "multihead-attention";
    case LayerKind::batchnorm: return "batchnorm";
  }
  return "?";
}

void LayerSpec::validate() const {
  const std::string name = layer_kind_name(kind);
  switch (kind) {
    case LayerKind::linear:
    case LayerKind::embedding:
    case LayerKind::lstm_cell:
      if (in == 0 || out == 0) throw ConfigError(name + ": widths must be positive");
      break;
    case LayerKind::conv1x1_time:
    case LayerKind::layernorm:
    case LayerKind::batchnorm:
      if (in == 0 || in != out) throw ConfigError(name + ": width must be positive and in == out");
      break;
    case LayerKind::multihead_attention:
      if (in == 0 || in != out) throw ConfigError(name + ": width must be positive and in == out");
      if (heads == 0 || in % heads != 0) {
        throw ConfigError(name + ": " + std::to_string(heads) + " heads do not divide width " + std::to_string(in));
      }
      break;
    case LayerKind::dropout:
      if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(name + ": rate must be in [0, 1)");
      break;
    case LayerKind::silu:
    case LayerKind::relu:
    case LayerKind::softmax:
      break;
  }
}

NDArray uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  NDArray a(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : a.values()) v = rng.uniform(-bound, bound);
  return a;
}

namespace {

void init_linear(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t out, bool bias,
                 Rng& rng) {
  params.add(prefix + ".weight", uniform_init({in, out}, in, rng));
  if (bias) params.add(prefix + ".bias", uniform_init({out}, in, rng));
}

Var apply_linear(Graph& g, Var x, const ParameterStore& params, const std::string& prefix) {
  const auto bias_name = prefix + ".bias";
  std::optional<Var> b;
  if (params.contains(bias_name)) b = g.param(params, bias_name);
  return linear(x, g.param(params, prefix + ".weight"), b);
}

}  // namespace

void init_layer(const LayerSpec& spec, ParameterStore& params, const std::string& prefix, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::linear:
      init_linear(params, prefix, spec.in, spec.out, spec.bias, rng);
      break;
    case LayerKind::conv1x1_time:
      params.add(prefix + ".weight", uniform_init({spec.in, spec.in}, spec.in, rng));
      params.add(prefix + ".bias", uniform_init({spec.in}, spec.in, rng));
      break;
    case LayerKind::layernorm:
      params.add(prefix + ".gamma", NDArray({spec.in}, 1.0));
      params.add(prefix + ".beta", NDArray({spec.in}, 0.0));
      break;
    case LayerKind::batchnorm:
      params.add(prefix + ".gamma", NDArray({spec.in}, 1.0));
      params.add(prefix + ".beta", NDArray({spec.in}, 0.0));
      params.add(prefix + ".running_mean", NDArray({spec.in}, 0.0), false);
      params.add(prefix + ".running_var", NDArray({spec.in}, 1.0), false);
      break;
    case LayerKind::embedding: {
      NDArray table({spec.in, spec.out});
      for (auto& v : table.values()) v = rng.normal();
      params.add(prefix + ".table", std::move(table));
      break;
    }
    case LayerKind::lstm_cell:
      params.add(prefix + ".w_input", uniform_init({spec.in, 4 * spec.out}, spec.out, rng));
      params.add(prefix + ".w_hidden", uniform_init({spec.out, 4 * spec.out}, spec.out, rng));
      params.add(prefix + ".bias", uniform_init({4 * spec.out}, spec.out, rng));
      break;
    case LayerKind::multihead_attention:
      for (const char* p : {".q", ".k", ".v", ".o"}) init_linear(params, prefix + p, spec.in, spec.in, true, rng);
      break;
    case LayerKind::silu:
    case LayerKind::relu:
    case LayerKind::softmax:
    case LayerKind::dropout:
      break;
  }
}

Var mha_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix, std::size_t heads,
                const SequenceLayout& layout, const std::vector<std::uint8_t>* blocked) {
  const std::size_t seq = layout.length == 0 ? x.rows() : layout.length;
  const std::size_t batch = x.rows() / seq;
  auto q = apply_linear(g, x, params, prefix + ".q");
  auto k = apply_linear(g, x, params, prefix + ".k");
  auto v = apply_linear(g, x, params, prefix + ".v");
  auto a = attention(q, k, v, batch, seq, heads, blocked);
  return apply_linear(g, a, params, prefix + ".o");
}

Var bilstm_forward(Graph& g, Var x, const ParameterStore& params, const std::string& prefix,
                   const SequenceLayout& layout) {
  const std::size_t steps = layout.length == 0 ? x.rows() : layout.length;
  if (steps == 0) throw DimensionError("bilstm: sequence length must be >= 1");
  const std::size_t hidden = params.get(prefix + ".fwd.w_hidden").rows();
  const LayerSpec fwd = LayerSpec::lstm(x.cols(), hidden, false);
  const LayerSpec bwd = LayerSpec::lstm(x.cols(), hidden, true);
  const SequenceLayout l{x.rows() / steps, steps};
  return concat_cols({primitive_forward(g, fwd, x, params, prefix + ".fwd", l),
                      primitive_forward(g, bwd, x, params, prefix + ".bwd", l)});
}

void init_bilstm(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  init_layer(LayerSpec::lstm(in, hidden, false), params, prefix + ".fwd", rng);
  init_layer(LayerSpec::lstm(in, hidden, true), params, prefix + ".bwd", rng);
}

Var primitive_forward(Graph& g, const LayerSpec& spec, Var x, const ParameterStore& params, const std::string& prefix,
                      const SequenceLayout& layout, const std::vector<std::uint8_t>* blocked) {
  const std::string name = std::string(layer_kind_name(spec.kind)) + " '" + prefix + "'";
  auto expect_width = [&](std::size_t w) {
    if (x.cols() != w) {
      throw DimensionError(name + ": input axis 1 has width " + std::to_string(x.cols()) + ", expected " +
                           std::to_string(w));
    }
  };
  switch (spec.kind) {
    case LayerKind::linear:
      expect_width(spec.in);
      return apply_linear(g, x, params, prefix);
    case LayerKind::conv1x1_time:
      if (x.rows() % spec.in != 0) {
        throw DimensionError(name + ": input axis 0 has " + std::to_string(x.rows()) +
                             " rows, not a multiple of the window " + std::to_string(spec.in));
      }
      return time_mix(x, g.param(params, prefix + ".weight"), g.param(params, prefix + ".bias"), spec.in);
    case LayerKind::layernorm:
      expect_width(spec.in);
      return layernorm(x, g.param(params, prefix + ".gamma"), g.param(params, prefix + ".beta"));
    case LayerKind::batchnorm: {
      expect_width(spec.in);
      BatchNormUpdate update;
      auto y = batchnorm(x, g.param(params, prefix + ".gamma"), g.param(params, prefix + ".beta"),
                         params.get(prefix + ".running_mean"), params.get(prefix + ".running_var"),
                         g.training() ? &update : nullptr);
      if (g.training()) {
        g.stage_buffer(prefix + ".running_mean", std::move(update.mean));
        g.stage_buffer(prefix + ".running_var", std::move(update.var));
      }
      return y;
    }
    case LayerKind::silu: return silu(x);
    case LayerKind::relu: return relu(x);
    case LayerKind::softmax: return softmax_rows(x);
    case LayerKind::dropout: return dropout(x, spec.dropout);
    case LayerKind::embedding: {
      std::vector<int> ids;
      ids.reserve(x.value().size());
      for (double v : x.value().values()) ids.push_back(static_cast<int>(std::lround(v)));
      return embedding(ids, g.param(params, prefix + ".table"));
    }
    case LayerKind::lstm_cell: {
      expect_width(spec.in);
      const std::size_t steps = layout.length == 0 ? x.rows() : layout.length;
      if (steps == 0 || x.rows() % steps != 0) throw DimensionError(name + ": axis 0 must be batch*steps, steps >= 1");
      return lstm(x, g.param(params, prefix + ".w_input"), g.param(params, prefix + ".w_hidden"),
                  g.param(params, prefix + ".bias"), x.rows() / steps, steps, spec.reverse);
    }
    case LayerKind::multihead_attention:
      expect_width(spec.in);
      spec.validate();
      return mha_forward(g, x, params, prefix, spec.heads, layout, blocked);
  }
  throw ConfigError("unknown layer kind");
}

}  // namespace golfsig::nn
