#pragma once

// Differentiable primitives over Graph variables. All arrays are treated as
// matrices: leading axes are folded into rows, the last axis is columns.
// Batched sequences are stored as (batch * length) rows, batch-major.

#include <cstdint>
#include <optional>
#include <vector>

#include "golfsig/nn/graph.hpp"

namespace golfsig::nn {

Var matmul(Var a, Var b);
/// x (N x in) * W (in x out) + b (out).
Var linear(Var x, Var weight, std::optional<Var> bias = std::nullopt);

/// Row i uses weight block group[i]: weight is (groups * in) x out, bias is
/// groups x out.
Var grouped_linear(Var x, Var weight, Var bias, const std::vector<std::size_t>& group, std::size_t groups);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Adds a length-cols vector to every row.
Var add_row(Var x, Var v);
/// Multiplies every row elementwise by a length-cols vector.
Var mul_row(Var x, Var v);

Var silu(Var x);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

Var softmax_rows(Var x);
Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Inverted dropout; identity when the graph is not training or rate == 0.
Var dropout(Var x, double rate);
/// Rows of `table` selected by `ids`.
Var embedding(const std::vector<int>& ids, Var table);

/// Kernel-size-1 convolution over time: the L x L matrix `weight` mixes the
/// frames of each length-L block of rows, independently per channel.
Var time_mix(Var x, Var weight, Var bias, std::size_t length);

/// Scaled dot-product attention for `batch` sequences of length `seq`.
/// `blocked`, when non-null, is seq x seq with 1 marking key positions a
/// query may not attend to.
Var attention(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t heads,
              const std::vector<std::uint8_t>* blocked = nullptr);

/// Single-direction LSTM over `batch` sequences of length `steps`. Gate
/// order in the 4H axis is input, forget, cell, output.
Var lstm(Var x, Var w_input, Var w_hidden, Var bias, std::size_t batch, std::size_t steps, bool reverse);

struct BatchNormUpdate {
  NDArray mean;
  NDArray var;
};

/// Batch normalisation over rows. Training mode normalises by batch
/// statistics and, when `update` is given, writes the new running buffers
/// there; evaluation normalises by the running buffers.
Var batchnorm(Var x, Var gamma, Var beta, const NDArray& running_mean, const NDArray& running_var,
              BatchNormUpdate* update = nullptr, double momentum = 0.1, double eps = 1e-5);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t start, std::size_t width);
Var gather_rows(Var x, const std::vector<std::size_t>& rows);
Var reshape(Var x, Shape shape);
/// Mean over each length-`seq` block of rows: (batch*seq) x D -> batch x D.
Var segment_mean(Var x, std::size_t batch, std::size_t seq);
/// m[t+1] - m[t] within each length-`steps` block: (B*T) x D -> (B*(T-1)) x D.
Var frame_diff(Var x, std::size_t batch, std::size_t steps);

Var sum_all(Var x);
Var mean_all(Var x);

Var mse_loss(Var pred, Var target);
Var l1_loss(Var pred, Var target);
Var smooth_l1_loss(Var pred, Var target, double beta = 1.0);
/// Weighted mean cross-entropy over rows; targets < 0 are ignored. With
/// class weights w the result is sum w[y] * nll / sum w[y].
Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>* class_weights = nullptr);

/// Bounded FSQ mapping u = half[c] * tanh(z).
Var fsq_bound(Var z, const std::vector<double>& half);
/// Lattice rounding q = round(u - shift[c]) + shift[c] with a straight-through
/// (identity) backward pass.
Var round_ste(Var u, const std::vector<double>& shift);

}  // namespace golfsig::nn
