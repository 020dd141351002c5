#pragma once

#include "golfsig/nn/params.hpp"

namespace golfsig::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * weight_decay * p
};

/// One bias-corrected Adam update for every parameter present in `grads`.
/// Throws TrainingError naming the first parameter with a non-finite gradient;
/// nothing is modified in that case.
void adam_step(ParameterStore& params, const Gradients& grads, const AdamConfig& config);

/// Rescales all gradients together so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

}  // namespace golfsig::nn
