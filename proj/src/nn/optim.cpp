#include "golfsig/nn/optim.hpp"

#include <cmath>

#include "golfsig/util/error.hpp"

namespace golfsig::nn {

void adam_step(ParameterStore& params, const Gradients& grads, const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw TrainingError("non-finite gradient for parameter '" + name + "'");
    if (g.size() != params.get(name).size()) throw DimensionError("adam_step: gradient shape mismatch for '" + name + "'");
  }
  for (const auto& [name, g] : grads) {
    auto& e = params.entry(name);
    if (!e.trainable) continue;
    ++e.step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(e.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(e.step));
    auto& p = e.value;
    auto& m = e.first_moment;
    auto& v = e.second_moment;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      p[i] -= config.lr * config.weight_decay * p[i];
      p[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (auto& v : g.values()) v *= s;
  }
  return norm;
}

}  // namespace golfsig::nn
