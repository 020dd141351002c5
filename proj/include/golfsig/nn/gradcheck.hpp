#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "golfsig/nn/graph.hpp"
#include "golfsig/nn/params.hpp"

namespace golfsig::nn {

/// Builds a scalar loss from the parameters bound in `g`.
using LossFn = std::function<Var(Graph& g, const ParameterStore& params)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Entries sampled per parameter (all entries when the tensor is smaller).
  std::size_t max_entries = 24;
  /// Denominator floor of the relative error, so that pairs of near-zero
  /// gradients are compared on an absolute scale.
  double floor = 1e-6;
  std::uint64_t seed = 0;
  /// Graph mode and seed used for every evaluation (dropout masks repeat).
  bool training = false;
  std::uint64_t graph_seed = 0;
};

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::map<std::string, double> max_rel_error;
  GradCheckEntry worst;
  /// Entries whose perturbed loss was non-finite.
  std::vector<GradCheckEntry> unverifiable;
  std::size_t checked = 0;

  double max_error() const { return worst.rel_error; }
  bool passed(double tolerance) const { return checked > 0 && worst.rel_error < tolerance; }
  std::string summary() const;
};

/// Compares reverse-mode gradients with central differences
/// (f(p + h) - f(p - h)) / 2h on a sample of entries of every trainable
/// parameter. Parameters are restored before returning.
GradCheckReport grad_check(const LossFn& loss, ParameterStore& params, const GradCheckOptions& options = {});

}  // namespace golfsig::nn
