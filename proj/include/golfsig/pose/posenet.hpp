#pragma once

#include <filesystem>

#include "golfsig/data/swing.hpp"
#include "golfsig/nn/graph.hpp"
#include "golfsig/nn/transformer.hpp"

namespace golfsig::pose {

struct PoseNetConfig {
  std::size_t window = 32;
  std::size_t input = 9;
  std::size_t width = 256;
  std::size_t blocks = 2;
  std::size_t output = 156;
  double lr = 3e-4;
  double lr_final = 3e-5;
  /// Iteration of the learning-rate drop; 0 means 75% of all iterations.
  std::size_t lr_drop_at = 0;
  double weight_decay = 1e-4;
  std::size_t batch = 64;
  std::size_t epochs = 200;
  double train_fraction = 0.8;

  void validate() const;
};

template <class V>
void describe(V& v, PoseNetConfig& c) {
  v("window", c.window);
  v("input", c.input);
  v("width", c.width);
  v("blocks", c.blocks);
  v("output", c.output);
  v("lr", c.lr);
  v("lr_final", c.lr_final);
  v("lr_drop_at", c.lr_drop_at);
  v("weight_decay", c.weight_decay);
  v("batch", c.batch);
  v("epochs", c.epochs);
  v("train_fraction", c.train_fraction);
}

/// Parameters include non-trainable input normalisation (input.mean,
/// input.std) fitted on the training windows.
struct PoseNet {
  PoseNetConfig config;
  nn::ParameterStore params;
};

PoseNet init_posenet(const PoseNetConfig& config, std::uint64_t seed);

/// x: (batch * window) x input, already normalised. Returns (batch * window) x output.
nn::Var posenet_forward(nn::Graph& g, const PoseNet& model, nn::Var x, std::size_t batch);

/// One raw window (window x input) to window x output.
nn::NDArray posenet_window(const PoseNet& model, const nn::NDArray& window);

/// Non-overlapping windows; the last partial window is zero-padded and the
/// padding trimmed. Each 6D output is re-orthonormalised.
nn::NDArray infer_sequence(const PoseNet& model, const nn::NDArray& sensor);

struct PoseNetCurve {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::vector<double> lr;          // per iteration
  std::size_t drop_iteration = 0;
};

struct PoseNetTraining {
  PoseNet model;
  PoseNetCurve curve;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
};

PoseNetTraining train_posenet(const std::vector<data::SwingRecord>& swings, const PoseNetConfig& config,
                              std::uint64_t seed);

/// Per-window MSE between normalised-input predictions and 6D targets for
/// the given swings, using non-overlapping windows.
double posenet_loss(const PoseNet& model, const std::vector<data::SwingRecord>& swings,
                    const std::vector<std::size_t>& ids);

void save_posenet(const PoseNet& model, const std::filesystem::path& dir);
PoseNet load_posenet(const std::filesystem::path& dir);

}  // namespace golfsig::pose
