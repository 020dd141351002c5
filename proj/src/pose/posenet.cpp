#include "golfsig/pose/posenet.hpp"

#include <cmath>

#include "golfsig/kin/kinematics.hpp"
#include "golfsig/nn/layers.hpp"
#include "golfsig/nn/model_io.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/nn/optim.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::pose {

using nn::LayerSpec;
using nn::NDArray;

void PoseNetConfig::validate() const {
  if (window < 2) throw ConfigError("posenet.window must be at least 2");
  if (input == 0 || width == 0 || output == 0 || blocks == 0) throw ConfigError("posenet widths must be positive");
  if (batch == 0) throw ConfigError("posenet.batch must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("posenet.train_fraction must be in (0, 1)");
}

PoseNet init_posenet(const PoseNetConfig& config, std::uint64_t seed) {
  config.validate();
  PoseNet m{config, {}};
  Rng rng(seed);
  auto& p = m.params;
  p.add("input.mean", NDArray({config.input}, 0.0), false);
  p.add("input.std", NDArray({config.input}, 1.0), false);
  nn::init_layer(LayerSpec::linear(config.input, config.width), p, "in", rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    nn::init_layer(LayerSpec::layernorm(config.width), p, pre + ".ln_time", rng);
    nn::init_layer(LayerSpec::conv1x1_time(config.window), p, pre + ".mix", rng);
    nn::init_layer(LayerSpec::layernorm(config.width), p, pre + ".ln_chan", rng);
    nn::init_layer(LayerSpec::linear(config.width, config.width), p, pre + ".fc", rng);
  }
  nn::init_layer(LayerSpec::linear(config.width, config.output), p, "out", rng);
  return m;
}

nn::Var posenet_forward(nn::Graph& g, const PoseNet& m, nn::Var x, std::size_t batch) {
  const auto& c = m.config;
  if (x.rows() != batch * c.window)
    throw DimensionError("posenet: input axis 0 has " + std::to_string(x.rows()) + " rows, expected batch * window = " +
                         std::to_string(batch * c.window));
  const nn::SequenceLayout layout{batch, c.window};
  auto h = nn::primitive_forward(g, LayerSpec::linear(c.input, c.width), x, m.params, "in");
  for (std::size_t b = 0; b < c.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    auto t = nn::primitive_forward(g, LayerSpec::layernorm(c.width), h, m.params, pre + ".ln_time");
    t = nn::primitive_forward(g, LayerSpec::conv1x1_time(c.window), t, m.params, pre + ".mix", layout);
    h = nn::add(h, t);
    auto s = nn::primitive_forward(g, LayerSpec::layernorm(c.width), h, m.params, pre + ".ln_chan");
    s = nn::silu(nn::primitive_forward(g, LayerSpec::linear(c.width, c.width), s, m.params, pre + ".fc"));
    h = nn::add(h, s);
  }
  return nn::primitive_forward(g, LayerSpec::linear(c.width, c.output), h, m.params, "out");
}

namespace {

// Rows [start, start + window) of `sensor`, normalised; rows past the end
// stay zero.
void fill_window(const PoseNet& m, const NDArray& sensor, std::size_t start, NDArray& x, std::size_t row0) {
  const auto& mean = m.params.get("input.mean");
  const auto& sd = m.params.get("input.std");
  for (std::size_t r = 0; r < m.config.window && start + r < sensor.rows(); ++r)
    for (std::size_t c = 0; c < m.config.input; ++c) x(row0 + r, c) = (sensor(start + r, c) - mean[c]) / sd[c];
}

NDArray forward_windows(const PoseNet& m, const NDArray& sensor) {
  if (sensor.ndim() != 2 || sensor.cols() != m.config.input)
    throw DimensionError("posenet: sensor axis 1 must be " + std::to_string(m.config.input) + ", got shape " +
                         nn::shape_string(sensor.shape()));
  const std::size_t L = m.config.window;
  const std::size_t n = (sensor.rows() + L - 1) / L;
  NDArray x({n * L, m.config.input});
  for (std::size_t w = 0; w < n; ++w) fill_window(m, sensor, w * L, x, w * L);
  nn::Graph g;
  return posenet_forward(g, m, g.constant(std::move(x)), n).value();
}

}  // namespace

NDArray posenet_window(const PoseNet& m, const NDArray& window) {
  if (window.rows() != m.config.window)
    throw DimensionError("posenet: window axis 0 must be " + std::to_string(m.config.window) + ", got " +
                         std::to_string(window.rows()));
  return forward_windows(m, window);
}

NDArray infer_sequence(const PoseNet& m, const NDArray& sensor) {
  const std::size_t T = sensor.rows();
  const NDArray y = forward_windows(m, sensor);
  NDArray out({T, m.config.output});
  for (std::size_t t = 0; t < T; ++t) {
    auto row = out.row(t);
    std::copy_n(y.row(t).begin(), m.config.output, row.begin());
    for (std::size_t b = 0; b + 6 <= m.config.output; b += 6) kin::write_sixd(kin::sixd_to_rotmat(&row[b]), &row[b]);
  }
  return out;
}

double posenet_loss(const PoseNet& m, const std::vector<data::SwingRecord>& swings,
                    const std::vector<std::size_t>& ids) {
  double sum = 0.0;
  std::size_t count = 0;
  for (auto i : ids) {
    const auto& s = swings[i];
    const NDArray y = forward_windows(m, s.sensor);
    for (std::size_t t = 0; t < s.frames(); ++t)
      for (std::size_t c = 0; c < m.config.output; ++c) {
        const double e = y(t, c) - s.motion.pose(t, c);
        sum += e * e;
        ++count;
      }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

PoseNetTraining train_posenet(const std::vector<data::SwingRecord>& swings, const PoseNetConfig& config,
                              std::uint64_t seed) {
  config.validate();
  if (swings.empty()) throw ValidationError("posenet training needs at least one swing");
  for (const auto& s : swings)
    if (!s.has_pose() || !s.has_sensor()) throw ValidationError(s.id + ": posenet training needs pose and sensor data");
  if (swings.size() < 2) throw ValidationError("posenet training needs at least two swings for a validation split");
  const std::size_t L = config.window;

  Rng rng = Rng::derive(seed, 0x706f7365);
  auto split = nn::split_indices(swings.size(), config.train_fraction, rng);
  if (split.first.empty() || split.second.empty()) throw ValidationError("posenet split left an empty partition");

  PoseNetTraining out{init_posenet(config, seed), {}, split.first, split.second};
  PoseNet& m = out.model;

  // Input statistics from the training swings.
  NDArray mean({config.input}, 0.0), sd({config.input}, 0.0);
  std::size_t n = 0;
  for (auto i : split.first)
    for (std::size_t t = 0; t < swings[i].frames(); ++t, ++n)
      for (std::size_t c = 0; c < config.input; ++c) mean[c] += swings[i].sensor(t, c);
  for (auto& v : mean.values()) v /= static_cast<double>(n);
  for (auto i : split.first)
    for (std::size_t t = 0; t < swings[i].frames(); ++t)
      for (std::size_t c = 0; c < config.input; ++c) {
        const double d = swings[i].sensor(t, c) - mean[c];
        sd[c] += d * d;
      }
  for (auto& v : sd.values()) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-6);
  m.params.get("input.mean") = mean;
  m.params.get("input.std") = sd;

  std::size_t windows_per_epoch = 0;
  for (auto i : split.first) windows_per_epoch += (swings[i].frames() + L - 1) / L;
  const std::size_t batches = (windows_per_epoch + config.batch - 1) / config.batch;
  const std::size_t total = batches * config.epochs;
  const nn::StepSchedule schedule{config.lr, config.lr_final,
                                  config.lr_drop_at ? config.lr_drop_at : (3 * total) / 4};
  out.curve.drop_iteration = schedule.drop_at;

  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Windows at random offsets, the count matching a non-overlapping tiling.
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    for (auto i : split.first) {
      const std::size_t T = swings[i].frames();
      const std::size_t k = (T + L - 1) / L;
      for (std::size_t w = 0; w < k; ++w) windows.emplace_back(i, T > L ? rng.below(T - L + 1) : 0);
    }
    auto order = nn::make_batches(windows.size(), config.batch, rng);
    double epoch_loss = 0.0;
    for (const auto& batch : order) {
      const std::size_t B = batch.size();
      NDArray x({B * L, config.input}), y({B * L, config.output});
      for (std::size_t b = 0; b < B; ++b) {
        const auto [i, start] = windows[batch[b]];
        fill_window(m, swings[i].sensor, start, x, b * L);
        // Targets past the end of a short swing stay zero.
        for (std::size_t r = 0; r < L && start + r < swings[i].frames(); ++r)
          std::copy_n(swings[i].motion.pose.row(start + r).begin(), config.output, y.row(b * L + r).begin());
      }
      nn::Graph g(true, seed ^ (iteration * 0x9E3779B97F4A7C15ULL));
      auto loss = nn::mse_loss(posenet_forward(g, m, g.constant(std::move(x)), B), g.constant(std::move(y)));
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingError("posenet loss is not finite at iteration " + std::to_string(iteration));
      g.backward(loss);
      const double lr = schedule.at(iteration);
      nn::adam_step(m.params, g.parameter_gradients(), {.lr = lr, .weight_decay = config.weight_decay});
      out.curve.lr.push_back(lr);
      epoch_loss += lv;
      ++iteration;
    }
    out.curve.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    out.curve.val_loss.push_back(posenet_loss(m, swings, split.second));
    spdlog::debug("posenet epoch {} train {:.6f} val {:.6f}", epoch, out.curve.train_loss.back(),
               out.curve.val_loss.back());
  }
  return out;
}

void save_posenet(const PoseNet& m, const std::filesystem::path& dir) {
  nn::save_model(dir, "posenet", to_json_value(m.config), m.params);
}

PoseNet load_posenet(const std::filesystem::path& dir) {
  auto loaded = nn::load_model(dir, "posenet");
  PoseNet m;
  from_json_value(loaded.config, m.config, "posenet");
  m.config.validate();
  m.params = std::move(loaded.params);
  return m;
}

}  // namespace golfsig::pose
