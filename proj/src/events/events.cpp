#include "golfsig/events/events.hpp"

#include <cmath>
#include <fstream>

#include "golfsig/nn/layers.hpp"
#include "golfsig/nn/model_io.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/nn/optim.hpp"
#include "golfsig/nn/transformer.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"
#include "json.hpp"

namespace golfsig::events {

using nn::NDArray;

void EventConfig::validate() const {
  if (input == 0 || hidden == 0) throw ConfigError("events.input and events.hidden must be positive");
  if (crop < 2) throw ConfigError("events.crop must be at least 2");
  if (batch == 0) throw ConfigError("events.batch must be positive");
  if (patience == 0) throw ConfigError("events.patience must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("events.train_fraction must be in (0, 1)");
}

EventModel init_event_model(const EventConfig& config, std::uint64_t seed) {
  config.validate();
  EventModel m{config, {}};
  Rng rng(seed);
  nn::init_bilstm(m.params, "lstm", config.input, config.hidden, rng);
  nn::init_layer(nn::LayerSpec::linear(2 * config.hidden, kClasses), m.params, "head", rng);
  return m;
}

nn::Var event_forward(nn::Graph& g, const EventModel& m, nn::Var x, std::size_t batch) {
  const auto& c = m.config;
  if (x.rows() != batch * c.crop || x.cols() != c.input)
    throw DimensionError("events: input must be (batch * " + std::to_string(c.crop) + ") x " +
                         std::to_string(c.input) + ", got " + nn::shape_string(x.value().shape()));
  auto h = nn::bilstm_forward(g, x, m.params, "lstm", {batch, c.crop});
  return nn::primitive_forward(g, nn::LayerSpec::linear(2 * c.hidden, kClasses), h, m.params, "head");
}

namespace {

void check_pose(const EventModel& m, const NDArray& pose) {
  if (pose.ndim() != 2 || pose.cols() != m.config.input)
    throw DimensionError("events: pose axis 1 must be " + std::to_string(m.config.input) + ", got shape " +
                         nn::shape_string(pose.shape()));
}

// Labels for frames [start, start + L): the event index or background.
std::vector<int> crop_labels(const data::SwingRecord& s, std::size_t start, std::size_t L) {
  std::vector<int> y(L, kBackground);
  for (std::size_t e = 0; e < data::kEvents; ++e) {
    const int f = s.events[e];
    if (f >= static_cast<int>(start) && f < static_cast<int>(start + L)) y[static_cast<std::size_t>(f) - start] = static_cast<int>(e);
  }
  return y;
}

// Crop starts used for evaluation: consecutive windows, the last shifted
// back so it ends at the final frame.
std::vector<std::size_t> aligned_starts(std::size_t T, std::size_t L) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < T; s += L) starts.push_back(std::min(s, T - L));
  return starts;
}

}  // namespace

NDArray event_probabilities(const EventModel& m, const NDArray& pose) {
  check_pose(m, pose);
  const std::size_t T = pose.rows(), L = m.config.crop;
  if (T == 0) throw ValidationError("events: empty pose sequence");
  const std::size_t n = (T + L - 1) / L;
  NDArray x({n * L, m.config.input});
  std::copy(pose.values().begin(), pose.values().end(), x.values().begin());
  nn::Graph g;
  auto p = nn::softmax_rows(event_forward(g, m, g.constant(std::move(x)), n)).value();
  NDArray out({T, kClasses});
  std::copy_n(p.values().begin(), T * kClasses, out.values().begin());
  return out;
}

EventFrames decode_events(const NDArray& probs, const std::vector<std::uint8_t>& valid) {
  if (probs.ndim() != 2 || probs.cols() < data::kEvents)
    throw DimensionError("decode_events: probabilities must be T x 9, got " + nn::shape_string(probs.shape()));
  if (!valid.empty() && valid.size() != probs.rows()) throw DimensionError("decode_events: mask length differs from T");
  EventFrames out;
  out.fill(0);
  for (std::size_t e = 0; e < data::kEvents; ++e) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < probs.rows(); ++t) {
      if (!valid.empty() && !valid[t]) continue;
      if (probs(t, e) > best) {
        best = probs(t, e);
        out[e] = static_cast<int>(t);
      }
    }
  }
  return out;
}

EventFrames detect_events(const EventModel& m, const NDArray& pose) {
  const NDArray p = event_probabilities(m, pose);
  std::vector<std::uint8_t> valid(pose.rows(), 0);
  for (std::size_t t = 0; t < pose.rows(); ++t)
    for (double v : pose.row(t))
      if (v != 0.0) {
        valid[t] = 1;
        break;
      }
  if (std::find(valid.begin(), valid.end(), 1) == valid.end()) valid.assign(pose.rows(), 1);
  return decode_events(p, valid);
}

std::vector<double> class_weights(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw ValidationError("class_weights: no classes");
  double total = 0.0;
  for (auto n : counts) total += static_cast<double>(n);
  std::vector<double> w(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw ValidationError("class_weights: class " + std::to_string(k) + " never occurs");
    w[k] = total / static_cast<double>(counts[k]);
  }
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

bool EarlyStopping::update(double value) {
  if (value < best_) {
    best_ = value;
    stagnant_ = 0;
    return false;
  }
  return ++stagnant_ >= patience_;
}

double pce(const std::vector<EventFrames>& pred, const std::vector<EventFrames>& truth, int tolerance) {
  if (pred.size() != truth.size())
    throw DimensionError("pce: " + std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) +
                         " ground-truth swings");
  if (truth.empty()) throw ValidationError("pce: no swings");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t e = 0; e < data::kEvents; ++e) hit += std::abs(pred[i][e] - truth[i][e]) <= tolerance;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size() * data::kEvents);
}

double random_pce(const std::vector<EventFrames>& truth, const std::vector<std::size_t>& lengths, int tolerance) {
  if (truth.size() != lengths.size() || truth.empty()) throw DimensionError("random_pce: one length per swing");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int T = static_cast<int>(lengths[i]);
    for (int f : truth[i]) {
      const int lo = std::max(0, f - tolerance), hi = std::min(T - 1, f + tolerance);
      sum += static_cast<double>(std::max(0, hi - lo + 1)) / T;
    }
  }
  return 100.0 * sum / static_cast<double>(truth.size() * data::kEvents);
}

double event_loss(const EventModel& m, const std::vector<data::SwingRecord>& swings,
                  const std::vector<std::size_t>& ids, const std::vector<double>& weights) {
  const std::size_t L = m.config.crop;
  std::vector<std::pair<std::size_t, std::size_t>> crops;
  for (auto i : ids)
    if (swings[i].frames() >= L)
      for (auto s : aligned_starts(swings[i].frames(), L)) crops.emplace_back(i, s);
  if (crops.empty()) return 0.0;
  NDArray x({crops.size() * L, m.config.input});
  std::vector<int> y;
  for (std::size_t b = 0; b < crops.size(); ++b) {
    const auto& [i, start] = crops[b];
    std::copy_n(swings[i].motion.pose.row(start).begin(), L * m.config.input, x.row(b * L).begin());
    const auto lab = crop_labels(swings[i], start, L);
    y.insert(y.end(), lab.begin(), lab.end());
  }
  nn::Graph g;
  return nn::cross_entropy(event_forward(g, m, g.constant(std::move(x)), crops.size()), y, &weights).value()[0];
}

EventTraining train_event_detector(const std::vector<data::SwingRecord>& swings, const EventConfig& config,
                                   std::uint64_t seed) {
  config.validate();
  const std::size_t L = config.crop;
  std::vector<std::size_t> usable;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < swings.size(); ++i) {
    const auto& s = swings[i];
    if (!s.has_pose()) throw ValidationError(s.id + ": event training needs pose data");
    for (int f : s.events)
      if (f < 0 || f >= static_cast<int>(s.frames())) throw ValidationError(s.id + ": event frame outside the swing");
    if (s.frames() < L) {
      spdlog::warn("{}: {} frames is shorter than the {}-frame crop, skipped", s.id, s.frames(), L);
      ++skipped;
      continue;
    }
    usable.push_back(i);
  }
  if (usable.size() < 2) throw ValidationError("event training needs at least two swings of crop length");

  Rng rng = Rng::derive(seed, 0x6576656e);
  auto split = nn::split_indices(usable.size(), config.train_fraction, rng);
  if (split.first.empty() || split.second.empty()) throw ValidationError("event split left an empty partition");
  EventTraining out{init_event_model(config, seed), {}, {}, {}, {}, skipped};
  for (auto k : split.first) out.train_ids.push_back(usable[k]);
  for (auto k : split.second) out.val_ids.push_back(usable[k]);

  std::vector<std::size_t> counts(kClasses, 0);
  for (auto i : out.train_ids) {
    counts[kBackground] += swings[i].frames() - data::kEvents;
    for (std::size_t e = 0; e < data::kEvents; ++e) ++counts[e];
  }
  out.class_weights = class_weights(counts);

  EventModel& m = out.model;
  nn::ParameterStore best = m.params;
  EarlyStopping stop(config.patience);
  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> starts(out.train_ids.size());
    for (std::size_t k = 0; k < starts.size(); ++k) starts[k] = rng.below(swings[out.train_ids[k]].frames() - L + 1);
    const auto batches = nn::make_batches(out.train_ids.size(), config.batch, rng);
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const std::size_t B = batch.size();
      NDArray x({B * L, config.input});
      std::vector<int> y;
      y.reserve(B * L);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& s = swings[out.train_ids[batch[b]]];
        const std::size_t start = starts[batch[b]];
        std::copy_n(s.motion.pose.row(start).begin(), L * config.input, x.row(b * L).begin());
        const auto lab = crop_labels(s, start, L);
        y.insert(y.end(), lab.begin(), lab.end());
      }
      nn::Graph g(true, seed ^ (iteration * 0x9E3779B97F4A7C15ULL));
      auto loss = nn::cross_entropy(event_forward(g, m, g.constant(std::move(x)), B), y, &out.class_weights);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingError("event loss is not finite at iteration " + std::to_string(iteration));
      g.backward(loss);
      nn::adam_step(m.params, g.parameter_gradients(), {.lr = config.lr, .weight_decay = config.weight_decay});
      epoch_loss += lv;
      ++iteration;
    }
    out.curve.train_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
    out.curve.val_loss.push_back(event_loss(m, swings, out.val_ids, out.class_weights));
    out.curve.epochs = epoch + 1;
    const bool done = stop.update(out.curve.val_loss.back());
    if (stop.improved()) {
      best = m.params;
      out.curve.best_epoch = epoch;
    }
    spdlog::debug("events epoch {} train {:.5f} val {:.5f}", epoch, out.curve.train_loss.back(),
                  out.curve.val_loss.back());
    if (done) {
      spdlog::info("events: early stop after epoch {} (best {})", epoch, out.curve.best_epoch);
      break;
    }
  }
  m.params = std::move(best);
  return out;
}

void save_event_model(const EventModel& m, const std::filesystem::path& dir) {
  nn::save_model(dir, "events", to_json_value(m.config), m.params);
}

EventModel load_event_model(const std::filesystem::path& dir) {
  auto loaded = nn::load_model(dir, "events");
  EventModel m;
  from_json_value(loaded.config, m.config, "events");
  m.config.validate();
  m.params = std::move(loaded.params);
  return m;
}

void write_event_predictions(const std::filesystem::path& path, const std::map<std::string, EventFrames>& predictions) {
  Json j = Json::object();
  for (const auto& [id, f] : predictions) j[id] = f;
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

std::map<std::string, EventFrames> read_event_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::map<std::string, EventFrames> out;
  if (!j.is_object()) throw FormatError(path.string() + ": expected an object of swing ids");
  for (const auto& [id, v] : j.items()) {
    if (!v.is_array() || v.size() != data::kEvents) throw FormatError(path.string() + ": " + id + " needs 8 frame indices");
    EventFrames f;
    for (std::size_t e = 0; e < data::kEvents; ++e) f[e] = v[e].get<int>();
    out[id] = f;
  }
  return out;
}

}  // namespace golfsig::events
