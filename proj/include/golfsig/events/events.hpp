#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <map>

#include "golfsig/data/swing.hpp"
#include "golfsig/nn/graph.hpp"

namespace golfsig::events {

inline constexpr std::size_t kClasses = data::kEvents + 1;
inline constexpr int kBackground = static_cast<int>(data::kEvents);

using EventFrames = std::array<int, data::kEvents>;

struct EventConfig {
  std::size_t input = 156;
  std::size_t hidden = 256;
  std::size_t crop = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double train_fraction = 0.8;

  void validate() const;
};

template <class V>
void describe(V& v, EventConfig& c) {
  v("input", c.input);
  v("hidden", c.hidden);
  v("crop", c.crop);
  v("lr", c.lr);
  v("weight_decay", c.weight_decay);
  v("batch", c.batch);
  v("max_epochs", c.max_epochs);
  v("patience", c.patience);
  v("train_fraction", c.train_fraction);
}

struct EventModel {
  EventConfig config;
  nn::ParameterStore params;
};

EventModel init_event_model(const EventConfig& config, std::uint64_t seed);

/// x: (batch * crop) x input. Returns logits over 8 events + background.
nn::Var event_forward(nn::Graph& g, const EventModel& model, nn::Var x, std::size_t batch);

/// T x 9 per-frame distributions. The sequence runs through the network in
/// independent crop-length windows, the last one zero-padded.
nn::NDArray event_probabilities(const EventModel& model, const nn::NDArray& pose);

/// Per event, the earliest frame with the highest probability among frames
/// where `valid` is nonzero (all frames when `valid` is empty).
EventFrames decode_events(const nn::NDArray& probabilities, const std::vector<std::uint8_t>& valid = {});

/// All-zero pose rows are padding and never win.
EventFrames detect_events(const EventModel& model, const nn::NDArray& pose);

/// Inverse class frequency scaled to mean 1. Classes absent from the counts
/// are an error.
std::vector<double> class_weights(const std::vector<std::size_t>& counts);

/// Stops after `patience` consecutive epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  /// Returns true when training should stop.
  bool update(double value);
  bool improved() const { return stagnant_ == 0; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stagnant_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

/// Percentage of events within +-tolerance frames, pooled over swings.
double pce(const std::vector<EventFrames>& predicted, const std::vector<EventFrames>& truth, int tolerance = 1);

/// Expected PCE of a detector that picks uniformly random frames.
double random_pce(const std::vector<EventFrames>& truth, const std::vector<std::size_t>& lengths, int tolerance = 1);

struct EventCurve {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t epochs = 0;
};

struct EventTraining {
  EventModel model;  // parameters of the best validation epoch
  EventCurve curve;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
  std::vector<double> class_weights;
  std::size_t skipped = 0;
};

/// Trains on `swing.motion.pose` with per-frame labels from `swing.events`.
EventTraining train_event_detector(const std::vector<data::SwingRecord>& swings, const EventConfig& config,
                                   std::uint64_t seed);

/// Weighted cross-entropy over the swings' aligned crop windows.
double event_loss(const EventModel& model, const std::vector<data::SwingRecord>& swings,
                  const std::vector<std::size_t>& ids, const std::vector<double>& weights);

void save_event_model(const EventModel& model, const std::filesystem::path& dir);
EventModel load_event_model(const std::filesystem::path& dir);

/// {"swing id": [8 frame indices], ...}
void write_event_predictions(const std::filesystem::path& path, const std::map<std::string, EventFrames>& predictions);
std::map<std::string, EventFrames> read_event_predictions(const std::filesystem::path& path);

}  // namespace golfsig::events
