#include <gtest/gtest.h>

#include <cmath>

#include "golfsig/data/generator.hpp"
#include "golfsig/events/events.hpp"
#include "golfsig/nn/gradcheck.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::events {
namespace {

using golfsig::testing::random_array;
using nn::NDArray;

const std::vector<data::SwingRecord>& corpus() {
  static const auto c = data::generate_corpus(kin::Skeleton::default_skeleton(), {.swings = 200, .players = 20}, 31);
  return c;
}

EventConfig tiny() {
  EventConfig c;
  c.hidden = 8;
  c.crop = 8;
  return c;
}

TEST(Events, PceToleranceRule) {
  EventFrames gt{100, 110, 120, 130, 140, 150, 160, 170};
  EventFrames p = gt;
  EXPECT_EQ(pce({p}, {gt}), 100.0);
  p[0] = 101;
  EXPECT_EQ(pce({p}, {gt}), 100.0);
  p[0] = 102;
  EXPECT_EQ(pce({p}, {gt}), 87.5);
  p[1] = 109;
  EXPECT_EQ(pce({p}, {gt}), 87.5);
  EXPECT_THROW(pce({p, p}, {gt}), DimensionError);
}

TEST(Events, PceMatchesBruteForceCount) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<EventFrames> pred(n), gt(n);
    int hits = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t e = 0; e < 8; ++e) {
        gt[i][e] = static_cast<int>(rng.below(64));
        pred[i][e] = gt[i][e] + static_cast<int>(rng.below(7)) - 3;
        const int d = pred[i][e] - gt[i][e];
        if (d == -1 || d == 0 || d == 1) ++hits;
      }
    const double v = pce(pred, gt);
    EXPECT_DOUBLE_EQ(v, 100.0 * hits / (8.0 * static_cast<double>(n)));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
}

TEST(Events, RandomBaselineMatchesEnumeration) {
  const std::vector<EventFrames> gt{{0, 5, 10, 20, 30, 40, 50, 63}};
  double hits = 0.0;
  for (std::size_t e = 0; e < 8; ++e)
    for (int f = 0; f < 64; ++f) hits += std::abs(f - gt[0][e]) <= 1;
  EXPECT_NEAR(random_pce(gt, {64}), 100.0 * hits / (8.0 * 64.0), 1e-12);
}

TEST(Events, ClassWeights) {
  const auto w = class_weights({16, 1});
  EXPECT_NEAR(w[1] / w[0], 16.0, 1e-12);
  EXPECT_NEAR((w[0] + w[1]) / 2.0, 1.0, 1e-9);
  Rng rng(2);
  std::vector<std::size_t> counts(9);
  for (auto& c : counts) c = 1 + rng.below(1000);
  const auto v = class_weights(counts);
  double mean = 0.0;
  for (double x : v) mean += x;
  EXPECT_NEAR(mean / 9.0, 1.0, 1e-9);
  for (std::size_t k = 1; k < 9; ++k)
    EXPECT_NEAR(v[k] * static_cast<double>(counts[k]), v[0] * static_cast<double>(counts[0]), 1e-9);
  EXPECT_THROW(class_weights({3, 0}), ValidationError);
}

TEST(Events, EarlyStoppingAfterExactlyPatienceEpochs) {
  EarlyStopping s(10);
  EXPECT_FALSE(s.update(1.0));
  EXPECT_FALSE(s.update(0.5));
  for (int k = 1; k < 10; ++k) EXPECT_FALSE(s.update(0.5 + 0.01 * k)) << k;
  EXPECT_TRUE(s.update(0.7));
  EXPECT_EQ(s.best(), 0.5);
}

TEST(Events, DecodeUniquePeaksAndTies) {
  NDArray p({30, 9}, 0.01);
  for (std::size_t e = 0; e < 8; ++e) p(3 * e + 1, e) = 0.9;
  const auto f = decode_events(p);
  for (std::size_t e = 0; e < 8; ++e) EXPECT_EQ(f[e], static_cast<int>(3 * e + 1));
  p(20, 0) = 0.9;
  p(10, 0) = 0.95;
  p(20, 0) = 0.95;
  EXPECT_EQ(decode_events(p)[0], 10);
  std::vector<std::uint8_t> valid(30, 1);
  valid[10] = 0;
  EXPECT_EQ(decode_events(p, valid)[0], 20);
}

TEST(Events, ProbabilitiesAreDistributionsAndPaddingIsMasked) {
  const auto m = init_event_model(tiny(), 3);
  Rng rng(4);
  const NDArray pose = random_array({21, 156}, rng);
  const NDArray p = event_probabilities(m, pose);
  ASSERT_EQ(p.shape(), (nn::Shape{21, 9}));
  for (std::size_t t = 0; t < 21; ++t) {
    double s = 0.0;
    for (double v : p.row(t)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  // 21 frames run as three windows of 8; every detection is a real frame.
  for (int f : detect_events(m, pose)) EXPECT_LT(f, 21);
  // Windows are independent: frames of the first window ignore the rest.
  NDArray head({8, 156});
  std::copy_n(pose.values().begin(), 8 * 156, head.values().begin());
  const NDArray q = event_probabilities(m, head);
  for (std::size_t i = 0; i < 8 * 9; ++i) EXPECT_NEAR(q[i], p[i], 1e-12);
}

TEST(Events, DetectionIgnoresAppendedBackgroundPadding) {
  const auto m = init_event_model(tiny(), 5);
  Rng rng(6);
  for (std::size_t T : {5u, 8u, 13u, 16u}) {
    const NDArray pose = random_array({T, 156}, rng);
    const auto base = detect_events(m, pose);
    for (std::size_t extra : {1u, 3u, 8u, 11u}) {
      NDArray longer({T + extra, 156});
      std::copy(pose.values().begin(), pose.values().end(), longer.values().begin());
      EXPECT_EQ(detect_events(m, longer), base) << T << "+" << extra;
    }
  }
}

TEST(Events, GradientCheckOfWeightedLoss) {
  auto m = init_event_model(tiny(), 7);
  m.config.input = 6;
  m = init_event_model(EventConfig{.input = 6, .hidden = 5, .crop = 4}, 7);
  Rng rng(8);
  const NDArray x = random_array({8, 6}, rng);
  const std::vector<int> y{8, 0, 8, 3, 1, 8, 8, 7};
  const auto w = class_weights({10, 1, 2, 1, 3, 1, 1, 2, 40});
  auto report = nn::grad_check(
      [&](nn::Graph& g, const nn::ParameterStore& p) {
        EventModel view{m.config, p};
        return nn::cross_entropy(event_forward(g, view, g.constant(x), 2), y, &w);
      },
      m.params, {.max_entries = 30});
  EXPECT_LT(report.max_error(), 1e-4) << report.summary();
}

TEST(Events, TrainingReducesLossAndDetects) {
  EventConfig c;
  c.hidden = 32;
  c.max_epochs = 6;
  const auto t = train_event_detector(corpus(), c, 9);
  EXPECT_LT(t.curve.train_loss.back(), t.curve.train_loss.front());
  EXPECT_EQ(t.train_ids.size(), 160u);
  double mean = 0.0;
  for (double v : t.class_weights) mean += v;
  EXPECT_NEAR(mean / 9.0, 1.0, 1e-9);
  EXPECT_GT(t.class_weights[0], 10.0 * t.class_weights[8]);
  // The returned parameters are those of the best validation epoch.
  EXPECT_NEAR(event_loss(t.model, corpus(), t.val_ids, t.class_weights), t.curve.val_loss[t.curve.best_epoch], 1e-12);
}

TEST(Events, EarlyStopsOnStagnantValidation) {
  EventConfig c = tiny();
  c.lr = 0.0;  // validation never improves after the first epoch
  c.max_epochs = 50;
  c.crop = 32;
  std::vector<data::SwingRecord> few(corpus().begin(), corpus().begin() + 10);
  const auto t = train_event_detector(few, c, 10);
  EXPECT_EQ(t.curve.epochs, 11u);
  EXPECT_EQ(t.curve.best_epoch, 0u);
}

TEST(Events, ShortSwingsAreSkipped) {
  std::vector<data::SwingRecord> few(corpus().begin(), corpus().begin() + 6);
  EventConfig c = tiny();
  c.crop = 60;
  c.max_epochs = 1;
  auto& s = few[0];
  s.motion.pose = NDArray({40, 156});
  for (auto& f : s.events) f = std::min(f, 39);
  EXPECT_EQ(train_event_detector(few, c, 1).skipped, 1u);
}

TEST(Events, CheckpointAndPredictionRoundTrip) {
  const auto m = init_event_model(tiny(), 11);
  const auto dir = golfsig::testing::temp_dir("events");
  save_event_model(m, dir / "ckpt");
  const auto back = load_event_model(dir / "ckpt");
  Rng rng(12);
  const NDArray pose = random_array({19, 156}, rng);
  EXPECT_EQ(detect_events(m, pose), detect_events(back, pose));
  std::map<std::string, EventFrames> preds{{"swing_00001", {1, 2, 3, 4, 5, 6, 7, 8}}};
  write_event_predictions(dir / "events.json", preds);
  EXPECT_EQ(read_event_predictions(dir / "events.json"), preds);
}

}  // namespace
}  // namespace golfsig::events
