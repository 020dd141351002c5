#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "golfsig/analysis/anomaly.hpp"
#include "golfsig/analysis/heads.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/json_binding.hpp"
#include "test_util.hpp"

namespace golfsig::analysis {
namespace {

using nn::NDArray;
using tok::TokenGrid;

prior::Prior tiny_prior(std::uint64_t seed = 1) {
  prior::PriorConfig c;
  c.transformer = {8, 2, 1, 16, 0.0};
  c.max_frames = 32;
  return prior::init_prior(c, seed);
}

TokenGrid random_grid(std::size_t T, Rng& rng) {
  TokenGrid g{T, 5, {}};
  for (std::size_t i = 0; i < T * 5; ++i) g.codes.push_back(static_cast<std::uint16_t>(rng.below(210)));
  return g;
}

// 12 players, swings per player 5 except player 11 with 2. Female players
// use codes 0..9, male players 100..109.
std::vector<data::SwingRecord> corpus(std::size_t frames = 8) {
  Rng rng(9);
  std::vector<data::SwingRecord> out;
  for (int p = 0; p < 12; ++p) {
    data::PlayerProfile prof;
    prof.id = p;
    prof.sex = p % 2 ? data::Sex::female : data::Sex::male;
    prof.age = 20.0 + 3.0 * p;
    for (int k = 0; k < (p == 11 ? 2 : 5); ++k) {
      data::SwingRecord s;
      s.id = "p" + std::to_string(p) + "s" + std::to_string(k);
      s.player = prof;
      s.club = static_cast<data::Club>(k % 5);
      const int base = prof.sex == data::Sex::female ? 0 : 100;
      for (std::size_t i = 0; i < frames * 5; ++i) s.tokens.push_back(static_cast<std::uint16_t>(base + rng.below(10)));
      out.push_back(std::move(s));
    }
  }
  return out;
}

TEST(Anomaly, ThresholdExtremesAndMonotonicity) {
  const auto prior = tiny_prior();
  Rng rng(1);
  const auto g = random_grid(6, rng);
  auto count = [](const TokenMask& m) { return std::count(m.begin(), m.end(), 1); };
  EXPECT_EQ(count(detect_anomalies(prior, g, 0.0)), 0);
  EXPECT_EQ(count(detect_anomalies(prior, g, 1.0 + 1e-9)), 30);
  const NDArray p = prior::token_probabilities(prior, g);
  TokenMask prev(30, 0);
  for (double thr : {0.001, 0.003, 0.004, 0.005, 0.01, 0.5}) {
    const auto m = threshold_mask(p, thr);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_LE(prev[i], m[i]);
    prev = m;
  }
}

TEST(Anomaly, TopEntriesAndSummary) {
  TokenGrid g{2, 5, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
  NDArray p({2, 5}, std::vector<double>{0.5, 0.01, 0.5, 0.03, 0.5, 0.5, 0.5, 0.02, 0.5, 0.5});
  const auto mask = threshold_mask(p, 0.05);
  const auto top = top_anomalies(g, p, mask, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].frame, 0u);
  EXPECT_EQ(top[0].part, 1u);
  EXPECT_EQ(top[0].token, 2);
  EXPECT_EQ(top[1].frame, 1u);
  EXPECT_EQ(top[1].part, 2u);
  const auto path = golfsig::testing::temp_dir("anomaly") / "summary.json";
  write_anomaly_summary(path, "s1", top, 0.05, 3);
  std::ifstream in(path);
  const Json j = Json::parse(in);
  EXPECT_EQ(j["flagged"], 3);
  EXPECT_EQ(j["top"].size(), 2u);
  EXPECT_EQ(j["top"][0]["part"], "right_arm");
}

TEST(Inpaint, UnmaskedPositionsAreUntouched) {
  const auto prior = tiny_prior();
  Rng gr(2);
  const auto g = random_grid(8, gr);
  TokenMask mask(40, 0);
  for (std::size_t i = 5; i < 20; ++i) mask[i] = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto out = inpaint(prior, g, mask, rng, {.steps = 4, .temperature = 1.0});
    ASSERT_EQ(out.codes.size(), g.codes.size());
    for (std::size_t i = 0; i < 40; ++i) {
      if (!mask[i]) {
        EXPECT_EQ(out.codes[i], g.codes[i]);
      } else {
        EXPECT_LT(out.codes[i], 210);
      }
    }
  }
}

TEST(Inpaint, SingleStepEmptyMaskAndGreedy) {
  const auto prior = tiny_prior();
  Rng gr(3);
  const auto g = random_grid(4, gr);
  Rng rng(1);
  EXPECT_EQ(inpaint(prior, g, TokenMask(20, 0), rng), g);
  TokenMask all(20, 1);
  const auto once = inpaint(prior, g, all, rng, {.steps = 1, .temperature = 1.0});
  for (auto c : once.codes) EXPECT_LT(c, 210);
  Rng a(1), b(99);
  EXPECT_EQ(inpaint(prior, g, all, a, {.steps = 3, .temperature = 0.0}),
            inpaint(prior, g, all, b, {.steps = 3, .temperature = 0.0}));
  EXPECT_THROW(inpaint(prior, g, TokenMask(7, 1), rng), DimensionError);
}

TEST(SwingScore, IdentityAndTwoFrameExample) {
  const tok::FsqSpec spec;
  Rng rng(4);
  const auto a = random_grid(11, rng);
  EXPECT_EQ(swing_score(a, {a}), 0.0);
  // One channel differs by one step in the first of two frames: it covers 32 of
  // 64 resampled frames out of 64 * 5 * 3 coordinates.
  TokenGrid q{2, 5, std::vector<std::uint16_t>(10, 0)};
  TokenGrid d = q;
  d.at(0, 3) = static_cast<std::uint16_t>(tok::fsq_pack(std::vector<int>{0, 1, 0}, spec));
  EXPECT_NEAR(swing_score(q, {d}), 1.0 / 30.0, 1e-15);
}

TEST(SwingScore, SymmetricAndAveragedOverDatabase) {
  Rng rng(5);
  const auto a = random_grid(9, rng), b = random_grid(20, rng), c = random_grid(3, rng);
  EXPECT_EQ(swing_score(a, {b}), swing_score(b, {a}));
  EXPECT_NEAR(swing_score(a, {b, c}), 0.5 * (swing_score(a, {b}) + swing_score(a, {c})), 1e-15);
  EXPECT_GT(swing_score(a, {b}), 0.0);
  EXPECT_THROW(swing_score(a, {}), ValidationError);
}

TEST(Pearson, PerfectCorrelations) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-15);
  EXPECT_EQ(pearson(x, y).p, 0.0);
  EXPECT_NEAR(pearson(x, z).r, -1.0, 1e-15);
}

TEST(Pearson, MatchesRawSumFormula) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(rng.normal());
      y.push_back(0.4 * x.back() + rng.normal());
    }
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 30; ++i) {
      sx += x[i];
      sy += y[i];
      sxy += x[i] * y[i];
      sxx += x[i] * x[i];
      syy += y[i] * y[i];
    }
    const double r = (30 * sxy - sx * sy) / std::sqrt((30 * sxx - sx * sx) * (30 * syy - sy * sy));
    EXPECT_NEAR(pearson(x, y).r, r, 1e-12);
  }
  // Two degrees of freedom: the t tail has the closed form 1 - |t| / sqrt(2 + t^2).
  const std::vector<double> x{0, 1, 2, 3}, y{0.3, 0.9, 2.5, 2.6};
  const auto c = pearson(x, y);
  const double t = c.r * std::sqrt(2.0 / (1 - c.r * c.r));
  EXPECT_NEAR(c.p, 1.0 - std::abs(t) / std::sqrt(2.0 + t * t), 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> x{1, 2, 3}, flat{2, 2, 2};
  EXPECT_THROW(pearson(x, flat), ValidationError);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ValidationError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), DimensionError);
}

TEST(Heads, LabelsAndSplits) {
  const auto swings = corpus();
  const auto player = make_labels(swings, Task::player, 3);
  EXPECT_EQ(player.names.size(), 11u);
  EXPECT_EQ(std::count(player.classes.begin(), player.classes.end(), -1), 2);

  const auto s = split_for_task(swings, player, Task::player, 0.7, 0.15, 1);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), swings.size() - 2);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    std::set<int> seen;
    for (auto i : *part) seen.insert(player.classes[i]);
    EXPECT_EQ(seen.size(), 11u);  // every player in every split
  }

  const auto age = make_labels(swings, Task::age, 3);
  const auto a = split_for_task(swings, age, Task::age, 0.7, 0.15, 2);
  EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), swings.size());
  std::set<int> tr, va, te;
  for (auto i : a.train) tr.insert(swings[i].player.id);
  for (auto i : a.val) va.insert(swings[i].player.id);
  for (auto i : a.test) te.insert(swings[i].player.id);
  for (int p : te) {
    EXPECT_FALSE(tr.count(p));
    EXPECT_FALSE(va.count(p));
  }
  for (int p : va) EXPECT_FALSE(tr.count(p));
  EXPECT_FALSE(va.empty());
  EXPECT_FALSE(te.empty());

  const auto sex = make_labels(swings, Task::sex, 3);
  const auto b = split_for_task(swings, sex, Task::sex, 0.7, 0.15, 3);
  EXPECT_EQ(b.train.size(), 40u);  // round(0.7 * 57)
  EXPECT_EQ(b.val.size(), 9u);
  EXPECT_EQ(b.test.size(), 8u);
}

TEST(Heads, FoldedBatchNormMatchesEvaluation) {
  Rng rng(7);
  auto h = init_head(HeadMode::mlp_finetune, Task::club, 6, 10, 5, 0.3, 1);
  for (const char* n : {"bn.gamma", "bn.beta", "bn.running_mean"})
    for (auto& v : h.params.get(n).values()) v = rng.uniform(-1, 1);
  for (auto& v : h.params.get("bn.running_var").values()) v = rng.uniform(0.2, 2);
  const NDArray x = golfsig::testing::random_array({4, 6}, rng);
  nn::Graph g, gf;
  const auto f = fold_batchnorm(h);
  EXPECT_TRUE(f.folded);
  EXPECT_FALSE(f.params.contains("bn.gamma"));
  const NDArray a = head_forward(g, h, g.constant(x)).value(), b = head_forward(gf, f, gf.constant(x)).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Lrp, ConservationForBothHeadKinds) {
  Rng rng(8);
  for (auto mode : {HeadMode::linear_probe, HeadMode::mlp_finetune}) {
    auto h = fold_batchnorm(init_head(mode, Task::sex, 6, 12, 2, 0.0, 2));
    for (int trial = 0; trial < 10; ++trial) {
      // Pooled channels away from zero, as after the final layer norm of a trained backbone.
      NDArray feats = golfsig::testing::random_array({4 * 5, 6}, rng);
      for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 6; ++j) feats(i, j) += j % 2 ? 1.0 : -1.0;
      for (std::size_t target : {0u, 1u}) {
        // Without the stabiliser every layer redistributes exactly.
        const auto exact = lrp_from_token_features(h, feats, 4, 5, target, 0.0);
        double sum = 0.0;
        for (double v : exact.map.values()) sum += v;
        EXPECT_NEAR(sum, exact.logit, 1e-12);

        const auto r = lrp_from_token_features(h, feats, 4, 5, target);
        sum = 0.0;
        for (double v : r.map.values()) sum += v;
        EXPECT_NEAR(sum, r.logit, 1e-3 * std::abs(r.logit));
        nn::Graph g;
        NDArray mean({1, 6});
        for (std::size_t i = 0; i < 20; ++i)
          for (std::size_t j = 0; j < 6; ++j) mean[j] += feats(i, j) / 20.0;
        EXPECT_NEAR(r.logit, head_forward(g, h, g.constant(mean)).value()[target], 1e-12);
      }
    }
  }
}

TEST(Lrp, SingleLayerAnalyticAndZeroFeatures) {
  auto h = init_head(HeadMode::linear_probe, Task::sex, 2, 0, 2, 0.0, 3);
  h.params.get("fc.weight") = NDArray({2, 2}, std::vector<double>{1.0, 0.0, -2.0, 0.0});
  h.params.get("fc.bias") = NDArray({2}, std::vector<double>{0.5, 0.0});
  // One frame, two parts.
  const NDArray feats({2, 2}, std::vector<double>{1.0, 1.0, 3.0, 1.0});
  // x = (2, 1); logit = 2 - 2 + 0.5 = 0.5; R_x = (2 + 0.25, -2 + 0.25)
  const auto r = lrp_from_token_features(h, feats, 1, 2, 0, 0.0);
  EXPECT_NEAR(r.logit, 0.5, 1e-15);
  // token i gets feats(i, j) / 2 / x_j of R_x_j
  EXPECT_NEAR(r.map[0], (0.5 / 2.0) * 2.25 + (0.5 / 1.0) * -1.75, 1e-14);
  EXPECT_NEAR(r.map[1], (1.5 / 2.0) * 2.25 + (0.5 / 1.0) * -1.75, 1e-14);

  const auto z = lrp_from_token_features(h, NDArray({2, 2}), 1, 2, 0);
  for (double v : z.map.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lrp, RefusesUnfoldedBatchNorm) {
  const auto h = init_head(HeadMode::mlp_finetune, Task::sex, 8, 4, 2, 0.0, 4);
  const auto prior = tiny_prior();
  Rng rng(9);
  const auto g = random_grid(3, rng);
  EXPECT_THROW(lrp_relevance(h, prior, g, 0), ValidationError);
  const auto r = lrp_relevance(fold_batchnorm(h), prior, g, 1);
  EXPECT_EQ(r.map.rows(), 3u);
  EXPECT_EQ(r.map.cols(), 5u);
}

TEST(Heads, LinearProbeSeparatesSexAndRoundTrips) {
  const auto swings = corpus();
  const auto prior = tiny_prior();
  HeadConfig c;
  c.lr_head = 3e-2;
  c.batch = 8;
  c.max_epochs = 60;
  const auto r = fit_head(prior, swings, c, 11);
  EXPECT_GE(r.test_metric, r.baseline + 0.2) << "baseline " << r.baseline;
  EXPECT_EQ(r.excluded, 0u);
  EXPECT_FALSE(r.val_curve.empty());
  EXPECT_EQ(fit_head(prior, swings, c, 11).test_metric, r.test_metric);

  const auto dir = golfsig::testing::temp_dir("head");
  save_head(r.head, dir);
  const auto back = load_head(dir);
  EXPECT_EQ(back.classes, r.head.classes);
  std::vector<const TokenGrid*> gs;
  std::vector<TokenGrid> grids;
  for (const auto& s : swings) grids.push_back({s.tokens.size() / 5, 5, s.tokens});
  for (const auto& g : grids) gs.push_back(&g);
  const NDArray out = predict_head(back, prior, gs);
  EXPECT_EQ(out, predict_head(r.head, prior, gs));
  // The stored head takes raw features and reproduces the reported test accuracy.
  double hits = 0;
  for (auto i : r.split.test) hits += (out(i, 1) > out(i, 0)) == (swings[i].player.sex == data::Sex::female);
  EXPECT_NEAR(hits / static_cast<double>(r.split.test.size()), r.test_metric, 1e-12);
}

TEST(Heads, FineTuneAndAgeRegression) {
  auto swings = corpus();
  // Unequal lengths go through separate passes.
  swings[3].tokens.resize(6 * 5);
  const auto prior = tiny_prior();
  HeadConfig c;
  c.mode = "mlp-finetune";
  c.hidden = 8;
  c.batch = 8;
  c.max_epochs = 3;
  const auto r = fit_head(prior, swings, c, 12);
  EXPECT_TRUE(std::isfinite(r.test_metric));
  EXPECT_NE(r.backbone.params.get("token.table"), prior.params.get("token.table"));

  c.task = "age";
  c.mode = "linear-probe";
  const auto a = fit_head(prior, swings, c, 13);
  EXPECT_TRUE(std::isfinite(a.test_metric));
  EXPECT_GT(a.baseline, 0.0);
  EXPECT_TRUE(a.head.classes.empty());

  swings[0].tokens.clear();
  EXPECT_THROW(fit_head(prior, swings, c, 1), ValidationError);
  c.task = "height";
  EXPECT_THROW(fit_head(prior, corpus(), c, 1), ConfigError);
}

}  // namespace
}  // namespace golfsig::analysis
