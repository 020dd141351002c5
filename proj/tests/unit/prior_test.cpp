#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "golfsig/nn/gradcheck.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/prior/prior.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::prior {
namespace {

using nn::NDArray;
using tok::TokenGrid;

TokenGrid random_grid(std::size_t T, Rng& rng, std::size_t codebook = 210) {
  TokenGrid g{T, 5, {}};
  for (std::size_t i = 0; i < T * 5; ++i) g.codes.push_back(static_cast<std::uint16_t>(rng.below(codebook)));
  return g;
}

PriorConfig tiny() {
  PriorConfig c;
  c.transformer = {8, 2, 1, 16, 0.0};
  c.max_frames = 16;
  return c;
}

std::size_t count(const std::vector<std::uint8_t>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1)); }

TEST(Gamma, Values) {
  EXPECT_EQ(gamma(0.0), 1.0);
  EXPECT_EQ(gamma(1.0), 0.0);
  EXPECT_NEAR(gamma(0.5), std::sqrt(2.0) / 2.0, 1e-15);
  for (int i = 0; i < 100; ++i) EXPECT_GT(gamma(i / 100.0), gamma((i + 1) / 100.0));
  EXPECT_THROW(gamma(-0.01), ValidationError);
  EXPECT_THROW(gamma(1.01), ValidationError);
}

TEST(Gamma, ExpectationOverUniformTau) {
  Rng rng(1);
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += gamma(rng.uniform());
  EXPECT_NEAR(s / n, 2.0 / std::numbers::pi, 0.01 * 2.0 / std::numbers::pi);
}

TEST(Masking, NothingSelectedAtTauOne) {
  Rng rng(2);
  const auto g = random_grid(10, rng);
  const auto m = apply_masking(g, 1.0, rng);
  EXPECT_EQ(count(m.target), 0u);
  EXPECT_EQ(m.tokens, g);
}

TEST(Masking, HalfRatioOnThirtyTwoFrames) {
  Rng rng(3);
  const auto g = random_grid(32, rng);
  // gamma(1/2) = 0.7071: round(22.6) = 23 frames, floor(3.54) = 3 parts in the other 9.
  EXPECT_EQ(count(apply_masking(g, 0.5, rng).target), 23u * 5u + 9u * 3u);
  // tau with gamma exactly 1/2: 16 frames + 2 parts in each of 16 frames.
  const double tau = 2.0 / 3.0;
  EXPECT_NEAR(gamma(tau), 0.5, 1e-15);
  const auto m = apply_masking(g, tau, rng);
  EXPECT_EQ(count(m.target), 112u);
  std::size_t full = 0, two = 0;
  for (std::size_t t = 0; t < 32; ++t) {
    std::size_t k = 0;
    for (std::size_t p = 0; p < 5; ++p) k += m.target[t * 5 + p];
    full += k == 5;
    two += k == 2;
  }
  EXPECT_EQ(full, 16u);
  EXPECT_EQ(two, 16u);
}

TEST(Masking, CountMatchesClosedFormAndUnselectedStayPut) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + rng.below(80);
    const double tau = rng.uniform();
    const double gm = std::cos(std::numbers::pi * tau / 2.0);
    const auto frames = static_cast<std::size_t>(std::llround(gm * static_cast<double>(T)));
    std::size_t expected = 5 * frames + (T - frames) * static_cast<std::size_t>(std::floor(5.0 * gm));
    if (gm > 0.0 && expected == 0) expected = 1;
    const auto g = random_grid(T, rng);
    const auto m = apply_masking(g, tau, rng);
    EXPECT_EQ(count(m.target), expected) << "T=" << T << " tau=" << tau;
    for (std::size_t i = 0; i < T * 5; ++i) {
      if (!m.target[i]) {
        EXPECT_EQ(m.tokens.codes[i], g.codes[i]);
      }
      EXPECT_LE(m.tokens.codes[i], 210);
    }
  }
}

TEST(Masking, EightyTenTenSplit) {
  Rng rng(5);
  std::size_t mask = 0, changed = 0, kept = 0, total = 0;
  while (total < 100000) {
    const auto g = random_grid(40, rng);
    const auto m = apply_masking(g, 0.0, rng);
    for (std::size_t i = 0; i < g.codes.size(); ++i) {
      if (!m.target[i]) continue;
      ++total;
      if (m.tokens.codes[i] == 210)
        ++mask;
      else if (m.tokens.codes[i] != g.codes[i])
        ++changed;
      else
        ++kept;
    }
  }
  const double n = static_cast<double>(total);
  EXPECT_NEAR(mask / n, 0.8, 0.01);
  // A random code equals the original with probability 1/210, which moves
  // 0.1/210 of the mass from "random" to "unchanged".
  EXPECT_NEAR(changed / n, 0.1 * 209.0 / 210.0, 0.01);
  EXPECT_NEAR(kept / n, 0.1 + 0.1 / 210.0, 0.01);
}

TEST(PriorModel, ShapesDistributionsAndDeterminism) {
  const auto m = init_prior(tiny(), 6);
  Rng rng(7);
  const auto g = random_grid(9, rng);
  const NDArray y = prior_logits(m, g);
  EXPECT_EQ(y.shape(), (nn::Shape{9, 5, 210}));
  EXPECT_EQ(prior_logits(m, g), y);
  nn::Graph gr;
  const NDArray p = nn::softmax_rows(gr.constant(y.reshaped({45, 210}))).value();
  for (std::size_t r = 0; r < 45; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  TokenGrid bad = g;
  bad.codes[3] = 211;
  EXPECT_THROW(prior_logits(m, bad), ValidationError);
  TokenGrid masked = g;
  masked.codes[3] = 210;
  EXPECT_NO_THROW(prior_logits(m, masked));
}

TEST(PriorModel, FramePermutationWithTimeEmbeddingsIsConsistent) {
  auto m = init_prior(tiny(), 8);
  Rng rng(9);
  const std::size_t T = 6;
  const auto g = random_grid(T, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  TokenGrid pg{T, 5, std::vector<std::uint16_t>(T * 5)};
  auto pm = m;
  auto& table = pm.params.get("time.table");
  const auto& orig = m.params.get("time.table");
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < 5; ++p) pg.at(t, p) = g.at(perm[t], p);
    std::copy(orig.row(perm[t]).begin(), orig.row(perm[t]).end(), table.row(t).begin());
  }
  const NDArray a = prior_logits(m, g), b = prior_logits(pm, pg);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < 5 * 210; ++k) EXPECT_NEAR(b[t * 1050 + k], a[perm[t] * 1050 + k], 1e-12);
}

TEST(PriorModel, LossIgnoresNonTargetPositions) {
  Rng rng(10);
  const NDArray logits = golfsig::testing::random_array({6, 210}, rng);
  const std::vector<int> orig{1, 2, 3, 4, 5, 6};
  const std::vector<std::uint8_t> target{1, 0, 1, 0, 0, 1};
  nn::Graph g;
  const double a = prior_loss(g.constant(logits), orig, target).value()[0];
  NDArray changed = logits;
  changed(1, 2) += 5.0;
  changed(3, 0) -= 2.0;
  EXPECT_EQ(prior_loss(g.constant(changed), orig, target).value()[0], a);
  changed(0, 1) += 1.0;
  EXPECT_NE(prior_loss(g.constant(changed), orig, target).value()[0], a);
}

TEST(PriorModel, GradientCheckOfMaskedLoss) {
  PriorConfig c = tiny();
  c.transformer = {4, 2, 1, 8, 0.0};
  c.codebook = 6;
  c.max_frames = 3;
  auto m = init_prior(c, 11);
  Rng rng(12);
  const auto g = random_grid(3, rng, 6);
  const auto masked = apply_masking(g, 0.3, rng, 6);
  const std::vector<int> ids(masked.tokens.codes.begin(), masked.tokens.codes.end());
  const std::vector<int> orig(g.codes.begin(), g.codes.end());
  auto report = nn::grad_check(
      [&](nn::Graph& gr, const nn::ParameterStore& p) {
        Prior view{m.config, p};
        return prior_loss(prior_forward(gr, view, ids, 1, 3), orig, masked.target);
      },
      m.params, {.max_entries = 12});
  EXPECT_LT(report.max_error(), 1e-4) << report.summary();
}

TEST(PriorModel, TokenProbabilities) {
  const auto m = init_prior(tiny(), 13);
  Rng rng(14);
  const auto g = random_grid(7, rng);
  const NDArray p = token_probabilities(m, g);
  EXPECT_EQ(p.shape(), (nn::Shape{7, 5}));
  const NDArray logits = prior_logits(m, g);
  for (std::size_t i = 0; i < 35; ++i) {
    EXPECT_GT(p[i], 0.0);
    EXPECT_LT(p[i], 1.0);
    double s = 0.0;
    for (std::size_t k = 0; k < 210; ++k) s += std::exp(logits[i * 210 + k]);
    EXPECT_NEAR(p[i], std::exp(logits[i * 210 + g.codes[i]]) / s, 1e-12);
  }
  EXPECT_EQ(token_probabilities(m, g), p);
  // Exact mode equals a single-position masked pass.
  const NDArray e = token_probabilities(m, g, true);
  TokenGrid one = g;
  one.codes[12] = 210;
  const NDArray l = prior_logits(m, one);
  double s = 0.0;
  for (std::size_t k = 0; k < 210; ++k) s += std::exp(l[12 * 210 + k]);
  EXPECT_NEAR(e[12], std::exp(l[12 * 210 + g.codes[12]]) / s, 1e-12);
}

TEST(PriorModel, TrainingLearnsStructuredGrids) {
  // Every frame repeats a per-grid constant plus the part index: a masked
  // token is recoverable from any visible token of its grid.
  Rng rng(15);
  std::vector<TokenGrid> grids;
  for (int i = 0; i < 60; ++i) {
    const auto base = rng.below(20);
    TokenGrid g{8, 5, {}};
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t p = 0; p < 5; ++p) g.codes.push_back(static_cast<std::uint16_t>(base * 5 + p));
    grids.push_back(g);
  }
  PriorConfig c = tiny();
  c.transformer = {32, 4, 2, 64, 0.0};
  c.epochs = 30;
  c.lr = 3e-3;
  c.lr_final = 1e-3;
  c.batch = 8;
  c.train_fraction = 0.8;
  const auto t = train_prior(grids, c, 16);
  EXPECT_LT(t.curve.train_loss.back(), t.curve.train_loss.front());
  EXPECT_GT(t.curve.val_accuracy.back(), 0.3);
  const auto again = train_prior(grids, c, 16);
  EXPECT_EQ(again.curve.train_loss, t.curve.train_loss);

  // Trained model prefers its own kind of grid over a random one.
  const double own = [&] {
    const NDArray p = token_probabilities(t.model, grids[t.val_ids[0]]);
    return p.sum() / static_cast<double>(p.size());
  }();
  const double rnd = [&] {
    const NDArray p = token_probabilities(t.model, random_grid(8, rng));
    return p.sum() / static_cast<double>(p.size());
  }();
  EXPECT_GT(own, rnd);
}

TEST(PriorModel, CheckpointRoundTrip) {
  const auto m = init_prior(tiny(), 17);
  const auto dir = golfsig::testing::temp_dir("prior");
  save_prior(m, dir);
  const auto back = load_prior(dir);
  Rng rng(18);
  const auto g = random_grid(5, rng);
  EXPECT_EQ(token_probabilities(back, g), token_probabilities(m, g));
}

}  // namespace
}  // namespace golfsig::prior
