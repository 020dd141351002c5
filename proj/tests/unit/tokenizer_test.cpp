#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "golfsig/data/generator.hpp"
#include "golfsig/nn/gradcheck.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/tok/vqvae.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::tok {
namespace {

using golfsig::testing::random_array;
using nn::NDArray;

const kin::Skeleton& skel() {
  static const auto s = kin::Skeleton::default_skeleton();
  return s;
}

VqvaeConfig tiny() {
  VqvaeConfig c;
  c.transformer = {8, 2, 1, 16, 0.0};
  return c;
}

TEST(Fsq, ScalarExamples) {
  const FsqSpec spec;
  EXPECT_EQ(spec.codebook_size(), 210u);
  const double z0[3] = {0.0, 0.0, 0.0};
  const auto q0 = fsq_quantize(z0, spec);
  EXPECT_EQ(q0.lattice[0], 0.0);
  // round(3 tanh 0.5) = round(1.3864)
  const double zh[3] = {0.5, 0.0, 0.0};
  EXPECT_EQ(fsq_quantize(zh, spec).lattice[0], 1.0);
  EXPECT_NEAR(3.0 * std::tanh(0.5), 1.3864, 1e-4);
  const double big[3] = {10.0, 10.0, 10.0};
  const auto top = fsq_quantize(big, spec);
  EXPECT_EQ(top.lattice, (std::vector<double>{3.0, 2.5, 2.0}));
  EXPECT_EQ(top.code, 209);
  const double small[3] = {-10.0, -10.0, -10.0};
  EXPECT_EQ(fsq_quantize(small, spec).code, 0);
}

TEST(Fsq, PackUnpackIsABijection) {
  const FsqSpec spec;
  const int zero[3] = {0, 0, 0}, top[3] = {6, 5, 4};
  EXPECT_EQ(fsq_pack(zero, spec), 0);
  EXPECT_EQ(fsq_pack(top, spec), 209);
  std::set<int> seen;
  for (int c = 0; c < 210; ++c) {
    const auto idx = fsq_unpack(c, spec);
    EXPECT_EQ(fsq_pack(idx, spec), c);
    EXPECT_EQ(idx[0] + 7 * idx[1] + 42 * idx[2], c);
    EXPECT_EQ(lattice_to_code(code_to_lattice(c, spec), spec), c);
    seen.insert(c);
  }
  EXPECT_EQ(seen.size(), 210u);
  const int bad[3] = {7, 0, 0};
  EXPECT_THROW(fsq_pack(bad, spec), ValidationError);
  EXPECT_THROW(fsq_unpack(210, spec), ValidationError);
  EXPECT_THROW(fsq_unpack(-1, spec), ValidationError);
}

TEST(Fsq, DenseSweepRealisesExactlyEachLevel) {
  const FsqSpec spec;
  std::set<int> codes;
  std::vector<std::set<double>> values(3);
  const int n = 61;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double z[3] = {-4.0 + 8.0 * i / (n - 1), -4.0 + 8.0 * j / (n - 1), -4.0 + 8.0 * k / (n - 1)};
        const auto q = fsq_quantize(z, spec);
        codes.insert(q.code);
        for (int c = 0; c < 3; ++c) values[c].insert(q.lattice[c]);
      }
  EXPECT_EQ(codes.size(), 210u);
  EXPECT_EQ(values[0].size(), 7u);
  EXPECT_EQ(values[1].size(), 6u);
  EXPECT_EQ(values[2].size(), 5u);
  EXPECT_THROW((FsqSpec{{7, 1}}.validate()), ConfigError);
}

TEST(Fsq, StraightThroughPassesGradientUnchanged) {
  const FsqSpec spec;
  Rng rng(1);
  nn::Graph g;
  auto u = g.leaf(random_array({6, 3}, rng, 3.0));
  auto q = nn::round_ste(u, spec.shift());
  auto w = g.constant(random_array({6, 3}, rng));
  g.backward(nn::sum_all(nn::mul(nn::mul(q, q), w)));
  const auto& gu = g.grad(u);
  const auto& gq = g.grad(q);
  for (std::size_t i = 0; i < gu.size(); ++i) EXPECT_EQ(gu[i], gq[i]);
  const auto shift = spec.shift();
  for (std::size_t i = 0; i < gu.size(); ++i)
    EXPECT_EQ(q.value()[i], std::round(u.value()[i] - shift[i % 3]) + shift[i % 3]);
}

TEST(VqvaeLoss, ClosedFormCases) {
  NDArray m({4, 6}, 0.3);
  NDArray h({4, 6}, 0.8);
  EXPECT_NEAR(vqvae_loss(m, h), 0.125, 1e-15);
  EXPECT_EQ(vqvae_loss(m, m), 0.0);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const NDArray a = random_array({5, 4}, rng), b = random_array({5, 4}, rng);
    EXPECT_LE(vqvae_loss(a, b, 0.0), vqvae_loss(a, b, 0.5));
  }
  // A single frame has no velocity term.
  NDArray one({1, 6}, 0.0), off({1, 6}, 2.0);
  EXPECT_NEAR(vqvae_loss(one, off), 1.5, 1e-15);
  EXPECT_THROW(vqvae_loss(one, NDArray({2, 6})), DimensionError);
}

TEST(Vqvae, ShapesAndDeterminism) {
  const auto m = init_vqvae(tiny(), skel(), 3);
  EXPECT_EQ(m.parts(), 5u);
  Rng rng(4);
  const NDArray x = random_array({10, 156}, rng);
  const auto a = encode_motion(m, x), b = encode_motion(m, x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.frames, 10u);
  EXPECT_EQ(a.parts, 5u);
  for (auto c : a.codes) EXPECT_LT(c, 210);
  EXPECT_EQ(decode_tokens(m, a).shape(), x.shape());
  EXPECT_THROW(encode_motion(m, random_array({10, 155}, rng)), DimensionError);
  TokenGrid bad = a;
  bad.at(0, 0) = 210;
  EXPECT_THROW(decode_tokens(m, bad), ValidationError);
}

TEST(Vqvae, CompositionalLocality) {
  const auto m = init_vqvae(tiny(), skel(), 5);
  Rng rng(6);
  const NDArray x = random_array({12, 156}, rng, 2.0);
  const auto slices = skel().part_slices();
  for (std::size_t p = 0; p < 5; ++p) {
    NDArray y = x;
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t c = slices[p].first; c < slices[p].first + slices[p].second; ++c) y(t, c) += rng.uniform(-3, 3);
    const auto a = encode_motion(m, x), b = encode_motion(m, y);
    bool changed = false;
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t q = 0; q < 5; ++q) {
        if (q != p) {
          EXPECT_EQ(a.at(t, q), b.at(t, q)) << "part " << p << " moved column " << q;
        }
        changed |= a.at(t, q) != b.at(t, q);
      }
    EXPECT_TRUE(changed);

    // Decoding: change one token column, only that slice moves.
    TokenGrid g = a;
    g.at(3, p) = static_cast<std::uint16_t>((g.at(3, p) + 17) % 210);
    const NDArray da = decode_tokens(m, a), dg = decode_tokens(m, g);
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t c = 0; c < 156; ++c) {
        const bool inside = c >= slices[p].first && c < slices[p].first + slices[p].second;
        if (!inside) {
          EXPECT_EQ(da(t, c), dg(t, c));
        }
      }
  }
}

TEST(Vqvae, SingleCodebookAblation) {
  VqvaeConfig c = tiny();
  c.single_codebook = true;
  const auto m = init_vqvae(c, skel(), 7);
  EXPECT_EQ(m.parts(), 1u);
  Rng rng(8);
  const auto g = encode_motion(m, random_array({6, 156}, rng));
  EXPECT_EQ(g.parts, 1u);
}

TEST(Vqvae, GradientCheckThroughStraightThrough) {
  VqvaeConfig c = tiny();
  c.transformer = {4, 2, 1, 8, 0.0};
  auto m = init_vqvae(c, skel(), 9);
  Rng rng(10);
  const std::size_t B = 2, T = 3;
  const NDArray x = random_array({B * T, 156}, rng);

  // Rounding offsets at the current parameters.
  std::vector<NDArray> offsets;
  nn::Gradients ste;
  {
    nn::Graph g;
    auto motion = g.constant(x);
    auto f = vqvae_forward(g, m, motion, B, T);
    for (std::size_t p = 0; p < 5; ++p) {
      NDArray u = nn::fsq_bound(f.latents[p], c.fsq().half()).value();
      NDArray off = f.quantized[p].value();
      for (std::size_t i = 0; i < off.size(); ++i) off[i] -= u[i];
      offsets.push_back(off);
    }
    auto loss = vqvae_loss(motion, f.reconstruction, B, T);
    g.backward(loss);
    ste = g.parameter_gradients();
  }
  // The frozen-offset surrogate has the same value and gradient...
  {
    nn::Graph g;
    auto motion = g.constant(x);
    auto loss = vqvae_loss(motion, vqvae_forward(g, m, motion, B, T, &offsets).reconstruction, B, T);
    g.backward(loss);
    const auto sur = g.parameter_gradients();
    for (const auto& [name, grad] : ste)
      for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_NEAR(grad[i], sur.at(name)[i], 1e-12) << name;
  }
  // ...and its gradient matches finite differences.
  auto report = nn::grad_check(
      [&](nn::Graph& g, const nn::ParameterStore& p) {
        Vqvae view{m.config, m.slices, p};
        auto motion = g.constant(x);
        return vqvae_loss(motion, vqvae_forward(g, view, motion, B, T, &offsets).reconstruction, B, T);
      },
      m.params, {.max_entries = 6});
  EXPECT_LT(report.max_error(), 1e-4) << report.summary();
}

TEST(Vqvae, Utilization) {
  TokenGrid all{210, 5, {}};
  for (std::size_t t = 0; t < 210; ++t)
    for (std::size_t p = 0; p < 5; ++p) all.codes.push_back(static_cast<std::uint16_t>(t));
  for (double u : codebook_utilization({all}, 210)) EXPECT_EQ(u, 1.0);
  TokenGrid one{4, 5, std::vector<std::uint16_t>(20, 17)};
  for (double u : codebook_utilization({one}, 210)) EXPECT_NEAR(u, 1.0 / 210.0, 1e-15);
  EXPECT_THROW(codebook_utilization({}, 210), ValidationError);
}

TEST(Vqvae, TrainingImprovesReconstruction) {
  const auto swings = data::generate_corpus(skel(), {.swings = 24, .players = 6}, 11);
  VqvaeConfig c;
  c.transformer = {16, 2, 1, 32, 0.0};
  c.epochs = 8;
  c.lr = 3e-3;
  c.batch = 8;
  const auto t = train_vqvae(swings, skel(), c, 12);
  EXPECT_LT(t.curve.loss.back(), t.curve.initial_loss);
  EXPECT_LT(t.curve.mpjpe.back(), t.curve.initial_mpjpe);
  ASSERT_EQ(t.curve.utilization.size(), 8u);
  EXPECT_EQ(t.curve.utilization.back().size(), 5u);
  const auto again = train_vqvae(swings, skel(), c, 12);
  EXPECT_EQ(again.curve.loss, t.curve.loss);
}

TEST(Vqvae, CheckpointAndTokenFiles) {
  const auto m = init_vqvae(tiny(), skel(), 13);
  const auto dir = golfsig::testing::temp_dir("vqvae");
  save_vqvae(m, dir / "ckpt");
  const auto back = load_vqvae(dir / "ckpt");
  Rng rng(14);
  const NDArray x = random_array({9, 156}, rng);
  const auto g = encode_motion(m, x);
  EXPECT_EQ(encode_motion(back, x), g);
  write_tokens(dir / "t.bin", g);
  EXPECT_EQ(read_tokens(dir / "t.bin"), g);
}

}  // namespace
}  // namespace golfsig::tok
