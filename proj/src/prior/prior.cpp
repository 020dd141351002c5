#include "golfsig/prior/prior.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "golfsig/nn/model_io.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/nn/optim.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::prior {

using nn::NDArray;
using nn::Var;
using tok::TokenGrid;

void PriorConfig::validate() const {
  transformer.validate();
  if (codebook < 2 || codebook >= 65535) throw ConfigError("prior.codebook must be in [2, 65535)");
  if (parts == 0) throw ConfigError("prior.parts must be positive");
  if (max_frames == 0) throw ConfigError("prior.max_frames must be positive");
  if (batch == 0) throw ConfigError("prior.batch must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("prior.train_fraction must be in (0, 1)");
}

double gamma(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("gamma: tau " + std::to_string(tau) + " outside [0, 1]");
  // cos(pi / 2) is 6e-17 in floating point; nothing is masked at tau = 1.
  return tau == 1.0 ? 0.0 : std::cos(std::numbers::pi * tau / 2.0);
}

MaskedGrid apply_masking(const TokenGrid& grid, double tau, Rng& rng, std::size_t codebook) {
  const double gm = gamma(tau);
  const std::size_t T = grid.frames, P = grid.parts;
  MaskedGrid out{grid, std::vector<std::uint8_t>(T * P, 0)};
  if (gm <= 0.0 || T == 0 || P == 0) return out;

  std::vector<std::size_t> frames(T);
  for (std::size_t t = 0; t < T; ++t) frames[t] = t;
  rng.shuffle(frames.begin(), frames.end());
  const auto whole = std::min<std::size_t>(T, static_cast<std::size_t>(std::llround(gm * static_cast<double>(T))));
  const auto per_frame = std::min<std::size_t>(P, static_cast<std::size_t>(std::floor(gm * static_cast<double>(P))));
  std::vector<std::size_t> parts(P);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = frames[k];
    if (k < whole) {
      for (std::size_t p = 0; p < P; ++p) out.target[t * P + p] = 1;
      continue;
    }
    for (std::size_t p = 0; p < P; ++p) parts[p] = p;
    rng.shuffle(parts.begin(), parts.end());
    for (std::size_t j = 0; j < per_frame; ++j) out.target[t * P + parts[j]] = 1;
  }
  if (whole == 0 && per_frame == 0) out.target[rng.below(T * P)] = 1;

  for (std::size_t i = 0; i < T * P; ++i) {
    if (!out.target[i]) continue;
    const double u = rng.uniform();
    if (u < 0.8)
      out.tokens.codes[i] = static_cast<std::uint16_t>(codebook);
    else if (u < 0.9)
      out.tokens.codes[i] = static_cast<std::uint16_t>(rng.below(codebook));
  }
  return out;
}

Prior init_prior(const PriorConfig& config, std::uint64_t seed) {
  config.validate();
  Prior m{config, {}};
  Rng rng(seed);
  const std::size_t E = config.transformer.width;
  auto& p = m.params;
  // Token, time and part embeddings, N(0, 0.02) as usual for transformers.
  auto normal = [&](nn::Shape shape) {
    NDArray a(std::move(shape));
    for (auto& v : a.values()) v = 0.02 * rng.normal();
    return a;
  };
  p.add("token.table", normal({config.parts * config.vocabulary(), E}));
  p.add("time.table", normal({config.max_frames, E}));
  p.add("part.table", normal({config.parts, E}));
  nn::init_transformer(p, "tf", config.transformer, rng);
  p.add("head.weight", nn::uniform_init({config.parts * E, config.codebook}, E, rng));
  p.add("head.bias", NDArray({config.parts, config.codebook}, 0.0));
  return m;
}

Var prior_hidden(nn::Graph& g, const Prior& m, const std::vector<int>& ids, std::size_t batch, std::size_t frames) {
  const auto& c = m.config;
  const std::size_t P = c.parts, n = batch * frames * P;
  if (ids.size() != n)
    throw DimensionError("prior: expected " + std::to_string(n) + " token ids, got " + std::to_string(ids.size()));
  if (frames > c.max_frames)
    throw DimensionError("prior: " + std::to_string(frames) + " frames exceed max_frames " + std::to_string(c.max_frames));
  std::vector<int> tok(n), time(n), part(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = i % P, t = (i / P) % frames;
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c.vocabulary())
      throw ValidationError("prior: token id " + std::to_string(ids[i]) + " outside [0, " +
                            std::to_string(c.vocabulary()) + ")");
    tok[i] = static_cast<int>(p * c.vocabulary()) + ids[i];
    time[i] = static_cast<int>(t);
    part[i] = static_cast<int>(p);
  }
  auto h = nn::add(nn::add(nn::embedding(tok, g.param(m.params, "token.table")),
                           nn::embedding(time, g.param(m.params, "time.table"))),
                   nn::embedding(part, g.param(m.params, "part.table")));
  return nn::transformer_forward(g, h, m.params, "tf", c.transformer, {batch, frames * P});
}

Var prior_forward(nn::Graph& g, const Prior& m, const std::vector<int>& ids, std::size_t batch, std::size_t frames) {
  const std::size_t P = m.config.parts;
  std::vector<std::size_t> group(ids.size());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = i % P;
  auto h = prior_hidden(g, m, ids, batch, frames);
  return nn::grouped_linear(h, g.param(m.params, "head.weight"), g.param(m.params, "head.bias"), group, P);
}

namespace {

std::vector<int> grid_ids(const TokenGrid& grid) { return {grid.codes.begin(), grid.codes.end()}; }

void check_grid(const Prior& m, const TokenGrid& grid) {
  if (grid.parts != m.config.parts)
    throw DimensionError("prior: grid has " + std::to_string(grid.parts) + " parts, model expects " +
                         std::to_string(m.config.parts));
  if (grid.frames == 0) throw ValidationError("prior: empty token grid");
}

std::map<std::size_t, std::vector<std::size_t>> length_groups(const std::vector<TokenGrid>& grids,
                                                              const std::vector<std::size_t>& ids) {
  std::map<std::size_t, std::vector<std::size_t>> out;
  for (auto i : ids) out[grids[i].frames].push_back(i);
  return out;
}

}  // namespace

NDArray prior_logits(const Prior& m, const TokenGrid& grid) {
  check_grid(m, grid);
  nn::Graph g;
  NDArray y = prior_forward(g, m, grid_ids(grid), 1, grid.frames).value();
  return y.reshaped({grid.frames, grid.parts, m.config.codebook});
}

Var prior_loss(Var logits, const std::vector<int>& originals, const std::vector<std::uint8_t>& target) {
  if (originals.size() != target.size()) throw DimensionError("prior_loss: targets and mask differ in length");
  std::vector<int> y(originals.size(), -1);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (target[i]) y[i] = originals[i];
  return nn::cross_entropy(logits, y);
}

NDArray token_probabilities(const Prior& m, const TokenGrid& grid, bool exact) {
  check_grid(m, grid);
  const std::size_t n = grid.frames * grid.parts, C = m.config.codebook;
  for (auto c : grid.codes)
    if (c >= C) throw ValidationError("token_probabilities: token " + std::to_string(c) + " is not a code");
  NDArray out({grid.frames, grid.parts});
  auto prob_of = [&](const double* row, std::size_t code) {
    const double mx = *std::max_element(row, row + C);
    double s = 0.0;
    for (std::size_t k = 0; k < C; ++k) s += std::exp(row[k] - mx);
    return std::exp(row[code] - mx) / s;
  };
  if (!exact) {
    const NDArray y = prior_logits(m, grid);
    for (std::size_t i = 0; i < n; ++i) out[i] = prob_of(y.data() + i * C, grid.codes[i]);
    return out;
  }
  // One masked copy per position, batched.
  const std::size_t chunk = 16;
  for (std::size_t s = 0; s < n; s += chunk) {
    const std::size_t B = std::min(chunk, n - s);
    std::vector<int> ids;
    for (std::size_t b = 0; b < B; ++b) {
      auto v = grid_ids(grid);
      v[s + b] = m.config.mask_id();
      ids.insert(ids.end(), v.begin(), v.end());
    }
    nn::Graph g;
    const NDArray y = prior_forward(g, m, ids, B, grid.frames).value();
    for (std::size_t b = 0; b < B; ++b) out[s + b] = prob_of(y.data() + (b * n + s + b) * C, grid.codes[s + b]);
  }
  return out;
}

double masked_accuracy(const Prior& m, const std::vector<TokenGrid>& grids, const std::vector<std::size_t>& ids,
                       std::uint64_t seed) {
  Rng rng(seed);
  std::size_t hit = 0, total = 0;
  for (const auto& [T, group] : length_groups(grids, ids))
    for (std::size_t s = 0; s < group.size(); s += 16) {
      const std::size_t B = std::min<std::size_t>(16, group.size() - s);
      std::vector<int> in;
      std::vector<MaskedGrid> masked;
      for (std::size_t b = 0; b < B; ++b) {
        check_grid(m, grids[group[s + b]]);
        masked.push_back(apply_masking(grids[group[s + b]], rng.uniform(), rng, m.config.codebook));
        const auto v = grid_ids(masked.back().tokens);
        in.insert(in.end(), v.begin(), v.end());
      }
      nn::Graph g;
      const NDArray y = prior_forward(g, m, in, B, T).value();
      const std::size_t n = T * m.config.parts, C = m.config.codebook;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < n; ++i) {
          if (!masked[b].target[i]) continue;
          const double* row = y.data() + (b * n + i) * C;
          const auto best = static_cast<std::size_t>(std::max_element(row, row + C) - row);
          hit += best == grids[group[s + b]].codes[i];
          ++total;
        }
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

PriorTraining train_prior(const std::vector<TokenGrid>& grids, const PriorConfig& config, std::uint64_t seed) {
  config.validate();
  if (grids.size() < 2) throw ValidationError("prior training needs at least two token grids");
  PriorTraining out{init_prior(config, seed), {}, {}, {}};
  Prior& m = out.model;
  for (const auto& gr : grids) {
    check_grid(m, gr);
    for (auto c : gr.codes)
      if (c >= config.codebook) throw ValidationError("prior training: token " + std::to_string(c) + " is not a code");
  }
  Rng rng = Rng::derive(seed, 0x7072696f);
  auto split = nn::split_indices(grids.size(), config.train_fraction, rng);
  if (split.first.empty() || split.second.empty()) throw ValidationError("prior split left an empty partition");
  out.train_ids = split.first;
  out.val_ids = split.second;

  const auto groups = length_groups(grids, out.train_ids);
  std::size_t per_epoch = 0;
  for (const auto& [T, group] : groups) per_epoch += (group.size() + config.batch - 1) / config.batch;
  const nn::StepSchedule schedule{config.lr, config.lr_final, (3 * per_epoch * config.epochs) / 4};
  const std::uint64_t val_seed = Rng::derive(seed, 0x76616c).next_u64();

  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    for (const auto& [T, group] : groups)
      for (auto& b : nn::make_batches(group.size(), config.batch, rng)) {
        for (auto& k : b) k = group[k];
        batches.push_back(std::move(b));
      }
    rng.shuffle(batches.begin(), batches.end());
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const std::size_t B = batch.size(), T = grids[batch.front()].frames;
      std::vector<int> in, orig;
      std::vector<std::uint8_t> target;
      for (auto i : batch) {
        const auto masked = apply_masking(grids[i], rng.uniform(), rng, config.codebook);
        const auto v = grid_ids(masked.tokens), o = grid_ids(grids[i]);
        in.insert(in.end(), v.begin(), v.end());
        orig.insert(orig.end(), o.begin(), o.end());
        target.insert(target.end(), masked.target.begin(), masked.target.end());
      }
      nn::Graph g(true, seed ^ (iteration * 0x9E3779B97F4A7C15ULL));
      auto loss = prior_loss(prior_forward(g, m, in, B, T), orig, target);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingError("prior loss is not finite at iteration " + std::to_string(iteration));
      g.backward(loss);
      nn::adam_step(m.params, g.parameter_gradients(),
                    {.lr = schedule.at(iteration), .weight_decay = config.weight_decay});
      epoch_loss += lv;
      ++iteration;
    }
    out.curve.train_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
    out.curve.val_accuracy.push_back(masked_accuracy(m, grids, out.val_ids, val_seed));
    spdlog::debug("prior epoch {} loss {:.4f} masked accuracy {:.4f}", epoch, out.curve.train_loss.back(),
                  out.curve.val_accuracy.back());
  }
  return out;
}

void save_prior(const Prior& m, const std::filesystem::path& dir) {
  nn::save_model(dir, "prior", to_json_value(m.config), m.params);
}

Prior load_prior(const std::filesystem::path& dir) {
  auto loaded = nn::load_model(dir, "prior");
  Prior m;
  from_json_value(loaded.config, m.config, "prior");
  m.config.validate();
  m.params = std::move(loaded.params);
  return m;
}

}  // namespace golfsig::prior
