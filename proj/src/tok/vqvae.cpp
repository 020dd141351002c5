#include "golfsig/tok/vqvae.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "golfsig/io/gsmb.hpp"
#include "golfsig/kin/kinematics.hpp"
#include "golfsig/nn/model_io.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/nn/optim.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::tok {

using nn::LayerSpec;
using nn::NDArray;
using nn::Var;

void VqvaeConfig::validate() const {
  fsq().validate();
  transformer.validate();
  if (velocity_weight < 0.0) throw ConfigError("vqvae.velocity_weight must be non-negative");
  if (!(smooth_l1_beta > 0.0)) throw ConfigError("vqvae.smooth_l1_beta must be positive");
  if (batch == 0) throw ConfigError("vqvae.batch must be positive");
}

Vqvae init_vqvae(const VqvaeConfig& config, const kin::Skeleton& skeleton, std::uint64_t seed) {
  config.validate();
  Vqvae m{config, {}, {}};
  if (config.single_codebook)
    m.slices = {{0, kin::kPoseWidth}};
  else
    m.slices = skeleton.part_slices();
  Rng rng(seed);
  const std::size_t D = config.transformer.width, C = config.levels.size();
  for (std::size_t p = 0; p < m.parts(); ++p) {
    const std::string pre = "part" + std::to_string(p);
    const std::size_t w = m.slices[p].second;
    nn::init_layer(LayerSpec::linear(w, D), m.params, pre + ".enc.in", rng);
    nn::init_transformer(m.params, pre + ".enc.tf", config.transformer, rng);
    nn::init_layer(LayerSpec::linear(D, C), m.params, pre + ".enc.out", rng);
    if (config.latent_norm) {
      // Plain standardisation: a learnable scale could shrink a channel into
      // a single level or push it into tanh saturation.
      nn::init_layer(LayerSpec::batchnorm(C), m.params, pre + ".enc.norm", rng);
      m.params.entry(pre + ".enc.norm.gamma").trainable = false;
      m.params.entry(pre + ".enc.norm.beta").trainable = false;
    }
    nn::init_layer(LayerSpec::linear(C, D), m.params, pre + ".dec.in", rng);
    nn::init_transformer(m.params, pre + ".dec.tf", config.transformer, rng);
    nn::init_layer(LayerSpec::linear(D, w), m.params, pre + ".dec.out", rng);
  }
  return m;
}

namespace {

NDArray tiled_encoding(std::size_t batch, std::size_t steps, std::size_t width) {
  const NDArray pe = nn::sinusoidal_encoding(steps, width);
  NDArray out({batch * steps, width});
  for (std::size_t b = 0; b < batch; ++b) std::copy(pe.values().begin(), pe.values().end(), out.row(b * steps).begin());
  return out;
}

Var encode_part(nn::Graph& g, const Vqvae& m, std::size_t p, Var x, const NDArray& pe, std::size_t batch,
                std::size_t steps) {
  const auto& c = m.config;
  const std::string pre = "part" + std::to_string(p);
  auto h = nn::add(nn::primitive_forward(g, LayerSpec::linear(m.slices[p].second, c.transformer.width), x, m.params,
                                         pre + ".enc.in"),
                   g.constant(pe));
  h = nn::transformer_forward(g, h, m.params, pre + ".enc.tf", c.transformer, {batch, steps});
  auto z = nn::primitive_forward(g, LayerSpec::linear(c.transformer.width, c.levels.size()), h, m.params,
                                 pre + ".enc.out");
  if (c.latent_norm) z = nn::primitive_forward(g, LayerSpec::batchnorm(c.levels.size()), z, m.params, pre + ".enc.norm");
  return z;
}

Var decode_part(nn::Graph& g, const Vqvae& m, std::size_t p, Var q, const NDArray& pe, std::size_t batch,
                std::size_t steps) {
  const auto& c = m.config;
  const std::string pre = "part" + std::to_string(p);
  auto h = nn::add(
      nn::primitive_forward(g, LayerSpec::linear(c.levels.size(), c.transformer.width), q, m.params, pre + ".dec.in"),
      g.constant(pe));
  h = nn::transformer_forward(g, h, m.params, pre + ".dec.tf", c.transformer, {batch, steps});
  return nn::primitive_forward(g, LayerSpec::linear(c.transformer.width, m.slices[p].second), h, m.params,
                               pre + ".dec.out");
}

void check_motion(const Vqvae& m, const NDArray& motion) {
  if (motion.ndim() != 2 || motion.cols() != m.pose_width())
    throw DimensionError("vqvae: motion axis 1 must be " + std::to_string(m.pose_width()) + ", got shape " +
                         nn::shape_string(motion.shape()));
  if (motion.rows() == 0) throw ValidationError("vqvae: empty motion");
}

}  // namespace

VqvaeGraph vqvae_forward(nn::Graph& g, const Vqvae& m, Var motion, std::size_t batch, std::size_t steps,
                         const std::vector<NDArray>* frozen) {
  if (motion.cols() != m.pose_width() || motion.rows() != batch * steps)
    throw DimensionError("vqvae: motion must be (batch * steps) x " + std::to_string(m.pose_width()) + ", got " +
                         nn::shape_string(motion.value().shape()));
  const auto spec = m.config.fsq();
  const auto half = spec.half(), shift = spec.shift();
  const NDArray pe = tiled_encoding(batch, steps, m.config.transformer.width);
  VqvaeGraph out;
  std::vector<Var> recon;
  for (std::size_t p = 0; p < m.parts(); ++p) {
    auto x = nn::slice_cols(motion, m.slices[p].first, m.slices[p].second);
    auto z = encode_part(g, m, p, x, pe, batch, steps);
    auto u = nn::fsq_bound(z, half);
    auto q = frozen ? nn::add(u, g.constant(frozen->at(p))) : nn::round_ste(u, shift);
    out.latents.push_back(z);
    out.quantized.push_back(q);
    recon.push_back(decode_part(g, m, p, q, pe, batch, steps));
  }
  out.reconstruction = recon.size() == 1 ? recon.front() : nn::concat_cols(recon);
  return out;
}

Var vqvae_loss(Var motion, Var recon, std::size_t batch, std::size_t steps, double velocity_weight, double beta) {
  auto loss = nn::smooth_l1_loss(recon, motion, beta);
  if (steps < 2) {
    spdlog::warn("vqvae loss: sequences of {} frame(s) have no velocity term", steps);
    return loss;
  }
  if (velocity_weight == 0.0) return loss;
  auto vel = nn::smooth_l1_loss(nn::frame_diff(recon, batch, steps), nn::frame_diff(motion, batch, steps), beta);
  return nn::add(loss, nn::scale(vel, velocity_weight));
}

double vqvae_loss(const NDArray& motion, const NDArray& recon, double velocity_weight, double beta) {
  if (motion.shape() != recon.shape())
    throw DimensionError("vqvae_loss: shapes " + nn::shape_string(motion.shape()) + " and " +
                         nn::shape_string(recon.shape()) + " differ");
  nn::Graph g;
  return vqvae_loss(g.constant(motion), g.constant(recon), 1, motion.rows(), velocity_weight, beta).value()[0];
}

std::vector<NDArray> encode_latents(const Vqvae& m, const NDArray& motion) {
  check_motion(m, motion);
  const std::size_t T = motion.rows();
  nn::Graph g;
  const NDArray pe = tiled_encoding(1, T, m.config.transformer.width);
  auto x = g.constant(motion);
  std::vector<NDArray> out;
  for (std::size_t p = 0; p < m.parts(); ++p)
    out.push_back(encode_part(g, m, p, nn::slice_cols(x, m.slices[p].first, m.slices[p].second), pe, 1, T).value());
  return out;
}

std::vector<TokenGrid> encode_batch(const Vqvae& m, const std::vector<const NDArray*>& motions) {
  if (motions.empty()) return {};
  const std::size_t B = motions.size(), T = motions.front()->rows();
  NDArray x({B * T, m.pose_width()});
  for (std::size_t b = 0; b < B; ++b) {
    check_motion(m, *motions[b]);
    if (motions[b]->rows() != T) throw DimensionError("encode_batch: sequences differ in length");
    std::copy(motions[b]->values().begin(), motions[b]->values().end(), x.row(b * T).begin());
  }
  const auto spec = m.config.fsq();
  nn::Graph g;
  const NDArray pe = tiled_encoding(B, T, m.config.transformer.width);
  auto xv = g.constant(std::move(x));
  std::vector<TokenGrid> grids(B, TokenGrid{T, m.parts(), std::vector<std::uint16_t>(T * m.parts())});
  for (std::size_t p = 0; p < m.parts(); ++p) {
    const NDArray z = encode_part(g, m, p, nn::slice_cols(xv, m.slices[p].first, m.slices[p].second), pe, B, T).value();
    for (std::size_t r = 0; r < B * T; ++r)
      grids[r / T].at(r % T, p) = static_cast<std::uint16_t>(fsq_quantize(z.row(r), spec).code);
  }
  return grids;
}

TokenGrid encode_motion(const Vqvae& m, const NDArray& motion) { return encode_batch(m, {&motion}).front(); }

std::vector<NDArray> decode_batch(const Vqvae& m, const std::vector<const TokenGrid*>& grids) {
  if (grids.empty()) return {};
  const std::size_t B = grids.size(), T = grids.front()->frames, C = m.config.levels.size();
  const auto spec = m.config.fsq();
  if (T == 0) throw ValidationError("decode: empty token grid");
  for (const auto* gr : grids) {
    if (gr->parts != m.parts())
      throw DimensionError("decode: grid has " + std::to_string(gr->parts) + " parts, model expects " +
                           std::to_string(m.parts()));
    if (gr->frames != T) throw DimensionError("decode_batch: grids differ in length");
    if (gr->codes.size() != T * gr->parts) throw DimensionError("decode: grid size does not match its shape");
  }
  nn::Graph g;
  const NDArray pe = tiled_encoding(B, T, m.config.transformer.width);
  std::vector<Var> parts;
  for (std::size_t p = 0; p < m.parts(); ++p) {
    NDArray q({B * T, C});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        const auto l = code_to_lattice(grids[b]->at(t, p), spec);
        std::copy(l.begin(), l.end(), q.row(b * T + t).begin());
      }
    parts.push_back(decode_part(g, m, p, g.constant(std::move(q)), pe, B, T));
  }
  const NDArray all = (parts.size() == 1 ? parts.front() : nn::concat_cols(parts)).value();
  std::vector<NDArray> out;
  for (std::size_t b = 0; b < B; ++b) {
    NDArray y({T, m.pose_width()});
    std::copy_n(all.row(b * T).begin(), T * m.pose_width(), y.values().begin());
    out.push_back(std::move(y));
  }
  return out;
}

NDArray decode_tokens(const Vqvae& m, const TokenGrid& grid) { return decode_batch(m, {&grid}).front(); }

std::vector<double> codebook_utilization(const std::vector<TokenGrid>& corpus, std::size_t codebook_size) {
  if (corpus.empty()) throw ValidationError("codebook_utilization: empty token corpus");
  const std::size_t P = corpus.front().parts;
  std::vector<std::vector<char>> seen(P, std::vector<char>(codebook_size, 0));
  for (const auto& g : corpus) {
    if (g.parts != P) throw DimensionError("codebook_utilization: grids differ in part count");
    for (std::size_t t = 0; t < g.frames; ++t)
      for (std::size_t p = 0; p < P; ++p) {
        if (g.at(t, p) >= codebook_size) throw ValidationError("codebook_utilization: token outside the codebook");
        seen[p][g.at(t, p)] = 1;
      }
  }
  std::vector<double> out;
  for (const auto& s : seen)
    out.push_back(static_cast<double>(std::count(s.begin(), s.end(), 1)) / static_cast<double>(codebook_size));
  return out;
}

namespace {

// Equal-length groups of swing indices, for batching.
std::map<std::size_t, std::vector<std::size_t>> length_groups(const std::vector<data::SwingRecord>& swings,
                                                              const std::vector<std::size_t>& ids) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (auto i : ids) groups[swings[i].frames()].push_back(i);
  return groups;
}

std::vector<TokenGrid> encode_all(const Vqvae& m, const std::vector<data::SwingRecord>& swings,
                                  const std::vector<std::size_t>& ids) {
  std::vector<TokenGrid> out;
  for (const auto& [T, group] : length_groups(swings, ids))
    for (std::size_t s = 0; s < group.size(); s += 32) {
      std::vector<const NDArray*> batch;
      for (std::size_t k = s; k < std::min(group.size(), s + 32); ++k) batch.push_back(&swings[group[k]].motion.pose);
      for (auto& g : encode_batch(m, batch)) out.push_back(std::move(g));
    }
  return out;
}

}  // namespace

double reconstruction_mpjpe(const Vqvae& m, const std::vector<data::SwingRecord>& swings,
                            const std::vector<std::size_t>& ids, const kin::Skeleton& skeleton) {
  if (ids.empty()) throw ValidationError("reconstruction_mpjpe: no swings");
  double sum = 0.0;
  for (auto i : ids) {
    const auto& pose = swings[i].motion.pose;
    sum += kin::mpjpe(decode_tokens(m, encode_motion(m, pose)), pose, skeleton);
  }
  return sum / static_cast<double>(ids.size());
}

VqvaeTraining train_vqvae(const std::vector<data::SwingRecord>& swings, const kin::Skeleton& skeleton,
                          const VqvaeConfig& config, std::uint64_t seed) {
  config.validate();
  if (swings.empty()) throw ValidationError("vqvae training needs at least one swing");
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < swings.size(); ++i) {
    if (!swings[i].has_pose()) throw ValidationError(swings[i].id + ": vqvae training needs pose data");
    ids.push_back(i);
  }
  VqvaeTraining out{init_vqvae(config, skeleton, seed), {}};
  Vqvae& m = out.model;
  const std::vector<std::size_t> eval_ids(
      ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(config.eval_swings ? std::min(config.eval_swings, ids.size())
                                                                                 : ids.size()));
  out.curve.initial_mpjpe = reconstruction_mpjpe(m, swings, eval_ids, skeleton);

  const auto groups = length_groups(swings, ids);
  std::size_t per_epoch = 0;
  for (const auto& [T, group] : groups) per_epoch += (group.size() + config.batch - 1) / config.batch;
  const nn::StepSchedule schedule{config.lr, config.lr_final, (3 * per_epoch * config.epochs) / 4};

  Rng rng = Rng::derive(seed, 0x76717661);
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
      const std::size_t B = batch.size(), T = swings[batch.front()].frames();
      NDArray x({B * T, m.pose_width()});
      for (std::size_t b = 0; b < B; ++b) {
        const auto& pose = swings[batch[b]].motion.pose;
        std::copy(pose.values().begin(), pose.values().end(), x.row(b * T).begin());
      }
      nn::Graph g(true, seed ^ (iteration * 0x9E3779B97F4A7C15ULL));
      auto motion = g.constant(std::move(x));
      auto fwd = vqvae_forward(g, m, motion, B, T);
      auto loss = vqvae_loss(motion, fwd.reconstruction, B, T, config.velocity_weight, config.smooth_l1_beta);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingError("vqvae loss is not finite at iteration " + std::to_string(iteration));
      if (iteration == 0) out.curve.initial_loss = lv;
      g.backward(loss);
      nn::adam_step(m.params, g.parameter_gradients(),
                    {.lr = schedule.at(iteration), .weight_decay = config.weight_decay});
      m.params.apply_buffers(g.buffer_updates());
      epoch_loss += lv;
      ++iteration;
    }
    out.curve.loss.push_back(epoch_loss / static_cast<double>(batches.size()));
    out.curve.mpjpe.push_back(reconstruction_mpjpe(m, swings, eval_ids, skeleton));
    out.curve.utilization.push_back(codebook_utilization(encode_all(m, swings, ids), config.fsq().codebook_size()));
    spdlog::debug("vqvae epoch {} loss {:.5f} mpjpe {:.3f} cm min utilization {:.3f}", epoch, out.curve.loss.back(),
                  out.curve.mpjpe.back(),
                  *std::min_element(out.curve.utilization.back().begin(), out.curve.utilization.back().end()));
  }
  return out;
}

void save_vqvae(const Vqvae& m, const std::filesystem::path& dir) {
  Json slices = Json::array();
  for (const auto& [s, w] : m.slices) slices.push_back({s, w});
  nn::save_model(dir, "vqvae", Json{{"vqvae", to_json_value(m.config)}, {"slices", slices}}, m.params);
}

Vqvae load_vqvae(const std::filesystem::path& dir) {
  auto loaded = nn::load_model(dir, "vqvae");
  Vqvae m;
  try {
    from_json_value(loaded.config.at("vqvae"), m.config, "vqvae");
    for (const auto& s : loaded.config.at("slices")) m.slices.emplace_back(s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>());
  } catch (const Json::exception& e) {
    throw FormatError((dir / "model.json").string() + ": " + e.what());
  }
  if (m.slices.empty()) throw FormatError((dir / "model.json").string() + ": no part slices");
  m.config.validate();
  m.params = std::move(loaded.params);
  return m;
}

void write_tokens(const std::filesystem::path& path, const TokenGrid& grid) {
  io::write_gsmb_u16(path, {grid.frames, grid.parts}, grid.codes);
}

TokenGrid read_tokens(const std::filesystem::path& path) {
  nn::Shape shape;
  auto codes = io::read_gsmb_u16(path, shape);
  if (shape.size() != 2) throw FormatError(path.string() + ": token grid must be 2-D, got " + nn::shape_string(shape));
  return {shape[0], shape[1], std::move(codes)};
}

}  // namespace golfsig::tok
