#pragma once

#include <filesystem>

#include "golfsig/data/swing.hpp"
#include "golfsig/kin/skeleton.hpp"
#include "golfsig/nn/graph.hpp"
#include "golfsig/nn/transformer.hpp"
#include "golfsig/tok/fsq.hpp"

namespace golfsig::tok {

struct VqvaeConfig {
  std::vector<int> levels{7, 6, 5};
  nn::TransformerConfig transformer{256, 4, 4, 512, 0.1};
  double velocity_weight = 0.5;
  double smooth_l1_beta = 1.0;
  /// One codebook over the whole pose instead of one per body part.
  bool single_codebook = false;
  /// Batch-standardise the latents before the tanh bound.
  bool latent_norm = true;
  double lr = 5e-4;
  double lr_final = 1e-4;
  std::size_t batch = 16;
  std::size_t epochs = 100;
  double weight_decay = 0.0;
  /// Swings used for the per-epoch reconstruction MPJPE (0: all).
  std::size_t eval_swings = 32;

  void validate() const;
  FsqSpec fsq() const { return {levels}; }
};

template <class V>
void describe(V& v, VqvaeConfig& c) {
  v("levels", c.levels);
  v("transformer", c.transformer);
  v("velocity_weight", c.velocity_weight);
  v("smooth_l1_beta", c.smooth_l1_beta);
  v("single_codebook", c.single_codebook);
  v("latent_norm", c.latent_norm);
  v("lr", c.lr);
  v("lr_final", c.lr_final);
  v("batch", c.batch);
  v("epochs", c.epochs);
  v("weight_decay", c.weight_decay);
  v("eval_swings", c.eval_swings);
}

/// T x parts integer codes, row-major.
struct TokenGrid {
  std::size_t frames = 0;
  std::size_t parts = 0;
  std::vector<std::uint16_t> codes;

  std::uint16_t at(std::size_t t, std::size_t p) const { return codes[t * parts + p]; }
  std::uint16_t& at(std::size_t t, std::size_t p) { return codes[t * parts + p]; }
  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

struct Vqvae {
  VqvaeConfig config;
  /// Pose channel ranges, one per codebook.
  std::vector<std::pair<std::size_t, std::size_t>> slices;
  nn::ParameterStore params;

  std::size_t parts() const { return slices.size(); }
  std::size_t pose_width() const { return slices.back().first + slices.back().second; }
};

Vqvae init_vqvae(const VqvaeConfig& config, const kin::Skeleton& skeleton, std::uint64_t seed);

struct VqvaeGraph {
  nn::Var reconstruction;             // (B*T) x 156
  std::vector<nn::Var> latents;       // per part, (B*T) x channels before quantisation
  std::vector<nn::Var> quantized;     // per part, lattice points
};

/// Encode, quantise and decode a batch of B sequences of length T. With
/// `frozen_offsets` the rounding is replaced by adding the given constant
/// per part (the gradient of that surrogate equals the straight-through one).
VqvaeGraph vqvae_forward(nn::Graph& g, const Vqvae& model, nn::Var motion, std::size_t batch, std::size_t steps,
                         const std::vector<nn::NDArray>* frozen_offsets = nullptr);

/// Smooth-L1 on positions plus weight * smooth-L1 on first differences.
/// T < 2 skips the velocity term with a warning.
nn::Var vqvae_loss(nn::Var motion, nn::Var reconstruction, std::size_t batch, std::size_t steps,
                   double velocity_weight = 0.5, double beta = 1.0);
double vqvae_loss(const nn::NDArray& motion, const nn::NDArray& reconstruction, double velocity_weight = 0.5,
                  double beta = 1.0);

/// Latent channels before quantisation for one sequence, per part T x channels.
std::vector<nn::NDArray> encode_latents(const Vqvae& model, const nn::NDArray& motion);
TokenGrid encode_motion(const Vqvae& model, const nn::NDArray& motion);
nn::NDArray decode_tokens(const Vqvae& model, const TokenGrid& grid);

/// Batched versions for equal-length sequences.
std::vector<TokenGrid> encode_batch(const Vqvae& model, const std::vector<const nn::NDArray*>& motions);
std::vector<nn::NDArray> decode_batch(const Vqvae& model, const std::vector<const TokenGrid*>& grids);

/// Fraction of codes used at least once, per part.
std::vector<double> codebook_utilization(const std::vector<TokenGrid>& corpus, std::size_t codebook_size);

struct VqvaeCurve {
  std::vector<double> loss;                     // per epoch, training mean
  std::vector<double> mpjpe;                    // per epoch, on the evaluation swings
  std::vector<std::vector<double>> utilization; // per epoch, per part, on the training corpus
  double initial_mpjpe = 0.0;
  double initial_loss = 0.0;
};

struct VqvaeTraining {
  Vqvae model;
  VqvaeCurve curve;
};

VqvaeTraining train_vqvae(const std::vector<data::SwingRecord>& swings, const kin::Skeleton& skeleton,
                          const VqvaeConfig& config, std::uint64_t seed);

/// Mean reconstruction MPJPE (cm, root aligned) over the swings.
double reconstruction_mpjpe(const Vqvae& model, const std::vector<data::SwingRecord>& swings,
                            const std::vector<std::size_t>& ids, const kin::Skeleton& skeleton);

void save_vqvae(const Vqvae& model, const std::filesystem::path& dir);
Vqvae load_vqvae(const std::filesystem::path& dir);

void write_tokens(const std::filesystem::path& path, const TokenGrid& grid);
TokenGrid read_tokens(const std::filesystem::path& path);

}  // namespace golfsig::tok
