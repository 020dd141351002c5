#pragma once

#include <filesystem>

#include "golfsig/nn/graph.hpp"
#include "golfsig/nn/transformer.hpp"
#include "golfsig/tok/vqvae.hpp"

namespace golfsig::prior {

struct PriorConfig {
  std::size_t codebook = 210;
  std::size_t parts = 5;
  /// Length of the learned time-embedding table.
  std::size_t max_frames = 256;
  nn::TransformerConfig transformer{256, 8, 4, 1024, 0.1};
  double lr = 3e-4;
  double lr_final = 1e-4;
  double weight_decay = 0.0;
  std::size_t batch = 16;
  std::size_t epochs = 100;
  double train_fraction = 0.9;

  void validate() const;
  /// Codes plus the MASK id.
  std::size_t vocabulary() const { return codebook + 1; }
  int mask_id() const { return static_cast<int>(codebook); }
};

template <class V>
void describe(V& v, PriorConfig& c) {
  v("codebook", c.codebook);
  v("parts", c.parts);
  v("max_frames", c.max_frames);
  v("transformer", c.transformer);
  v("lr", c.lr);
  v("lr_final", c.lr_final);
  v("weight_decay", c.weight_decay);
  v("batch", c.batch);
  v("epochs", c.epochs);
  v("train_fraction", c.train_fraction);
}

/// Mask ratio cos(pi tau / 2); tau outside [0, 1] is an error.
double gamma(double tau);

struct MaskedGrid {
  tok::TokenGrid tokens;             // corrupted input, MASK = codebook size
  std::vector<std::uint8_t> target;  // positions to predict, T * parts
};

/// Two-stage selection: round(gamma T) whole frames, then floor(gamma parts)
/// parts in every other frame; at least one position whenever gamma > 0.
/// Selected positions become MASK (80%), a uniform random code (10%) or stay
/// unchanged (10%).
MaskedGrid apply_masking(const tok::TokenGrid& grid, double tau, Rng& rng, std::size_t codebook = 210);

struct Prior {
  PriorConfig config;
  nn::ParameterStore params;
};

Prior init_prior(const PriorConfig& config, std::uint64_t seed);

/// Contextual token embeddings, (batch * T * parts) x width, before the
/// per-part output heads.
nn::Var prior_hidden(nn::Graph& g, const Prior& model, const std::vector<int>& ids, std::size_t batch,
                     std::size_t frames);

/// ids: batch * T * parts token ids, frame-major within each grid. Returns
/// one row of codebook logits per id.
nn::Var prior_forward(nn::Graph& g, const Prior& model, const std::vector<int>& ids, std::size_t batch,
                      std::size_t frames);

/// T x parts x codebook logits for one (possibly masked) grid.
nn::NDArray prior_logits(const Prior& model, const tok::TokenGrid& grid);

/// Cross-entropy over target positions only.
nn::Var prior_loss(nn::Var logits, const std::vector<int>& originals, const std::vector<std::uint8_t>& target);

/// T x parts probability of each observed token. The default reads all of
/// them from one unmasked pass; `exact` masks each position on its own.
nn::NDArray token_probabilities(const Prior& model, const tok::TokenGrid& grid, bool exact = false);

/// Top-1 accuracy on target positions of grids masked with tau ~ U(0, 1).
double masked_accuracy(const Prior& model, const std::vector<tok::TokenGrid>& grids,
                       const std::vector<std::size_t>& ids, std::uint64_t seed);

struct PriorCurve {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
};

struct PriorTraining {
  Prior model;
  PriorCurve curve;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
};

PriorTraining train_prior(const std::vector<tok::TokenGrid>& grids, const PriorConfig& config, std::uint64_t seed);

void save_prior(const Prior& model, const std::filesystem::path& dir);
Prior load_prior(const std::filesystem::path& dir);

}  // namespace golfsig::prior
