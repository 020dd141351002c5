#pragma once

#include <filesystem>

#include "golfsig/prior/prior.hpp"

namespace golfsig::analysis {

/// T * parts flags, frame-major.
using TokenMask = std::vector<std::uint8_t>;

/// Positions whose observed-token probability is below `threshold`.
TokenMask detect_anomalies(const prior::Prior& prior, const tok::TokenGrid& grid, double threshold = 0.05);
TokenMask threshold_mask(const nn::NDArray& probabilities, double threshold);

struct InpaintOptions {
  std::size_t steps = 8;
  /// 0 picks the most likely token instead of sampling.
  double temperature = 1.0;
};

/// Iterative masked decoding: masked positions start as MASK and each round
/// samples every open position, keeps the most confident ones and re-masks
/// the rest so that cos(pi/2 * round/steps) of them stay open. Positions
/// outside the mask are copied unchanged.
tok::TokenGrid inpaint(const prior::Prior& prior, const tok::TokenGrid& grid, const TokenMask& mask, Rng& rng,
                       const InpaintOptions& options = {});

/// Mean L1 distance in lattice coordinates against every database grid,
/// after nearest-neighbour resampling of both to `frames` frames.
double swing_score(const tok::TokenGrid& query, const std::vector<tok::TokenGrid>& database,
                   const tok::FsqSpec& spec = {}, std::size_t frames = 64);

struct Correlation {
  double r = 0.0;
  double p = 1.0;  // two-sided, Student t with n - 2 degrees of freedom
};

Correlation pearson(std::span<const double> x, std::span<const double> y);

struct AnomalyEntry {
  std::size_t frame = 0;
  std::size_t part = 0;
  std::uint16_t token = 0;
  double probability = 0.0;
};

/// Flagged positions, least likely first, at most k of them.
std::vector<AnomalyEntry> top_anomalies(const tok::TokenGrid& grid, const nn::NDArray& probabilities,
                                        const TokenMask& mask, std::size_t k);

void write_anomaly_summary(const std::filesystem::path& path, const std::string& swing_id,
                           const std::vector<AnomalyEntry>& entries, double threshold, std::size_t flagged);

}  // namespace golfsig::analysis
