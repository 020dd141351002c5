#include "golfsig/analysis/anomaly.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "golfsig/util/error.hpp"
#include "golfsig/util/json_binding.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::analysis {

using nn::NDArray;
using tok::TokenGrid;

TokenMask threshold_mask(const NDArray& probs, double threshold) {
  TokenMask m(probs.size(), 0);
  for (std::size_t i = 0; i < probs.size(); ++i) m[i] = probs[i] < threshold;
  return m;
}

TokenMask detect_anomalies(const prior::Prior& prior, const TokenGrid& grid, double threshold) {
  return threshold_mask(prior::token_probabilities(prior, grid), threshold);
}

TokenGrid inpaint(const prior::Prior& prior, const TokenGrid& grid, const TokenMask& mask, Rng& rng,
                  const InpaintOptions& options) {
  if (mask.size() != grid.codes.size()) throw DimensionError("inpaint: mask size differs from the grid");
  if (options.steps == 0) throw ValidationError("inpaint: steps must be positive");
  if (options.temperature < 0.0) throw ValidationError("inpaint: temperature must be non-negative");
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) open.push_back(i);
  if (open.empty()) {
    spdlog::warn("inpaint: empty mask, grid returned unchanged");
    return grid;
  }
  const std::size_t C = prior.config.codebook, total = open.size();
  TokenGrid cur = grid;
  for (auto i : open) cur.codes[i] = static_cast<std::uint16_t>(prior.config.mask_id());

  std::vector<double> p(C);
  for (std::size_t step = 1; step <= options.steps && !open.empty(); ++step) {
    const NDArray logits = prior::prior_logits(prior, cur);
    std::vector<std::uint16_t> pick(open.size());
    std::vector<double> conf(open.size());
    for (std::size_t k = 0; k < open.size(); ++k) {
      const double* row = logits.data() + open[k] * C;
      const double t = options.temperature > 0.0 ? options.temperature : 1.0;
      const double mx = *std::max_element(row, row + C);
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += (p[c] = std::exp((row[c] - mx) / t));
      for (auto& v : p) v /= s;
      std::size_t choice = 0;
      if (options.temperature > 0.0) {
        double u = rng.uniform(), acc = 0.0;
        choice = C - 1;
        for (std::size_t c = 0; c < C; ++c)
          if ((acc += p[c]) > u) {
            choice = c;
            break;
          }
      } else {
        choice = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      }
      pick[k] = static_cast<std::uint16_t>(choice);
      conf[k] = p[choice];
    }
    // Cosine schedule for how many stay masked; at least one is fixed per round.
    std::size_t remain = step == options.steps
                             ? 0
                             : static_cast<std::size_t>(std::floor(
                                   static_cast<double>(total) *
                                   std::cos(std::numbers::pi / 2.0 * static_cast<double>(step) /
                                            static_cast<double>(options.steps))));
    remain = std::min(remain, open.size() - 1);
    std::vector<std::size_t> order(open.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
    const std::size_t fix = open.size() - remain;
    std::vector<std::size_t> still;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t k = order[r];
      if (r < fix)
        cur.codes[open[k]] = pick[k];
      else
        still.push_back(open[k]);
    }
    std::sort(still.begin(), still.end());
    open = std::move(still);
  }
  return cur;
}

namespace {

// T' x parts x channels lattice indices.
std::vector<int> resampled_lattice(const TokenGrid& g, const tok::FsqSpec& spec, std::size_t frames) {
  if (g.frames == 0) throw ValidationError("swing_score: empty grid");
  const std::size_t C = spec.channels();
  std::vector<int> out;
  out.reserve(frames * g.parts * C);
  for (std::size_t i = 0; i < frames; ++i) {
    // nearest source frame between the first and the last, halves rounded up
    const std::size_t src =
        frames == 1 ? 0 : (2 * i * (g.frames - 1) + (frames - 1)) / (2 * (frames - 1));
    for (std::size_t p = 0; p < g.parts; ++p) {
      const auto idx = tok::fsq_unpack(g.at(src, p), spec);
      out.insert(out.end(), idx.begin(), idx.end());
    }
  }
  return out;
}

}  // namespace

double swing_score(const TokenGrid& query, const std::vector<TokenGrid>& database, const tok::FsqSpec& spec,
                   std::size_t frames) {
  if (database.empty()) throw ValidationError("swing_score: empty database");
  if (frames == 0) throw ValidationError("swing_score: resample length must be positive");
  const auto q = resampled_lattice(query, spec, frames);
  double sum = 0.0;
  for (const auto& d : database) {
    if (d.parts != query.parts) throw DimensionError("swing_score: database grid has a different part count");
    const auto v = resampled_lattice(d, spec, frames);
    long long l1 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) l1 += std::abs(q[i] - v[i]);
    sum += static_cast<double>(l1) / static_cast<double>(q.size());
  }
  return sum / static_cast<double>(database.size());
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson: series lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("pearson: need at least 3 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: correlation is undefined for a constant series");
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    boost::math::students_t dist(df);
    c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

std::vector<AnomalyEntry> top_anomalies(const TokenGrid& grid, const NDArray& probs, const TokenMask& mask,
                                        std::size_t k) {
  std::vector<AnomalyEntry> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back({i / grid.parts, i % grid.parts, grid.codes[i], probs[i]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.probability < b.probability; });
  if (out.size() > k) out.resize(k);
  return out;
}

void write_anomaly_summary(const std::filesystem::path& path, const std::string& swing_id,
                           const std::vector<AnomalyEntry>& entries, double threshold, std::size_t flagged) {
  static const char* kParts[] = {"left_arm", "right_arm", "left_leg", "right_leg", "backbone"};
  Json j{{"swing", swing_id}, {"threshold", threshold}, {"flagged", flagged}, {"top", Json::array()}};
  for (const auto& e : entries)
    j["top"].push_back({{"frame", e.frame},
                        {"part", e.part < 5 ? kParts[e.part] : std::to_string(e.part)},
                        {"token", e.token},
                        {"probability", e.probability}});
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

}  // namespace golfsig::analysis
