#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "golfsig/analysis/heads.hpp"
#include "golfsig/data/generator.hpp"
#include "golfsig/events/events.hpp"
#include "golfsig/pose/posenet.hpp"
#include "golfsig/prior/prior.hpp"
#include "golfsig/tok/vqvae.hpp"
#include "golfsig/util/json_binding.hpp"

namespace golfsig::cli {

struct SkeletonSection {
  /// Skeleton JSON; empty selects the built-in 26-body model.
  std::string path;
};

template <class V>
void describe(V& v, SkeletonSection& c) {
  v("path", c.path);
}

struct DatagenSection {
  std::size_t swings = 500;
  std::size_t players = 50;
  std::size_t frames = 64;
  double fps = 30.0;
  double keyframe_noise = 0.03;
  double timing_noise = 0.01;
  double sex_offset = 1.0;
  double age_offset = 1.0;
  double sensor_noise = 0.0;
  std::size_t smoothing_window = 1;
  std::string sensor_body = "radius_l";
  std::array<double, 3> sensor_offset{0.0, 0.0, -0.22};
};

template <class V>
void describe(V& v, DatagenSection& c) {
  v("swings", c.swings);
  v("players", c.players);
  v("frames", c.frames);
  v("fps", c.fps);
  v("keyframe_noise", c.keyframe_noise);
  v("timing_noise", c.timing_noise);
  v("sex_offset", c.sex_offset);
  v("age_offset", c.age_offset);
  v("sensor_noise", c.sensor_noise);
  v("smoothing_window", c.smoothing_window);
  v("sensor_body", c.sensor_body);
  v("sensor_offset", c.sensor_offset);
}

/// Fallbacks for the --data and --reference flags; empty means unset.
struct PathsSection {
  std::string data;
  std::string reference;
};

template <class V>
void describe(V& v, PathsSection& c) {
  v("data", c.data);
  v("reference", c.reference);
}

struct PipelineConfig {
  SkeletonSection skeleton;
  DatagenSection datagen;
  pose::PoseNetConfig posenet;
  events::EventConfig events;
  tok::VqvaeConfig vqvae;
  prior::PriorConfig prior;
  analysis::HeadConfig heads;
  PathsSection paths;
  std::uint64_t seed = 0;

  kin::Skeleton load_skeleton() const;
  data::CorpusSpec corpus() const;
  data::GeneratorConfig generator() const;
  data::SensorPlacement placement() const;
  /// Independent seed for one pipeline stage.
  std::uint64_t stage_seed(const std::string& stage) const;
};

template <class V>
void describe(V& v, PipelineConfig& c) {
  v("skeleton", c.skeleton);
  v("datagen", c.datagen);
  v("posenet", c.posenet);
  v("events", c.events);
  v("vqvae", c.vqvae);
  v("prior", c.prior);
  v("heads", c.heads);
  v("paths", c.paths);
  v("seed", c.seed);
}

/// Applies `key=value` to a JSON document; the value is parsed as JSON and
/// taken as a string when that fails. Dotted keys address nested sections.
void apply_override(Json& doc, const std::string& assignment);

/// Defaults, then the document, then overrides. Throws ConfigError naming
/// the key for unknown keys, type mismatches, a missing seed, missing
/// referenced paths and invalid sections.
PipelineConfig resolve_config(Json doc, const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

inline constexpr const char* kConfigEcho = "config.json";

/// Writes the resolved config into `dir` (created if needed).
void echo_config(const PipelineConfig& config, const std::filesystem::path& dir);

}  // namespace golfsig::cli
