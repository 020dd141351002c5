#pragma once

#include "golfsig/data/swing.hpp"

namespace golfsig::data {

struct GeneratorConfig {
  double keyframe_noise = 0.03;  // rad, per DOF per keyframe
  double timing_noise = 0.01;    // fraction of the swing
  double sex_offset = 1.0;       // scales the sex-specific posture pattern
  double age_offset = 1.0;       // scales the age-specific pattern
  double sensor_noise = 0.0;     // white noise sd on all sensor channels
  std::size_t smoothing_window = 1;  // moving average on positions before differentiating; 1 = off
};

/// Eight keyframe poses (joint angles) and their times as fractions of the
/// swing.
struct Keyframes {
  std::array<double, kEvents> times{};
  std::array<std::vector<double>, kEvents> angles;
  nn::NDArray root;  // 8 x 3 pelvis translation at the keyframes
};

Keyframes swing_keyframes(const kin::Skeleton& skeleton, const PlayerProfile& player, Club club, Rng& rng,
                          const GeneratorConfig& config = {});

/// Backswing amplitude multiplier by club.
double club_amplitude(Club club);

std::array<int, kEvents> event_frames(const std::array<double, kEvents>& times, std::size_t frames);

double min_jerk(double tau);

PlayerProfile random_profile(int id, Rng& rng);

struct SensorPlacement {
  std::string body = "radius_l";
  kin::Vec3 offset{0.0, 0.0, -0.22};
};

SwingRecord generate_swing(const kin::Skeleton& skeleton, const PlayerProfile& player, Club club, std::size_t frames,
                           double fps, std::uint64_t seed, const GeneratorConfig& config = {},
                           const SensorPlacement& placement = {});

struct CorpusSpec {
  std::size_t swings = 500;
  std::size_t players = 50;
  std::size_t frames = 64;
  double fps = 30.0;
};

/// Swing i belongs to player i % players; every stream is derived from
/// (seed, index) so any subset can be regenerated independently.
std::vector<SwingRecord> generate_corpus(const kin::Skeleton& skeleton, const CorpusSpec& spec, std::uint64_t seed,
                                         const GeneratorConfig& config = {}, const SensorPlacement& placement = {});

}  // namespace golfsig::data
