#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "golfsig/kin/kinematics.hpp"

namespace golfsig::data {

enum class Sex { male, female };
enum class Club { driver, fairway, hybrid, iron, wedge };

inline constexpr std::size_t kClubCount = 5;
inline constexpr std::size_t kEvents = 8;
inline constexpr std::size_t kSensorWidth = 9;
inline constexpr std::array<const char*, kEvents> kEventNames{
    "address", "toe-up", "mid-backswing", "top", "mid-downswing", "impact", "mid-follow-through", "finish"};

const char* sex_name(Sex s);
const char* club_name(Club c);
Sex parse_sex(const std::string& s);
Club parse_club(const std::string& s);

/// Style latent: tempo, backswing amplitude, spine tilt, wrist hinge timing,
/// stance width, sway, follow-through extent, posture bend. Each in [-1, 1].
struct PlayerProfile {
  int id = 0;
  Sex sex = Sex::male;
  double age = 40.0;
  std::array<double, 8> style{};

  void validate() const;
};

struct SwingRecord {
  std::string id;
  PlayerProfile player;
  Club club = Club::driver;
  kin::MotionSequence motion;
  nn::NDArray sensor;  // T x 9
  std::array<int, kEvents> events{};
  /// T x 5 token grid, row-major; empty until tokenized.
  std::vector<std::uint16_t> tokens;

  /// Pose and sensor arrays may be absent in token-only datasets.
  bool has_pose() const { return motion.pose.size() > 0; }
  bool has_sensor() const { return sensor.size() > 0; }
  std::size_t frames() const;
  void validate() const;
};

}  // namespace golfsig::data
