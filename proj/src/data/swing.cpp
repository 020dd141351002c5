#include "golfsig/data/swing.hpp"

#include "golfsig/util/error.hpp"

namespace golfsig::data {

namespace {
constexpr std::array<const char*, kClubCount> kClubNames{"driver", "fairway", "hybrid", "iron", "wedge"};
}

const char* sex_name(Sex s) { return s == Sex::male ? "male" : "female"; }

const char* club_name(Club c) { return kClubNames[static_cast<std::size_t>(c)]; }

Sex parse_sex(const std::string& s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  throw FormatError("unknown sex '" + s + "'");
}

Club parse_club(const std::string& s) {
  for (std::size_t i = 0; i < kClubCount; ++i)
    if (s == kClubNames[i]) return static_cast<Club>(i);
  throw FormatError("unknown club '" + s + "'");
}

void PlayerProfile::validate() const {
  if (age < 18.0 || age > 80.0) throw ValidationError("player age must be in [18, 80]");
  for (double v : style)
    if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("player style latent must be in [-1, 1]");
}

std::size_t SwingRecord::frames() const {
  if (has_pose()) return motion.pose.rows();
  if (has_sensor()) return sensor.rows();
  return tokens.size() / kin::kParts;
}

void SwingRecord::validate() const {
  const std::size_t T = frames();
  if (T == 0) throw ValidationError(id + ": swing has no frames");
  if (has_pose() && (motion.pose.ndim() != 2 || motion.pose.cols() != kin::kPoseWidth))
    throw ValidationError(id + ": pose must be T x 156");
  if (!(motion.fps > 0.0)) throw ValidationError(id + ": fps must be positive");
  if (has_sensor() && (sensor.ndim() != 2 || sensor.rows() != T || sensor.cols() != kSensorWidth))
    throw ValidationError(id + ": sensor must be T x 9");
  if (motion.root && (motion.root->rows() != T || motion.root->cols() != 3))
    throw ValidationError(id + ": root translation must be T x 3");
  for (std::size_t e = 0; e < kEvents; ++e) {
    if (events[e] < 0 || static_cast<std::size_t>(events[e]) >= T)
      throw ValidationError(id + ": event frame out of range");
    if (e > 0 && events[e] <= events[e - 1]) throw ValidationError(id + ": event frames must strictly increase");
  }
  if (!tokens.empty() && tokens.size() != T * kin::kParts) throw ValidationError(id + ": token grid must be T x 5");
}

}  // namespace golfsig::data
