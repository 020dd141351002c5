#include "golfsig/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "golfsig/data/imu.hpp"
#include "golfsig/util/error.hpp"

namespace golfsig::data {

namespace {

class PoseBuilder {
 public:
  explicit PoseBuilder(const kin::Skeleton& s) : s_(s), q_(s.dof_count(), 0.0) {}

  double& operator[](const std::string& dof) { return q_[s_.dof_index(dof)]; }
  // Same value (in each side's mirrored axes) on both sides.
  void both(const std::string& dof, double v) {
    (*this)[dof + "_l"] = v;
    (*this)[dof + "_r"] = v;
  }
  void both_add(const std::string& dof, double v) {
    (*this)[dof + "_l"] += v;
    (*this)[dof + "_r"] += v;
  }
  const std::vector<double>& angles() const { return q_; }

 private:
  const kin::Skeleton& s_;
  std::vector<double> q_;
};

constexpr std::uint64_t kPlayerStreamBase = 1ULL << 40;

}  // namespace

double club_amplitude(Club club) {
  static constexpr double kAmp[kClubCount] = {1.0, 0.95, 0.9, 0.85, 0.7};
  return kAmp[static_cast<std::size_t>(club)];
}

double min_jerk(double tau) {
  const double t = std::clamp(tau, 0.0, 1.0);
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

PlayerProfile random_profile(int id, Rng& rng) {
  PlayerProfile p;
  p.id = id;
  p.sex = rng.bernoulli(0.5) ? Sex::female : Sex::male;
  p.age = std::round(rng.uniform(18.0, 80.0));
  for (auto& s : p.style) s = rng.uniform(-1.0, 1.0);
  return p;
}

Keyframes swing_keyframes(const kin::Skeleton& skeleton, const PlayerProfile& player, Club club, Rng& rng,
                          const GeneratorConfig& cfg) {
  player.validate();
  const auto& st = player.style;
  const double k = static_cast<double>(club);
  const double sx = (player.sex == Sex::female ? 1.0 : -1.0) * cfg.sex_offset;
  const double ag = (player.age - 45.0) / 25.0 * cfg.age_offset;
  const double amp = club_amplitude(club) * (1.0 + 0.03 * st[1]) * (1.0 - 0.03 * ag);
  const double fol = (1.0 - 0.06 * k) * (1.0 + 0.04 * st[6]) * (1.0 - 0.03 * ag);

  Keyframes kf;
  const double a0 = 0.08;
  const double top = 0.50 + 0.015 * st[0] - 0.02 * k + 0.005 * ag;
  const double impact = top + 0.15 - 0.01 * st[0];
  kf.times = {a0,
              a0 + 0.38 * (top - a0),
              a0 + 0.62 * (top - a0),
              top,
              top + 0.55 * (impact - top),
              impact,
              impact + 0.09,
              0.92 + 0.02 * st[6]};
  for (auto& t : kf.times) t += rng.normal(0.0, cfg.timing_noise);

  PoseBuilder base(skeleton);
  const double tilt = 0.26 + 0.04 * st[2] + 0.07 * k;
  base["pelvis_tilt"] = tilt;
  base["lumbar_extension"] = 0.10 + 0.05 * st[7];
  base["thorax_extension"] = 0.10;
  base["neck_flexion"] = 0.25;
  base.both("hip_flexion", -tilt - 0.25 - 0.05 * st[7]);
  base.both("ankle_flexion", -0.10);
  base.both("hip_adduction", 0.22 - 0.05 * k + 0.02 * st[4]);
  base.both("shoulder_flexion", -0.65 - 0.10 * k);
  base.both("knee_flexion", 0.30 + 0.05 * k + 0.04 * st[7]);
  base["shoulder_abduction_l"] = -0.25;
  base["shoulder_abduction_r"] = -0.30;
  base["elbow_flexion_l"] = -0.05;
  base["elbow_flexion_r"] = -0.25;
  base.both("wrist_deviation", 0.25);
  // Sex and age posture patterns, present in every frame.
  base["lumbar_extension"] += -0.12 * sx + 0.05 * ag;
  base.both_add("knee_flexion", 0.10 * sx + 0.05 * ag);
  base.both_add("shoulder_abduction", 0.10 * sx);
  base["neck_bending"] += 0.10 * sx;
  base["pelvis_list"] += 0.06 * sx;
  base["elbow_flexion_l"] -= 0.10 * sx;
  base.both_add("sc_elevation", 0.05 * ag);

  const PoseBuilder b = base;
  auto backswing = [&](double f) {
    PoseBuilder p = b;
    p["pelvis_rotation"] = -0.75 * amp * f;
    p["lumbar_rotation"] = -0.40 * amp * f;
    p["thorax_rotation"] = -0.55 * amp * f;
    p["neck_rotation"] = 1.70 * amp * f * 0.6;
    p["pelvis_list"] -= 0.05 * f;
    p["shoulder_flexion_l"] -= 1.35 * amp * f;
    p["shoulder_abduction_l"] -= 0.55 * amp * f;
    p["shoulder_rotation_l"] = -0.4 * amp * f;
    p["shoulder_flexion_r"] -= 0.9 * amp * f;
    p["shoulder_abduction_r"] += 0.55 * amp * f;
    p["shoulder_rotation_r"] = 0.5 * amp * f;
    p["elbow_flexion_r"] -= 1.35 * amp * f * f;
    const double h = std::clamp(f * (1.2 + 0.3 * st[3]), 0.0, 1.0);
    p["wrist_flexion_l"] = -0.9 * amp * h;
    p["wrist_flexion_r"] = 0.6 * amp * h;
    p["knee_flexion_l"] += 0.15 * f;
    p["hip_rotation_r"] -= 0.2 * amp * f;
    return p;
  };

  std::array<PoseBuilder, kEvents> keys{b, backswing(0.35), backswing(0.65), backswing(1.0), b, b, b, b};

  auto& down = keys[4];
  down["pelvis_rotation"] = -0.15 * amp;
  down["lumbar_rotation"] = -0.30 * amp;
  down["thorax_rotation"] = -0.45 * amp;
  down["neck_rotation"] = 0.55 * amp;
  down["shoulder_flexion_l"] -= 0.9 * amp;
  down["shoulder_abduction_l"] -= 0.45 * amp;
  down["shoulder_rotation_l"] = -0.2;
  down["shoulder_flexion_r"] -= 0.5 * amp;
  down["shoulder_abduction_r"] += 0.15;
  down["elbow_flexion_r"] -= 0.9 * amp;
  down["wrist_flexion_l"] = -0.8 * amp;
  down["wrist_flexion_r"] = 0.5 * amp;
  down["knee_flexion_l"] += 0.05;
  down["knee_flexion_r"] += 0.08;
  down["hip_adduction_l"] += 0.04;

  auto& imp = keys[5];
  imp["pelvis_rotation"] = 0.40;
  imp["lumbar_rotation"] = 0.10;
  imp["thorax_rotation"] = -0.05;
  imp["neck_rotation"] = -0.30;
  imp["shoulder_flexion_l"] -= 0.1;
  imp["elbow_flexion_r"] = -0.05;
  imp["wrist_flexion_l"] = 0.1;
  imp["wrist_flexion_r"] = -0.05;
  imp["knee_flexion_l"] -= 0.15;
  imp["knee_flexion_r"] += 0.12;
  imp["mtp_r"] = -0.4;
  imp["ankle_flexion_r"] = 0.25;
  imp["hip_rotation_l"] = 0.2;

  auto& mid = keys[6];
  mid["pelvis_rotation"] = 0.95 * fol;
  mid["lumbar_rotation"] = 0.30 * fol;
  mid["thorax_rotation"] = 0.35 * fol;
  mid["neck_rotation"] = -0.6 * fol;
  mid["lumbar_extension"] -= 0.1;
  mid["shoulder_flexion_r"] -= 0.75 * fol;
  mid["shoulder_abduction_r"] -= 0.55 * fol;
  mid["shoulder_flexion_l"] -= 0.55 * fol;
  mid["shoulder_abduction_l"] += 0.35 * fol;
  mid["elbow_flexion_l"] = -0.7 * fol;
  mid["wrist_flexion_l"] = 0.4;
  mid["wrist_flexion_r"] = -0.3;
  mid["knee_flexion_l"] -= 0.2;
  mid["knee_flexion_r"] += 0.35;
  mid["mtp_r"] = -0.7;
  mid["ankle_flexion_r"] = 0.45;
  mid["hip_rotation_l"] = 0.35;

  auto& fin = keys[7];
  fin["pelvis_rotation"] = 1.35 * fol;
  fin["lumbar_rotation"] = 0.45 * fol;
  fin["thorax_rotation"] = 0.55 * fol;
  fin["neck_rotation"] = -0.9 * fol;
  fin["lumbar_extension"] -= 0.35 * fol;
  fin["thorax_extension"] -= 0.2;
  fin["pelvis_tilt"] -= 0.2;
  fin.both_add("hip_flexion", 0.15);
  fin["shoulder_flexion_l"] -= 1.5 * fol;
  fin["shoulder_abduction_l"] += 0.5 * fol;
  fin["elbow_flexion_l"] = -1.6 * fol;
  fin["shoulder_flexion_r"] -= 1.55 * fol;
  fin["shoulder_abduction_r"] -= 0.6 * fol;
  fin["elbow_flexion_r"] = -0.9 * fol;
  fin["wrist_flexion_l"] = 0.6;
  fin["wrist_flexion_r"] = -0.5;
  fin["knee_flexion_l"] -= 0.2;
  fin["knee_flexion_r"] += 0.6;
  fin["mtp_r"] = -0.85;
  fin["ankle_flexion_r"] = 0.6;
  fin["hip_rotation_l"] = 0.45;
  fin["hip_rotation_r"] = 0.3;

  for (std::size_t e = 0; e < kEvents; ++e) {
    kf.angles[e] = keys[e].angles();
    for (std::size_t i = 0; i < skeleton.dof_count(); ++i) {
      const auto& d = skeleton.dof(i);
      const double v = kf.angles[e][i] + rng.normal(0.0, cfg.keyframe_noise);
      kf.angles[e][i] = std::clamp(v, d.lower + 0.02, d.upper - 0.02);
    }
  }

  static constexpr double kSway[kEvents] = {0.0, -0.02, -0.03, -0.04, -0.01, 0.03, 0.05, 0.06};
  kf.root = nn::NDArray({kEvents, 3});
  for (std::size_t e = 0; e < kEvents; ++e) {
    kf.root(e, 1) = kSway[e] * (1.0 + 0.5 * st[5]);
    kf.root(e, 2) = 0.95;
  }
  return kf;
}

std::array<int, kEvents> event_frames(const std::array<double, kEvents>& times, std::size_t frames) {
  if (frames < 2 * kEvents) throw ConfigError("too few frames to place 8 distinct events");
  const int last = static_cast<int>(frames) - 1;
  std::array<int, kEvents> e{};
  for (std::size_t i = 0; i < kEvents; ++i) {
    e[i] = std::clamp(static_cast<int>(std::lround(times[i] * last)), 0, last);
    if (i > 0) e[i] = std::max(e[i], e[i - 1] + 1);
  }
  for (std::size_t i = kEvents; i-- > 0;) e[i] = std::min(e[i], i + 1 < kEvents ? e[i + 1] - 1 : last);
  return e;
}

SwingRecord generate_swing(const kin::Skeleton& skeleton, const PlayerProfile& player, Club club, std::size_t frames,
                           double fps, std::uint64_t seed, const GeneratorConfig& config,
                           const SensorPlacement& placement) {
  if (frames < 48) throw ConfigError("swing length must be at least 48 frames, got " + std::to_string(frames));
  if (fps != 30.0 && fps != 60.0) throw ConfigError("fps must be 30 or 60");
  Rng rng(seed);
  const Keyframes kf = swing_keyframes(skeleton, player, club, rng, config);

  SwingRecord rec;
  rec.player = player;
  rec.club = club;
  rec.events = event_frames(kf.times, frames);

  const std::size_t D = skeleton.dof_count();
  nn::NDArray angles({frames, D});
  nn::NDArray root({frames, 3});
  for (std::size_t t = 0; t < frames; ++t) {
    const int ti = static_cast<int>(t);
    std::size_t i = 0;
    double s = 0.0;
    if (ti >= rec.events[kEvents - 1]) {
      i = kEvents - 1;
    } else if (ti > rec.events[0]) {
      while (ti >= rec.events[i + 1]) ++i;
      s = min_jerk(static_cast<double>(ti - rec.events[i]) / (rec.events[i + 1] - rec.events[i]));
    }
    const std::size_t j = std::min(i + 1, kEvents - 1);
    for (std::size_t d = 0; d < D; ++d) angles(t, d) = kf.angles[i][d] + (kf.angles[j][d] - kf.angles[i][d]) * s;
    for (std::size_t c = 0; c < 3; ++c) root(t, c) = kf.root(i, c) + (kf.root(j, c) - kf.root(i, c)) * s;
  }
  rec.motion.pose = kin::angles_to_pose(skeleton, angles);
  rec.motion.root = std::move(root);
  rec.motion.fps = fps;
  rec.sensor = simulate_imu(rec.motion, skeleton, placement, config.smoothing_window);
  if (config.sensor_noise > 0.0)
    for (auto& v : rec.sensor.values()) v += rng.normal(0.0, config.sensor_noise);
  return rec;
}

std::vector<SwingRecord> generate_corpus(const kin::Skeleton& skeleton, const CorpusSpec& spec, std::uint64_t seed,
                                         const GeneratorConfig& config, const SensorPlacement& placement) {
  if (spec.swings == 0 || spec.players == 0) throw ConfigError("corpus needs at least one swing and one player");
  std::vector<PlayerProfile> players;
  for (std::size_t p = 0; p < spec.players; ++p) {
    Rng rng = Rng::derive(seed, kPlayerStreamBase + p);
    players.push_back(random_profile(static_cast<int>(p), rng));
  }
  std::vector<SwingRecord> out;
  out.reserve(spec.swings);
  for (std::size_t i = 0; i < spec.swings; ++i) {
    Rng rng = Rng::derive(seed, i);
    const auto club = static_cast<Club>(rng.below(kClubCount));
    auto rec = generate_swing(skeleton, players[i % spec.players], club, spec.frames, spec.fps, rng.next_u64(), config,
                              placement);
    char id[32];
    std::snprintf(id, sizeof id, "swing_%05zu", i);
    rec.id = id;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace golfsig::data
