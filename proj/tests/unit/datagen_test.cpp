#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "golfsig/data/dataset.hpp"
#include "golfsig/data/imu.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::data {
namespace {

const kin::Skeleton& skel() {
  static const kin::Skeleton s = kin::Skeleton::default_skeleton();
  return s;
}

PlayerProfile profile() {
  Rng rng(99);
  return random_profile(3, rng);
}

bool same_record(const SwingRecord& a, const SwingRecord& b) {
  return a.motion.pose == b.motion.pose && a.sensor == b.sensor && a.events == b.events &&
         *a.motion.root == *b.motion.root;
}

TEST(Generator, Deterministic) {
  const auto a = generate_swing(skel(), profile(), Club::iron, 64, 30, 7);
  const auto b = generate_swing(skel(), profile(), Club::iron, 64, 30, 7);
  EXPECT_TRUE(same_record(a, b));
  const auto c = generate_swing(skel(), profile(), Club::iron, 64, 30, 8);
  EXPECT_FALSE(a.motion.pose == c.motion.pose);
}

TEST(Generator, EventsStrictlyIncreasing) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto p = random_profile(0, rng);
    const auto club = static_cast<Club>(seed % kClubCount);
    const auto kf = swing_keyframes(skel(), p, club, rng);
    for (std::size_t T : {48u, 64u, 120u}) {
      const auto e = event_frames(kf.times, T);
      EXPECT_GE(e[0], 0);
      EXPECT_LT(e[7], static_cast<int>(T));
      for (std::size_t i = 1; i < kEvents; ++i) EXPECT_GT(e[i], e[i - 1]);
    }
  }
}

TEST(Generator, ParameterErrors) {
  EXPECT_THROW(generate_swing(skel(), profile(), Club::driver, 47, 30, 1), ConfigError);
  EXPECT_THROW(generate_swing(skel(), profile(), Club::driver, 64, 45, 1), ConfigError);
  auto p = profile();
  p.age = 90;
  EXPECT_THROW(generate_swing(skel(), p, Club::driver, 64, 30, 1), ValidationError);
}

TEST(Generator, DriverBackswingArmElevationExceedsWedge) {
  const auto idx = skel().dof_index("shoulder_flexion_l");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    const auto d = swing_keyframes(skel(), profile(), Club::driver, r1);
    const auto w = swing_keyframes(skel(), profile(), Club::wedge, r2);
    // Elevation is negative flexion about +y for a hanging arm.
    EXPECT_GT(d.angles[0][idx] - d.angles[3][idx], w.angles[0][idx] - w.angles[3][idx]);
  }
}

TEST(Generator, PosesRespectJointLimits) {
  const auto corpus = generate_corpus(skel(), {.swings = 30, .players = 10}, 5);
  for (const auto& r : corpus) {
    const auto ja = kin::extract_joint_angles(skel(), r.motion.pose);
    EXPECT_EQ(ja.clamped, 0u) << r.id;
    EXPECT_EQ(ja.gimbal_frames, 0u) << r.id;
    for (double res : ja.residual) EXPECT_LT(res, 1e-6);
  }
}

TEST(Generator, CorpusStreamsIndependentOfSize) {
  const auto a = generate_corpus(skel(), {.swings = 6, .players = 3}, 11);
  const auto b = generate_corpus(skel(), {.swings = 12, .players = 3}, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(same_record(a[i], b[i]));
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].player.id, static_cast<int>(i % 3));
  }
}

// Nearest centroid on flattened pose trajectories, first half train, second half test.
double centroid_accuracy(const std::vector<SwingRecord>& corpus, const std::function<int(const SwingRecord&)>& label,
                         int classes) {
  const std::size_t n = corpus.size(), half = n / 2, D = corpus[0].motion.pose.size();
  std::vector<std::vector<double>> c(static_cast<std::size_t>(classes), std::vector<double>(D, 0.0));
  std::vector<int> count(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < half; ++i) {
    const auto y = static_cast<std::size_t>(label(corpus[i]));
    ++count[y];
    for (std::size_t d = 0; d < D; ++d) c[y][d] += corpus[i].motion.pose[d];
  }
  for (int k = 0; k < classes; ++k)
    for (auto& v : c[static_cast<std::size_t>(k)]) v /= std::max(1, count[static_cast<std::size_t>(k)]);
  int correct = 0;
  for (std::size_t i = half; i < n; ++i) {
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < classes; ++k) {
      double dist = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double e = corpus[i].motion.pose[d] - c[static_cast<std::size_t>(k)][d];
        dist += e * e;
      }
      if (dist < bd) {
        bd = dist;
        best = k;
      }
    }
    correct += best == label(corpus[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(n - half);
}

TEST(Generator, ClubAndSexAreSeparable) {
  const auto corpus = generate_corpus(skel(), {.swings = 500, .players = 50}, 2024);
  const double club = centroid_accuracy(corpus, [](const SwingRecord& r) { return static_cast<int>(r.club); }, 5);
  const double sex = centroid_accuracy(corpus, [](const SwingRecord& r) { return static_cast<int>(r.player.sex); }, 2);
  EXPECT_GT(club, 0.8);
  EXPECT_GT(sex, 0.7);
  RecordProperty("club_accuracy", std::to_string(club));
  RecordProperty("sex_accuracy", std::to_string(sex));
}

kin::MotionSequence constant_motion(std::size_t T, const kin::Mat3& r) {
  kin::MotionSequence m;
  m.pose = nn::NDArray({T, kin::kPoseWidth});
  for (std::size_t t = 0; t < T; ++t) kin::encode_pose_row(std::vector<kin::Mat3>(26, r), m.pose.row(t));
  m.fps = 30;
  return m;
}

TEST(Imu, StaticPoseGivesGravityAndIdentity) {
  Rng rng(1);
  const auto m = constant_motion(10, kin::random_rotation(rng));
  const auto s = simulate_imu(m, skel(), {});
  ASSERT_EQ(s.rows(), 10u);
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(s(t, c), kin::kIdentitySixd[c]);
    EXPECT_EQ(s(t, 6), 0.0);
    EXPECT_EQ(s(t, 7), 0.0);
    EXPECT_EQ(s(t, 8), kGravity);
  }
}

TEST(Imu, CircularMotionMatchesDiscreteCentripetalValue) {
  const double w = 2.0 * std::numbers::pi, fps = 30.0;
  const std::size_t T = 40;
  kin::MotionSequence m;
  m.pose = nn::NDArray({T, kin::kPoseWidth});
  m.fps = fps;
  for (std::size_t t = 0; t < T; ++t)
    kin::encode_pose_row(std::vector<kin::Mat3>(26, kin::axis_angle(kin::Vec3::UnitZ(), w * t / fps)), m.pose.row(t));
  const auto s = simulate_imu(m, skel(), {"pelvis", {1.0, 0.0, 0.0}});
  const double discrete = (2.0 - 2.0 * std::cos(w / fps)) * fps * fps;
  for (std::size_t t = 0; t < T; ++t) {
    const double mag = std::hypot(s(t, 6), s(t, 7), s(t, 8) - kGravity);
    EXPECT_NEAR(mag, discrete, 1e-9 * discrete);
    EXPECT_NEAR(mag, w * w, 0.01 * w * w);
    // Constant spin: every increment is the same rotation about z.
    const auto inc = kin::sixd_to_rotmat(s.row(t).data());
    EXPECT_NEAR(kin::geodesic_angle(inc, kin::axis_angle(kin::Vec3::UnitZ(), w / fps)), 0.0, 1e-7);
  }
}

TEST(Imu, ConstantVelocityIsGravityOnly) {
  auto m = constant_motion(12, kin::Mat3::Identity());
  m.root = nn::NDArray({12, 3});
  for (std::size_t t = 0; t < 12; ++t) {
    (*m.root)(t, 0) = 0.5 * t;
    (*m.root)(t, 1) = -0.25 * t;
  }
  const auto s = simulate_imu(m, skel(), {});
  for (std::size_t t = 0; t < 12; ++t) {
    EXPECT_NEAR(s(t, 6), 0.0, 1e-9);
    EXPECT_NEAR(s(t, 7), 0.0, 1e-9);
    EXPECT_NEAR(s(t, 8), kGravity, 1e-9);
  }
}

TEST(Imu, Errors) {
  EXPECT_THROW(simulate_imu(constant_motion(2, kin::Mat3::Identity()), skel(), {}), ValidationError);
  EXPECT_THROW(simulate_imu(constant_motion(5, kin::Mat3::Identity()), skel(), {"wing", {}}), ValidationError);
}

TEST(Dataset, RoundTripIsBitExact) {
  auto corpus = generate_corpus(skel(), {.swings = 3, .players = 2}, 3);
  corpus[1].tokens.assign(corpus[1].frames() * 5, 209);
  const auto dir = golfsig::testing::temp_dir("dataset");
  write_dataset(corpus, dir);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(same_record(corpus[i], back[i]));
    EXPECT_EQ(back[i].id, corpus[i].id);
    EXPECT_EQ(back[i].club, corpus[i].club);
    EXPECT_EQ(back[i].player.style, corpus[i].player.style);
    EXPECT_EQ(back[i].player.age, corpus[i].player.age);
    EXPECT_EQ(back[i].player.sex, corpus[i].player.sex);
    EXPECT_EQ(back[i].motion.fps, corpus[i].motion.fps);
    EXPECT_EQ(back[i].tokens, corpus[i].tokens);
  }
}

TEST(Dataset, CorruptionIsAFormatErrorNamingTheFile) {
  const auto corpus = generate_corpus(skel(), {.swings = 2, .players = 1}, 4);
  const auto dir = golfsig::testing::temp_dir("dataset_bad");
  write_dataset(corpus, dir);
  {
    std::fstream f(dir / "swing_00000.imu.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    read_dataset(dir);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("swing_00000.imu.bin"), std::string::npos) << e.what();
  }
  write_dataset(corpus, dir);
  std::filesystem::remove(dir / "swing_00001.pose.bin");
  try {
    read_dataset(dir);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("swing_00001.pose.bin"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_dataset(dir / "nowhere"), FormatError);
}

}  // namespace
}  // namespace golfsig::data
