#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "golfsig/kin/kinematics.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::kin {
namespace {

constexpr double kPi = std::numbers::pi;

// Rodrigues' formula written out, independent of Eigen's AngleAxis.
Mat3 rodrigues(Vec3 k, double theta) {
  k.normalize();
  Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(theta) * K + (1 - std::cos(theta)) * K * K;
}

std::vector<double> random_angles(const Skeleton& s, Rng& rng, double margin = 0.05) {
  std::vector<double> q(s.dof_count());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = rng.uniform(s.dof(i).lower + margin, s.dof(i).upper - margin);
  return q;
}

TEST(Rotation6D, TrivialExamples) {
  EXPECT_TRUE(sixd_to_rotmat(kIdentitySixd).isApprox(Mat3::Identity(), 0.0));
  EXPECT_TRUE(sixd_to_rotmat(Sixd{2, 0, 0, 0, 3, 0}).isApprox(Mat3::Identity(), 0.0));
  const Sixd s = rotmat_to_sixd(rodrigues(Vec3::UnitZ(), kPi / 2));
  const Sixd expected{0, 1, 0, -1, 0, 0};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s[i], expected[i], 1e-15);
  EXPECT_EQ(rotmat_to_sixd(Mat3::Identity()), kIdentitySixd);
}

TEST(Rotation6D, RoundTripOverRandomRotations) {
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    const Mat3 r = rodrigues(axis, rng.uniform(-kPi, kPi));
    const Mat3 back = sixd_to_rotmat(rotmat_to_sixd(r));
    worst = std::max(worst, (back - r).cwiseAbs().maxCoeff());
    EXPECT_NEAR(back.determinant(), 1.0, 1e-9);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Rotation6D, DecodedMatrixIsOrthonormalForArbitraryInput) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Sixd s;
    for (auto& v : s) v = rng.normal();
    EXPECT_TRUE(is_rotation(sixd_to_rotmat(s), 1e-9));
  }
}

TEST(Rotation6D, Errors) {
  EXPECT_THROW(sixd_to_rotmat(Sixd{1, 0, 0, 2, 0, 0}), ValidationError);
  EXPECT_THROW(sixd_to_rotmat(Sixd{0, 0, 0, 0, 1, 0}), ValidationError);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.1;
  EXPECT_THROW(rotmat_to_sixd(bad), ValidationError);
  EXPECT_THROW(rotmat_to_sixd(-Mat3::Identity()), ValidationError);  // det -1
}

TEST(Geodesic, Examples) {
  const Mat3 r = rodrigues(Vec3(1, 2, 3), 0.7);
  EXPECT_NEAR(geodesic_angle(r, r), 0.0, 1e-7);
  EXPECT_NEAR(geodesic_angle(Mat3::Identity(), rodrigues(Vec3(0.3, -1, 2), kPi)), kPi, 1e-7);
  EXPECT_NEAR(geodesic_angle(Mat3::Identity(), rodrigues(Vec3::UnitX(), kPi / 6)), kPi / 6, 1e-10);
}

TEST(Skeleton, TopologyCounts) {
  const auto s = Skeleton::default_skeleton();
  EXPECT_EQ(s.body_count(), 26u);
  EXPECT_EQ(s.dof_count(), 52u);
  EXPECT_EQ(s.body(s.root()).name, "pelvis");
  const auto slices = s.part_slices();
  const std::size_t widths[] = {36, 36, 30, 30, 24};
  std::size_t next = 0;
  for (std::size_t p = 0; p < 5; ++p) {
    EXPECT_EQ(slices[p].first, next);
    EXPECT_EQ(slices[p].second, widths[p]);
    next += widths[p];
  }
  EXPECT_EQ(next, 156u);
  // Every body reaches the pelvis by following parents.
  for (std::size_t i = 0; i < s.body_count(); ++i) {
    std::size_t b = i, hops = 0;
    while (s.body(b).parent >= 0 && hops++ < 30) b = static_cast<std::size_t>(s.body(b).parent);
    EXPECT_EQ(b, s.root());
  }
}

TEST(Skeleton, JsonRoundTripAndValidation) {
  const auto s = Skeleton::default_skeleton();
  const auto back = Skeleton::from_json_string(s.to_json_string());
  EXPECT_EQ(back.to_json_string(), s.to_json_string());

  auto bodies = s.bodies();
  bodies[s.index_of("lumbar")].parent = static_cast<int>(s.index_of("head"));  // cycle
  EXPECT_THROW(Skeleton(bodies, s.parts()), ValidationError);
  bodies = s.bodies();
  bodies[3].dofs.pop_back();
  EXPECT_THROW(Skeleton(bodies, s.parts()), ValidationError);
  EXPECT_THROW(Skeleton::from_json_string("{\"bodies\": []}"), ValidationError);
  EXPECT_THROW(s.index_of("tail"), ValidationError);
}

TEST(ForwardKinematics, IdentityGivesCumulativeOffsets) {
  const auto s = Skeleton::default_skeleton();
  const auto p = forward_kinematics(s, std::vector<Mat3>(26, Mat3::Identity()));
  for (std::size_t i = 0; i < 26; ++i) {
    Vec3 expected = Vec3::Zero();
    for (std::size_t b = i; s.body(b).parent >= 0; b = static_cast<std::size_t>(s.body(b).parent))
      expected += s.body(b).offset;
    EXPECT_NEAR((p[i] - expected).norm(), 0.0, 1e-15) << s.body(i).name;
  }
  // Arms hang: the hand is below the shoulder.
  EXPECT_LT(p[s.index_of("hand_l")].z(), p[s.index_of("humerus_l")].z() - 0.5);
}

TEST(ForwardKinematics, PlanarTwoLinkChain) {
  const auto base = Skeleton::default_skeleton();
  auto bodies = base.bodies();
  bodies[base.index_of("lumbar")].offset = Vec3(1, 0, 0);
  bodies[base.index_of("thorax")].offset = Vec3(1, 0, 0);
  const Skeleton s(bodies, base.parts());
  std::vector<Mat3> g(26, Mat3::Identity());
  g[s.index_of("pelvis")] = rodrigues(Vec3::UnitZ(), kPi / 2);
  g[s.index_of("lumbar")] = rodrigues(Vec3::UnitZ(), kPi);
  const auto p = forward_kinematics(s, g);
  EXPECT_NEAR((p[s.index_of("lumbar")] - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
  // (0,1,0) + Rz(180) (1,0,0)
  EXPECT_NEAR((p[s.index_of("thorax")] - Vec3(-1, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(ForwardKinematics, GlobalRotationIsRigid) {
  const auto s = Skeleton::default_skeleton();
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = compose_global(s, random_angles(s, rng));
    const Vec3 root(rng.normal(), rng.normal(), rng.normal());
    const Mat3 q = random_rotation(rng);
    std::vector<Mat3> gq;
    for (const auto& r : g) gq.push_back(q * r);
    const auto a = forward_kinematics(s, g, root);
    const auto b = forward_kinematics(s, gq, q * root);
    for (std::size_t i = 0; i < 26; ++i) {
      EXPECT_NEAR((b[i] - q * a[i]).norm(), 0.0, 1e-9);
      for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR((a[i] - a[j]).norm(), (b[i] - b[j]).norm(), 1e-9);
    }
  }
}

TEST(JointAngles, IdentityPoseIsZero) {
  const auto s = Skeleton::default_skeleton();
  const auto f = orientations_to_joint_angles(s, std::vector<Mat3>(26, Mat3::Identity()));
  for (double q : f.angles) EXPECT_EQ(q, 0.0);
  EXPECT_EQ(f.residual, 0.0);
  EXPECT_EQ(f.clamped, 0u);
}

TEST(JointAngles, SingleHinge) {
  const auto s = Skeleton::default_skeleton();
  std::vector<Mat3> g(26, Mat3::Identity());
  const auto ulna = s.index_of("ulna_l");
  g[ulna] = rodrigues(s.body(ulna).dofs[0].axis, -kPi / 6);
  // Descendants keep their local rotations at zero.
  for (auto name : {"radius_l", "hand_l"}) g[s.index_of(name)] = g[ulna];
  const auto f = orientations_to_joint_angles(s, g);
  for (std::size_t i = 0; i < 52; ++i) {
    if (i == s.first_dof(ulna))
      EXPECT_NEAR(f.angles[i], -kPi / 6, 1e-12);
    else
      EXPECT_NEAR(f.angles[i], 0.0, 1e-12) << s.dof(i).name;
  }
  EXPECT_NEAR(f.residual, 0.0, 1e-7);
}

TEST(JointAngles, RoundTripWithinLimits) {
  const auto s = Skeleton::default_skeleton();
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto q = random_angles(s, rng);
    const auto f = orientations_to_joint_angles(s, compose_global(s, q));
    EXPECT_EQ(f.clamped, 0u);
    EXPECT_FALSE(f.gimbal);
    for (std::size_t i = 0; i < 52; ++i) worst = std::max(worst, std::abs(f.angles[i] - q[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(JointAngles, ClampResidualAndGimbal) {
  const auto s = Skeleton::default_skeleton();
  std::vector<Mat3> g(26, Mat3::Identity());
  const auto ulna = s.index_of("ulna_l");
  g[ulna] = rodrigues(s.body(ulna).dofs[0].axis, 1.0);  // limit is 0.1
  for (auto name : {"radius_l", "hand_l"}) g[s.index_of(name)] = g[ulna];
  auto f = orientations_to_joint_angles(s, g);
  EXPECT_EQ(f.angles[s.first_dof(ulna)], 0.1);
  EXPECT_EQ(s.dof_index("elbow_flexion_l"), s.first_dof(ulna));
  EXPECT_GE(f.clamped, 1u);
  EXPECT_NEAR(f.residual, 0.9, 1e-9);

  // Rotation about an axis the hinge cannot express is all residual.
  g.assign(26, Mat3::Identity());
  g[ulna] = rodrigues(Vec3::UnitX(), 0.2);
  for (auto name : {"radius_l", "hand_l"}) g[s.index_of(name)] = g[ulna];
  f = orientations_to_joint_angles(s, g);
  EXPECT_NEAR(f.residual, 0.2, 1e-9);

  g.assign(26, Mat3::Identity());
  const auto hum = s.index_of("humerus_l");
  g[hum] = rodrigues(s.body(hum).dofs[1].axis, kPi / 2);
  f = orientations_to_joint_angles(s, g);
  EXPECT_TRUE(f.gimbal);
}

TEST(Metrics, MpjpeOracles) {
  const auto s = Skeleton::default_skeleton();
  Rng rng(5);
  nn::NDArray qa({4, 52}), qb({4, 52});
  for (std::size_t t = 0; t < 4; ++t) {
    auto a = random_angles(s, rng), b = random_angles(s, rng);
    std::copy(a.begin(), a.end(), qa.row(t).begin());
    std::copy(b.begin(), b.end(), qb.row(t).begin());
  }
  const auto pa = angles_to_pose(s, qa), pb = angles_to_pose(s, qb);
  EXPECT_EQ(mpjpe(pa, pa, s), 0.0);
  const double m = mpjpe(pa, pb, s);
  EXPECT_NEAR(m, mpjpe(pb, pa, s), 1e-12);
  EXPECT_LE(mpjpe(pa, pb, s, Alignment::procrustes), m + 1e-9);

  // Flat double loop over frames and joints with a recursive position walk.
  double sum = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    const auto ga = compose_global(s, qa.row(t)), gb = compose_global(s, qb.row(t));
    for (std::size_t j = 0; j < 26; ++j) {
      Vec3 xa = Vec3::Zero(), xb = Vec3::Zero();
      for (std::size_t b = j; s.body(b).parent >= 0; b = static_cast<std::size_t>(s.body(b).parent)) {
        const auto parent = static_cast<std::size_t>(s.body(b).parent);
        xa += ga[parent] * s.body(b).offset;
        xb += gb[parent] * s.body(b).offset;
      }
      sum += (xa - xb).norm();
    }
  }
  EXPECT_NEAR(m, 100.0 * sum / (4 * 26), 1e-9);
  EXPECT_THROW(mpjpe(pa, angles_to_pose(s, nn::NDArray({3, 52})), s), ValidationError);
}

TEST(Metrics, ThreeFourFiveOffset) {
  Rng rng(6);
  nn::NDArray a({10 * 26, 3});
  for (auto& v : a.values()) v = rng.uniform(-1, 1);
  nn::NDArray b = a;
  for (std::size_t r = 0; r < b.rows(); ++r) {
    b(r, 0) += 0.03;
    b(r, 2) += 0.04;
  }
  EXPECT_NEAR(mean_joint_distance_cm(a, b), 5.0, 1e-12);
}

TEST(Metrics, Mpjre) {
  nn::NDArray a({3, 52}, 0.1), b = a;
  EXPECT_EQ(mpjre(a, b), 0.0);
  for (std::size_t t = 0; t < 3; ++t) b(t, 7) += kPi / 6;
  EXPECT_NEAR(mpjre(a, b), 30.0 / 52.0, 1e-12);
  EXPECT_NEAR(mpjre(b, a), 30.0 / 52.0, 1e-12);
  nn::NDArray c({1, 1}, 179.0 * kPi / 180.0), d({1, 1}, -179.0 * kPi / 180.0);
  EXPECT_NEAR(mpjre(c, d), 2.0, 1e-9);
  EXPECT_THROW(mpjre(a, nn::NDArray({2, 52})), ValidationError);
}

}  // namespace
}  // namespace golfsig::kin
