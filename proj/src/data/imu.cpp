#include "golfsig/data/imu.hpp"

#include "golfsig/util/error.hpp"

namespace golfsig::data {

nn::NDArray simulate_imu(const kin::MotionSequence& motion, const kin::Skeleton& skeleton,
                         const SensorPlacement& placement, std::size_t smoothing_window) {
  const std::size_t T = motion.frames();
  if (T < 3) throw ValidationError("IMU simulation needs at least 3 frames to differentiate");
  if (!(motion.fps > 0.0)) throw ValidationError("IMU simulation needs a positive fps");
  if (smoothing_window == 0) throw ValidationError("smoothing window must be at least 1");
  const std::size_t body = skeleton.index_of(placement.body);

  std::vector<kin::Mat3> rot(T);
  std::vector<kin::Vec3> pos(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto g = kin::decode_pose_row(motion.pose.row(t));
    kin::Vec3 root = kin::Vec3::Zero();
    if (motion.root) root = kin::Vec3((*motion.root)(t, 0), (*motion.root)(t, 1), (*motion.root)(t, 2));
    const auto p = kin::forward_kinematics(skeleton, g, root);
    rot[t] = g[body];
    pos[t] = p[body] + g[body] * placement.offset;
  }
  if (smoothing_window > 1) {
    // Centered moving average, window truncated at the ends.
    std::vector<kin::Vec3> s(T);
    const auto half = static_cast<std::ptrdiff_t>(smoothing_window / 2);
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(T); ++t) {
      kin::Vec3 acc = kin::Vec3::Zero();
      int n = 0;
      for (auto k = t - half; k <= t + half; ++k) {
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(T)) continue;
        acc += pos[static_cast<std::size_t>(k)];
        ++n;
      }
      s[static_cast<std::size_t>(t)] = acc / n;
    }
    pos = std::move(s);
  }

  nn::NDArray out({T, kSensorWidth});
  const double fps2 = motion.fps * motion.fps;
  for (std::size_t t = 1; t < T; ++t) {
    // Unchanged orientation is reported as the exact identity rather than
    // R^T R with its rounding.
    const kin::Mat3 inc = rot[t - 1] == rot[t] ? kin::Mat3::Identity() : kin::Mat3(rot[t - 1].transpose() * rot[t]);
    kin::write_sixd(inc, out.row(t).data());
  }
  for (std::size_t c = 0; c < 6; ++c) out(0, c) = out(1, c);
  for (std::size_t t = 1; t + 1 < T; ++t) {
    const kin::Vec3 a = (pos[t + 1] - 2.0 * pos[t] + pos[t - 1]) * fps2 + kin::Vec3(0.0, 0.0, kGravity);
    for (int c = 0; c < 3; ++c) out(t, 6 + static_cast<std::size_t>(c)) = a[c];
  }
  for (std::size_t c = 6; c < 9; ++c) {
    out(0, c) = out(1, c);
    out(T - 1, c) = out(T - 2, c);
  }
  return out;
}

}  // namespace golfsig::data
