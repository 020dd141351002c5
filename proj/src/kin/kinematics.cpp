#include "golfsig/kin/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "golfsig/util/error.hpp"

namespace golfsig::kin {

namespace {

// Right-handed orthonormal frame whose leading columns are the joint axes.
Mat3 joint_basis(const Body& body) {
  Mat3 b;
  const Vec3 a0 = body.dofs[0].axis;
  Vec3 a1;
  if (body.dofs.size() >= 2) {
    a1 = body.dofs[1].axis;
  } else {
    const Vec3 probe = std::abs(a0.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    a1 = a0.cross(probe).normalized();
  }
  b.col(0) = a0;
  b.col(1) = a1;
  b.col(2) = a0.cross(a1);
  return b;
}

// m = Rx(a) Ry(b) Rz(c)
Vec3 euler_xyz(const Mat3& m) {
  const double b = std::asin(std::clamp(m(0, 2), -1.0, 1.0));
  const double a = std::atan2(-m(1, 2), m(2, 2));
  const double c = std::atan2(-m(0, 1), m(0, 0));
  return Vec3(a, b, c);
}

void check_pose(const nn::NDArray& pose, const char* what) {
  if (pose.ndim() != 2 || pose.cols() != kPoseWidth)
    throw ValidationError(std::string(what) + ": pose must be T x 156, got " + nn::shape_string(pose.shape()));
}

}  // namespace

Mat3 joint_rotation(const Body& body, const double* angles) {
  Mat3 r = Mat3::Identity();
  for (std::size_t i = 0; i < body.dofs.size(); ++i) r = r * axis_angle(body.dofs[i].axis, angles[i]);
  return r;
}

std::vector<Mat3> compose_global(const Skeleton& skeleton, std::span<const double> angles) {
  if (angles.size() != skeleton.dof_count()) throw ValidationError("joint angle vector must have 52 entries");
  std::vector<Mat3> g(skeleton.body_count());
  for (auto i : skeleton.topological_order()) {
    const auto& b = skeleton.body(i);
    const Mat3 local = joint_rotation(b, angles.data() + skeleton.first_dof(i));
    g[i] = b.parent < 0 ? local : Mat3(g[static_cast<std::size_t>(b.parent)] * local);
  }
  return g;
}

std::vector<Mat3> decode_pose_row(std::span<const double> row) {
  std::vector<Mat3> out(row.size() / 6);
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = sixd_to_rotmat(row.data() + 6 * b);
  return out;
}

void encode_pose_row(const std::vector<Mat3>& rotations, std::span<double> row) {
  for (std::size_t b = 0; b < rotations.size(); ++b) write_sixd(rotations[b], row.data() + 6 * b);
}

std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const std::vector<Mat3>& globals, const Vec3& root) {
  if (globals.size() != skeleton.body_count()) throw ValidationError("forward kinematics needs one rotation per body");
  std::vector<Vec3> p(skeleton.body_count());
  for (auto i : skeleton.topological_order()) {
    const auto& b = skeleton.body(i);
    if (b.parent < 0) {
      p[i] = root;
    } else {
      const auto parent = static_cast<std::size_t>(b.parent);
      p[i] = p[parent] + globals[parent] * b.offset;
    }
  }
  return p;
}

nn::NDArray sequence_positions(const Skeleton& skeleton, const nn::NDArray& pose) {
  check_pose(pose, "positions");
  const std::size_t T = pose.rows(), J = skeleton.body_count();
  nn::NDArray out({T * J, 3});
  for (std::size_t t = 0; t < T; ++t) {
    const auto p = forward_kinematics(skeleton, decode_pose_row(pose.row(t)));
    for (std::size_t j = 0; j < J; ++j)
      for (int c = 0; c < 3; ++c) out(t * J + j, static_cast<std::size_t>(c)) = p[j][c];
  }
  return out;
}

JointAngleFrame orientations_to_joint_angles(const Skeleton& skeleton, const std::vector<Mat3>& globals) {
  if (globals.size() != skeleton.body_count()) throw ValidationError("joint angles need one rotation per body");
  JointAngleFrame f;
  f.angles.assign(skeleton.dof_count(), 0.0);
  for (std::size_t i = 0; i < skeleton.body_count(); ++i) {
    const auto& b = skeleton.body(i);
    if (b.dofs.empty()) continue;
    const Mat3 local =
        b.parent < 0 ? globals[i] : Mat3(globals[static_cast<std::size_t>(b.parent)].transpose() * globals[i]);
    const Mat3 basis = joint_basis(b);
    const Vec3 e = euler_xyz(basis.transpose() * local * basis);
    if (b.dofs.size() == 3 && std::abs(std::abs(e[1]) - std::numbers::pi / 2) < 1e-3) f.gimbal = true;
    double* q = f.angles.data() + skeleton.first_dof(i);
    for (std::size_t k = 0; k < b.dofs.size(); ++k) {
      const auto& d = b.dofs[k];
      q[k] = e[static_cast<Eigen::Index>(k)];
      if (q[k] < d.lower || q[k] > d.upper) {
        q[k] = std::clamp(q[k], d.lower, d.upper);
        ++f.clamped;
      }
    }
    f.residual = std::max(f.residual, geodesic_angle(local, joint_rotation(b, q)));
  }
  return f;
}

JointAngleSequence extract_joint_angles(const Skeleton& skeleton, const nn::NDArray& pose) {
  check_pose(pose, "joint angles");
  JointAngleSequence s;
  s.angles = nn::NDArray({pose.rows(), skeleton.dof_count()});
  for (std::size_t t = 0; t < pose.rows(); ++t) {
    auto f = orientations_to_joint_angles(skeleton, decode_pose_row(pose.row(t)));
    std::copy(f.angles.begin(), f.angles.end(), s.angles.row(t).begin());
    s.residual.push_back(f.residual);
    s.clamped += f.clamped;
    if (f.gimbal) ++s.gimbal_frames;
  }
  return s;
}

nn::NDArray angles_to_pose(const Skeleton& skeleton, const nn::NDArray& angles) {
  if (angles.ndim() != 2 || angles.cols() != skeleton.dof_count())
    throw ValidationError("joint angles must be T x 52, got " + nn::shape_string(angles.shape()));
  nn::NDArray pose({angles.rows(), skeleton.pose_width()});
  for (std::size_t t = 0; t < angles.rows(); ++t)
    encode_pose_row(compose_global(skeleton, angles.row(t)), pose.row(t));
  return pose;
}

Alignment parse_alignment(const std::string& name) {
  if (name == "root") return Alignment::root;
  if (name == "procrustes") return Alignment::procrustes;
  throw ConfigError("unknown alignment '" + name + "' (expected root or procrustes)");
}

double mean_joint_distance_cm(const nn::NDArray& a, const nn::NDArray& b) {
  if (a.shape() != b.shape() || a.cols() != 3)
    throw ValidationError("position arrays differ in shape: " + nn::shape_string(a.shape()) + " vs " +
                          nn::shape_string(b.shape()));
  if (a.rows() == 0) throw ValidationError("empty position arrays");
  double sum = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double dx = a(r, 0) - b(r, 0), dy = a(r, 1) - b(r, 1), dz = a(r, 2) - b(r, 2);
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return 100.0 * sum / static_cast<double>(a.rows());
}

double mpjpe(const nn::NDArray& pred, const nn::NDArray& gt, const Skeleton& skeleton, Alignment alignment) {
  check_pose(pred, "mpjpe");
  check_pose(gt, "mpjpe");
  if (pred.rows() != gt.rows())
    throw ValidationError("mpjpe: sequence lengths differ (" + std::to_string(pred.rows()) + " vs " +
                          std::to_string(gt.rows()) + ")");
  nn::NDArray a = sequence_positions(skeleton, pred);
  const nn::NDArray b = sequence_positions(skeleton, gt);
  if (alignment == Alignment::procrustes) {
    // Per-frame rigid (rotation + translation) alignment of pred onto gt.
    const std::size_t J = skeleton.body_count();
    for (std::size_t t = 0; t < pred.rows(); ++t) {
      Eigen::Matrix3Xd x(3, J), y(3, J);
      for (std::size_t j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) {
          x(c, static_cast<Eigen::Index>(j)) = a(t * J + j, static_cast<std::size_t>(c));
          y(c, static_cast<Eigen::Index>(j)) = b(t * J + j, static_cast<std::size_t>(c));
        }
      const Eigen::Matrix4d m = Eigen::umeyama(x, y, false);
      const Eigen::Matrix3Xd z = (m.topLeftCorner<3, 3>() * x).colwise() + m.topRightCorner<3, 1>();
      for (std::size_t j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) a(t * J + j, static_cast<std::size_t>(c)) = z(c, static_cast<Eigen::Index>(j));
    }
  }
  return mean_joint_distance_cm(a, b);
}

double mpjre(const nn::NDArray& pred, const nn::NDArray& gt) {
  if (pred.shape() != gt.shape())
    throw ValidationError("mpjre: shapes differ: " + nn::shape_string(pred.shape()) + " vs " +
                          nn::shape_string(gt.shape()));
  if (pred.size() == 0) throw ValidationError("mpjre: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = std::fmod(std::abs(pred[i] - gt[i]), 2.0 * std::numbers::pi);
    sum += std::min(d, 2.0 * std::numbers::pi - d);
  }
  return sum / static_cast<double>(pred.size()) * 180.0 / std::numbers::pi;
}

}  // namespace golfsig::kin
