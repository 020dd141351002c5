#pragma once

#include <optional>
#include <span>
#include <vector>

#include "golfsig/kin/skeleton.hpp"
#include "golfsig/nn/ndarray.hpp"

namespace golfsig::kin {

/// Per-frame global 6D orientations of every body (T x 156).
struct MotionSequence {
  nn::NDArray pose;
  std::optional<nn::NDArray> root;  // T x 3, meters
  double fps = 30.0;

  std::size_t frames() const { return pose.rows(); }
};

/// Local rotation of `body`'s joint for its DOF angles.
Mat3 joint_rotation(const Body& body, const double* angles);

/// Global orientations from a 52-vector of joint angles.
std::vector<Mat3> compose_global(const Skeleton& skeleton, std::span<const double> angles);

std::vector<Mat3> decode_pose_row(std::span<const double> row);
void encode_pose_row(const std::vector<Mat3>& rotations, std::span<double> row);

/// Body origin positions in meters.
std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const std::vector<Mat3>& globals,
                                     const Vec3& root = Vec3::Zero());

/// Positions for a whole pose sequence: (T*26) x 3, root at the origin.
nn::NDArray sequence_positions(const Skeleton& skeleton, const nn::NDArray& pose);

struct JointAngleFrame {
  std::vector<double> angles;
  double residual = 0.0;  // largest unexplained joint rotation, radians
  std::size_t clamped = 0;
  bool gimbal = false;
};

JointAngleFrame orientations_to_joint_angles(const Skeleton& skeleton, const std::vector<Mat3>& globals);

struct JointAngleSequence {
  nn::NDArray angles;  // T x 52
  std::vector<double> residual;
  std::size_t clamped = 0;
  std::size_t gimbal_frames = 0;
};

JointAngleSequence extract_joint_angles(const Skeleton& skeleton, const nn::NDArray& pose);

/// T x 52 joint angles to T x 156 global 6D orientations.
nn::NDArray angles_to_pose(const Skeleton& skeleton, const nn::NDArray& angles);

enum class Alignment { root, procrustes };

Alignment parse_alignment(const std::string& name);

/// Mean Euclidean distance in centimeters between two (N*J) x 3 position
/// arrays given in meters.
double mean_joint_distance_cm(const nn::NDArray& a, const nn::NDArray& b);

/// MPJPE in centimeters between two pose sequences.
double mpjpe(const nn::NDArray& pred, const nn::NDArray& gt, const Skeleton& skeleton,
             Alignment alignment = Alignment::root);

/// Mean absolute joint angle error in degrees with wrap-around at +-pi.
double mpjre(const nn::NDArray& pred, const nn::NDArray& gt);

}  // namespace golfsig::kin
