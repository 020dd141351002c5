#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "golfsig/kin/rotation.hpp"

namespace golfsig::kin {

struct Dof {
  std::string name;
  Vec3 axis;
  double lower = 0.0;
  double upper = 0.0;
};

struct Body {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();
  std::string joint;
  /// Ordered rotation axes of the joint to the parent; the local rotation is
  /// the product Rot(a0, q0) * Rot(a1, q1) * ... Axes must be mutually
  /// orthogonal and, for three axes, right-handed (a2 = a0 x a1).
  std::vector<Dof> dofs;
};

struct BodyPart {
  std::string name;
  std::vector<std::size_t> bodies;
};

inline constexpr std::size_t kBodies = 26;
inline constexpr std::size_t kDofs = 52;
inline constexpr std::size_t kPoseWidth = 6 * kBodies;
inline constexpr std::size_t kParts = 5;

/// Kinematic tree. Bodies are stored in body-part order so each part owns a
/// contiguous channel range of the pose vector.
class Skeleton {
 public:
  Skeleton(std::vector<Body> bodies, std::vector<BodyPart> parts);

  /// Neutral adult proportions, Z up, facing +x, arms hanging.
  static Skeleton default_skeleton();
  static Skeleton from_json_string(const std::string& text);
  static Skeleton load(const std::filesystem::path& path);
  std::string to_json_string() const;

  std::size_t body_count() const { return bodies_.size(); }
  std::size_t dof_count() const { return dof_count_; }
  std::size_t pose_width() const { return 6 * bodies_.size(); }
  const Body& body(std::size_t i) const { return bodies_[i]; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<BodyPart>& parts() const { return parts_; }
  std::size_t root() const { return root_; }
  /// Parents before children.
  const std::vector<std::size_t>& topological_order() const { return order_; }
  std::size_t first_dof(std::size_t body) const { return dof_start_[body]; }
  const Dof& dof(std::size_t i) const;
  std::size_t index_of(const std::string& body_name) const;
  std::size_t dof_index(const std::string& dof_name) const;
  /// (first channel, width) of each part in the 156-wide pose vector.
  std::vector<std::pair<std::size_t, std::size_t>> part_slices() const;

 private:
  void validate();

  std::vector<Body> bodies_;
  std::vector<BodyPart> parts_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> dof_start_;
  std::size_t dof_count_ = 0;
  std::size_t root_ = 0;
};

}  // namespace golfsig::kin
