#pragma once

#include <Eigen/Dense>
#include <array>

#include "golfsig/util/random.hpp"

namespace golfsig::kin {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// First two columns of a rotation matrix: (c0x, c0y, c0z, c1x, c1y, c1z).
using Sixd = std::array<double, 6>;

inline constexpr Sixd kIdentitySixd{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

/// Gram-Schmidt decoding. Throws ValidationError when the two columns are
/// (nearly) parallel or zero.
Mat3 sixd_to_rotmat(const double* six);
inline Mat3 sixd_to_rotmat(const Sixd& six) { return sixd_to_rotmat(six.data()); }

/// Throws ValidationError unless R is orthonormal with det +1 to `tol`.
Sixd rotmat_to_sixd(const Mat3& r, double tol = 1e-6);
void write_sixd(const Mat3& r, double* out);

double geodesic_angle(const Mat3& a, const Mat3& b);

Mat3 axis_angle(const Vec3& axis, double angle);
/// Uniform on SO(3) (random unit quaternion).
Mat3 random_rotation(Rng& rng);

bool is_rotation(const Mat3& r, double tol);

}  // namespace golfsig::kin
