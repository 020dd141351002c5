#include "golfsig/kin/rotation.hpp"

#include <algorithm>
#include <cmath>

#include "golfsig/util/error.hpp"

namespace golfsig::kin {

Mat3 sixd_to_rotmat(const double* six) {
  Vec3 a(six[0], six[1], six[2]);
  Vec3 b(six[3], six[4], six[5]);
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("6D rotation has a zero column");
  // sin of the angle between the columns
  if (a.cross(b).norm() / (na * nb) <= 1e-6) throw ValidationError("6D rotation columns are parallel");
  Vec3 c0 = a / na;
  Vec3 c1 = b - c0.dot(b) * c0;
  c1.normalize();
  Mat3 r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return r;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

void write_sixd(const Mat3& r, double* out) {
  for (int i = 0; i < 3; ++i) {
    out[i] = r(i, 0);
    out[3 + i] = r(i, 1);
  }
}

Sixd rotmat_to_sixd(const Mat3& r, double tol) {
  if (!is_rotation(r, tol)) throw ValidationError("matrix is not a rotation");
  Sixd s;
  write_sixd(r, s.data());
  return s;
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace golfsig::kin
