#include "rigfit/rotation.hpp"

#include "rigfit/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rigfit {

namespace {

constexpr double kPi = std::numbers::pi;

// Angles below this use Taylor expansions of the Rodrigues coefficients.
constexpr double kSeriesThreshold = 1e-4;

// Past this angle the skew part is too small to give an accurate axis.
constexpr double kNearPi = kPi - 1e-3;

Vec3 positive_first_nonzero(Vec3 axis) {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(axis[k]) > 1e-12) {
      return axis[k] < 0.0 ? Vec3(-axis) : axis;
    }
  }
  return axis;
}

Mat3 basis_rotation(int axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r = Mat3::Identity();
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  r(a, a) = c;
  r(a, b) = -s;
  r(b, a) = s;
  r(b, b) = c;
  return r;
}

} // namespace

bool is_rotation(const Mat3& m, double tolerance) {
  if (!m.allFinite()) {
    return false;
  }
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(m.determinant() - 1.0) <= tolerance;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 axis_angle_to_matrix(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  double a;
  double b;
  if (angle < kSeriesThreshold) {
    a = 1.0 - angle2 / 6.0;
    b = 0.5 - angle2 / 24.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / angle2;
  }
  const Mat3 k = skew(theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 matrix_to_axis_angle(const Mat3& r) {
  if (!is_rotation(r, 1e-6)) {
    throw ValidationError("matrix_to_axis_angle: input is not a proper rotation");
  }
  const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_angle = 0.5 * v.norm();
  const double cos_angle = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);

  if (angle < kAngleEpsilon) {
    return Vec3::Zero();
  }
  if (angle < kNearPi) {
    return v * (angle / (2.0 * sin_angle));
  }

  // Near pi: (R + R^T)/2 = cos I + (1 - cos) a a^T; read the axis off the
  // dominant diagonal column.
  const Mat3 sym = 0.5 * (r + r.transpose());
  const double one_minus_cos = 1.0 - cos_angle;
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (sym(i, i) > sym(k, k)) {
      k = i;
    }
  }
  Vec3 axis;
  axis[k] = std::sqrt(std::max(0.0, (sym(k, k) - cos_angle) / one_minus_cos));
  for (int i = 0; i < 3; ++i) {
    if (i != k) {
      axis[i] = sym(k, i) / (one_minus_cos * axis[k]);
    }
  }
  axis.normalize();
  if (sin_angle > 1e-12) {
    if (axis.dot(v) < 0.0) {
      axis = -axis;
    }
  } else {
    axis = positive_first_nonzero(axis);
  }
  return axis * angle;
}

Vec3 canonicalize_axis_angle(const Vec3& theta) {
  const double angle = theta.norm();
  if (!(angle >= kAngleEpsilon)) {
    return Vec3::Zero();
  }
  Vec3 axis = theta / angle;
  double wrapped = std::remainder(angle, 2.0 * kPi); // [-pi, pi]
  if (wrapped < 0.0) {
    wrapped = -wrapped;
    axis = -axis;
  }
  if (wrapped < kAngleEpsilon) {
    return Vec3::Zero();
  }
  if (wrapped >= kPi) {
    axis = positive_first_nonzero(axis);
    wrapped = kPi;
  }
  return axis * wrapped;
}

Mat3 so3_right_jacobian(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  double a;
  double b;
  if (angle < kSeriesThreshold) {
    a = 0.5 - angle2 / 24.0;
    b = 1.0 / 6.0 - angle2 / 120.0;
  } else {
    a = (1.0 - std::cos(angle)) / angle2;
    b = (angle - std::sin(angle)) / (angle2 * angle);
  }
  const Mat3 k = skew(theta);
  return Mat3::Identity() - a * k + b * k * k;
}

Mat3 rotation_between_vectors(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > kDirectionEpsilon) || !(nb > kDirectionEpsilon)) {
    throw ValidationError("rotation_between_vectors: degenerate input vector");
  }
  const Vec3 ua = a / na;
  const Vec3 ub = b / nb;
  const Vec3 c = ua.cross(ub);
  const double s = c.norm();
  const double d = ua.dot(ub);
  if (s > kAngleEpsilon) {
    return axis_angle_to_matrix(c * (std::atan2(s, d) / s));
  }
  if (d > 0.0) {
    return Mat3::Identity();
  }
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(ua[i]) < std::abs(ua[k])) {
      k = i;
    }
  }
  const Vec3 axis = ua.cross(Vec3::Unit(k)).normalized();
  return axis_angle_to_matrix(axis * kPi);
}

ProcrustesResult orthogonal_procrustes(
    std::span<const Vec3> rest_dirs,
    std::span<const Vec3> obs_dirs,
    std::span<const double> weights) {
  if (rest_dirs.size() != obs_dirs.size() || rest_dirs.empty()) {
    throw ValidationError("orthogonal_procrustes: direction lists must be non-empty and equal length");
  }
  if (!weights.empty() && weights.size() != rest_dirs.size()) {
    throw ValidationError("orthogonal_procrustes: weight count does not match directions");
  }

  ProcrustesResult out;
  if (rest_dirs.size() == 1) {
    if (rest_dirs[0].norm() <= kDirectionEpsilon || obs_dirs[0].norm() <= kDirectionEpsilon) {
      out.degenerate = true;
      return out;
    }
    out.rotation = rotation_between_vectors(rest_dirs[0], obs_dirs[0]);
    return out;
  }

  Mat3 cov = Mat3::Zero();
  for (std::size_t k = 0; k < rest_dirs.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    cov += w * obs_dirs[k] * rest_dirs[k].transpose();
  }
  if (cov.cwiseAbs().maxCoeff() < 1e-15) {
    out.degenerate = true;
    return out;
  }

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  out.rotation = u * d * v.transpose();
  return out;
}

std::string_view to_string(EulerOrder order) {
  switch (order) {
    case EulerOrder::XYZ:
      return "XYZ";
    case EulerOrder::XZY:
      return "XZY";
    case EulerOrder::YXZ:
      return "YXZ";
    case EulerOrder::YZX:
      return "YZX";
    case EulerOrder::ZXY:
      return "ZXY";
    case EulerOrder::ZYX:
      return "ZYX";
  }
  return "ZXY";
}

std::optional<EulerOrder> parse_euler_order(std::string_view text) {
  for (EulerOrder order : kAllEulerOrders) {
    if (to_string(order) == text) {
      return order;
    }
  }
  return std::nullopt;
}

int euler_axis(EulerOrder order, int k) {
  return to_string(order)[k] - 'X';
}

Mat3 euler_to_matrix(const Vec3& angles, EulerOrder order) {
  return basis_rotation(euler_axis(order, 0), angles[0]) *
      basis_rotation(euler_axis(order, 1), angles[1]) *
      basis_rotation(euler_axis(order, 2), angles[2]);
}

Vec3 matrix_to_euler(const Mat3& r, EulerOrder order) {
  const int i = euler_axis(order, 0);
  const int j = euler_axis(order, 1);
  const int k = euler_axis(order, 2);
  // +1 for cyclic orders (XYZ, YZX, ZXY), -1 otherwise.
  const double s = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;

  const double cos_middle = std::hypot(r(i, i), r(i, j));
  const double middle = std::atan2(s * r(i, k), cos_middle);
  if (cos_middle > 1e-10) {
    const double first = std::atan2(-s * r(j, k), r(k, k));
    const double last = std::atan2(-s * r(i, j), r(i, i));
    return {first, middle, last};
  }
  const double first = std::atan2(s * r(k, j), r(j, j));
  return {first, middle, 0.0};
}

} // namespace rigfit
