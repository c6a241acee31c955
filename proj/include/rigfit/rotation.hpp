#pragma once

#include "rigfit/types.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace rigfit {

/// Below this norm an axis-angle vector is the identity.
inline constexpr double kAngleEpsilon = 1e-12;
/// Input vectors shorter than this cannot define a direction.
inline constexpr double kDirectionEpsilon = 1e-9;

bool is_rotation(const Mat3& m, double tolerance = 1e-9);

/// Rodrigues formula; series-safe for tiny angles.
Mat3 axis_angle_to_matrix(const Vec3& theta);

/// Inverse of axis_angle_to_matrix with |theta| in [0, pi]. At exactly pi the
/// axis sign is chosen so its first nonzero component is positive.
/// Throws ValidationError if `r` is not a proper rotation (tolerance 1e-6).
Vec3 matrix_to_axis_angle(const Mat3& r);

/// Wraps the angle into [0, pi] by flipping the axis; tiny angles collapse to zero.
Vec3 canonicalize_axis_angle(const Vec3& theta);

/// Right Jacobian of the SO(3) exponential: exp(theta + d) ~= exp(theta) exp(Jr(theta) d).
Mat3 so3_right_jacobian(const Vec3& theta);

Mat3 skew(const Vec3& v);

/// Minimal-angle rotation taking the direction of `a` onto the direction of `b`.
/// Antiparallel inputs rotate by pi about a x e_k, where e_k is the basis vector
/// along the smallest |component| of a (lowest index on ties).
/// Throws ValidationError if either input is shorter than kDirectionEpsilon.
Mat3 rotation_between_vectors(const Vec3& a, const Vec3& b);

struct ProcrustesResult {
  Mat3 rotation = Mat3::Identity();
  // Set when the weighted cross-covariance vanished and identity was returned.
  bool degenerate = false;
};

/// argmin over SO(3) of sum_k w_k |R rest_k - obs_k|^2 (Kabsch with sign correction).
/// A single pair reduces to rotation_between_vectors. Empty `weights` means uniform.
ProcrustesResult orthogonal_procrustes(
    std::span<const Vec3> rest_dirs,
    std::span<const Vec3> obs_dirs,
    std::span<const double> weights = {});

/// Intrinsic Euler orders as they appear on a BVH CHANNELS line.
enum class EulerOrder { XYZ, XZY, YXZ, YZX, ZXY, ZYX };

inline constexpr EulerOrder kAllEulerOrders[] = {
    EulerOrder::XYZ,
    EulerOrder::XZY,
    EulerOrder::YXZ,
    EulerOrder::YZX,
    EulerOrder::ZXY,
    EulerOrder::ZYX,
};

std::string_view to_string(EulerOrder order);
std::optional<EulerOrder> parse_euler_order(std::string_view text);

/// Axis index (0=x, 1=y, 2=z) of the k-th rotation in `order`.
int euler_axis(EulerOrder order, int k);

/// R = R_a(angles[0]) * R_b(angles[1]) * R_c(angles[2]) for order "abc"; radians.
Mat3 euler_to_matrix(const Vec3& angles, EulerOrder order);

/// Inverse of euler_to_matrix. The middle angle lies in [-pi/2, pi/2]; at gimbal
/// lock the last angle is set to zero and the first absorbs the remaining freedom.
Vec3 matrix_to_euler(const Mat3& r, EulerOrder order);

} // namespace rigfit
