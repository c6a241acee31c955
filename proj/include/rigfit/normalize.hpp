#pragma once

#include "rigfit/bvh.hpp"
#include "rigfit/skeleton.hpp"

#include <span>

namespace rigfit {

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const {
    return max - min;
  }
  Vec3 center() const {
    return 0.5 * (min + max);
  }
  double max_extent() const {
    return extent().maxCoeff();
  }
};

/// Throws ValidationError for an empty point set.
Aabb bounding_box(std::span<const Vec3> points);

/// Box over every mask-valid joint of every frame.
Aabb trajectory_bounds(const JointTrajectory& trajectory);

/// Uniform map x -> (x - center) * scale.
struct NormalizationTransform {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& x) const {
    return (x - center) * scale;
  }
  Vec3 invert(const Vec3& y) const {
    return y / scale + center;
  }
  bool is_identity(double tolerance = 1e-12) const;
};

struct RestNormalization {
  Skeleton skeleton;
  NormalizationTransform transform;
};

/// Rescales offsets so the rest-pose box (joints plus `extra_rest_points`) has
/// a longest side of 1. The root stays at the origin, so `center` is zero.
/// Throws ValidationError when the rest pose has zero extent.
RestNormalization rest_normalize(const Skeleton& skeleton, std::span<const Vec3> extra_rest_points = {});

/// rest_normalize() with End Sites included in the box; end-site offsets are rescaled too.
BvhDocument rest_normalize(const BvhDocument& document, NormalizationTransform* transform = nullptr);

Vec3List end_site_rest_positions(const BvhDocument& document);

struct TranslationRemoval {
  JointTrajectory trajectory;
  Vec3List root_positions;
};

/// Subtracts the root joint's position from every joint, frame by frame.
TranslationRemoval remove_global_translation(const JointTrajectory& trajectory, std::size_t root = 0);

JointTrajectory reattach_global_translation(const JointTrajectory& trajectory, std::span<const Vec3> root_positions);

struct SequenceNormalization {
  JointTrajectory trajectory;
  NormalizationTransform transform;
};

/// Centers the all-frame box of valid joints and scales its longest side to 2,
/// so valid coordinates land in [-1, 1]^3. Throws ValidationError on zero extent.
SequenceNormalization sequence_normalize(const JointTrajectory& trajectory);

JointTrajectory apply_transform(const JointTrajectory& trajectory, const NormalizationTransform& transform);
JointTrajectory denormalize(const JointTrajectory& trajectory, const NormalizationTransform& transform);

/// Translation removal followed by sequence scaling, with what is needed to undo both.
struct NormalizedSequence {
  JointTrajectory trajectory;
  NormalizationTransform transform;
  Vec3List root_positions;
};

NormalizedSequence normalize_sequence(const JointTrajectory& trajectory, std::size_t root = 0);
JointTrajectory denormalize_sequence(const NormalizedSequence& normalized);

} // namespace rigfit
