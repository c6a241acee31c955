#pragma once

#include "rigfit/skeleton.hpp"

#include <span>
#include <vector>

namespace rigfit {

/// Mean Euclidean joint error over frames and joints valid in both inputs.
/// Throws ValidationError on a shape mismatch.
double mpjpe(const JointTrajectory& pred, const JointTrajectory& gt);

/// Mean norm of the velocity difference, velocities being first differences
/// times the ground-truth fps. Zero for single-frame inputs.
double mpjve(const JointTrajectory& pred, const JointTrajectory& gt);

/// Sum of absolute coordinate errors per valid joint, averaged over valid
/// (frame, joint) pairs.
double masked_l1_loss(const JointTrajectory& pred, const JointTrajectory& gt, const std::vector<bool>& mask);

struct SegmentProjection {
  double distance;
  // Clipped segment parameter in [0, 1].
  double t;
  Vec3 closest;
};

SegmentProjection point_to_segment_distance(const Vec3& p, const Vec3& b1, const Vec3& b2);

/// Joint positions plus the parent array that turns them into bone segments.
struct SkeletonInstance {
  Vec3List positions;
  std::vector<int> parents;

  /// Throws ValidationError unless the parents form a single tree over finite positions.
  void check() const;
};

/// Mean over joints of `a` of the distance to the nearest bone segment of `b`.
/// Joint counts may differ. Throws ValidationError when `b` has no segment.
double cd_skeleton_directed(const SkeletonInstance& a, const SkeletonInstance& b);

/// Symmetric average of both directed distances.
double cd_skeleton(const SkeletonInstance& a, const SkeletonInstance& b);

struct SequenceScore {
  std::vector<double> per_frame;
  double mean = 0.0;
};

SequenceScore cd_skeleton_sequence(
    const JointTrajectory& pred,
    std::span<const int> pred_parents,
    const JointTrajectory& gt,
    std::span<const int> gt_parents);

/// Poses `pred` through FK on `skeleton` first.
SequenceScore cd_skeleton_sequence(
    const Skeleton& skeleton,
    const AnimationClip& pred,
    const JointTrajectory& gt,
    std::span<const int> gt_parents);

} // namespace rigfit
