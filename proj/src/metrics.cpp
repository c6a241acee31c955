#include "rigfit/metrics.hpp"

#include <algorithm>
#include <limits>

namespace rigfit {

namespace {

void check_same_shape(const JointTrajectory& pred, const JointTrajectory& gt) {
  if (pred.frame_count() != gt.frame_count() || pred.joint_count() != gt.joint_count()) {
    throw ValidationError(
        "trajectory shapes differ: " + std::to_string(pred.frame_count()) + "x" +
        std::to_string(pred.joint_count()) + " vs " + std::to_string(gt.frame_count()) + "x" +
        std::to_string(gt.joint_count()));
  }
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    if (pred.frames[t].size() != pred.joint_count() || gt.frames[t].size() != gt.joint_count()) {
      throw ValidationError("trajectory frame " + std::to_string(t) + " is ragged");
    }
  }
}

std::vector<bool> joint_mask(const JointTrajectory& pred, const JointTrajectory& gt) {
  std::vector<bool> mask(gt.joint_count());
  for (std::size_t j = 0; j < mask.size(); ++j) {
    mask[j] = pred.mask[j] && gt.mask[j];
  }
  return mask;
}

std::size_t count_true(const std::vector<bool>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

} // namespace

double mpjpe(const JointTrajectory& pred, const JointTrajectory& gt) {
  check_same_shape(pred, gt);
  const std::vector<bool> mask = joint_mask(pred, gt);
  const std::size_t valid = count_true(mask);
  if (valid == 0 || gt.frame_count() == 0) {
    throw ValidationError("mpjpe: no valid joint to compare");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (mask[j]) {
        sum += (pred.frames[t][j] - gt.frames[t][j]).norm();
      }
    }
  }
  return sum / static_cast<double>(valid * gt.frame_count());
}

double mpjve(const JointTrajectory& pred, const JointTrajectory& gt) {
  check_same_shape(pred, gt);
  const std::vector<bool> mask = joint_mask(pred, gt);
  const std::size_t valid = count_true(mask);
  if (valid == 0) {
    throw ValidationError("mpjve: no valid joint to compare");
  }
  if (gt.frame_count() < 2) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < gt.frame_count(); ++t) {
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (!mask[j]) {
        continue;
      }
      const Vec3 v_pred = (pred.frames[t + 1][j] - pred.frames[t][j]) * gt.fps;
      const Vec3 v_gt = (gt.frames[t + 1][j] - gt.frames[t][j]) * gt.fps;
      sum += (v_pred - v_gt).norm();
    }
  }
  return sum / static_cast<double>(valid * (gt.frame_count() - 1));
}

double masked_l1_loss(const JointTrajectory& pred, const JointTrajectory& gt, const std::vector<bool>& mask) {
  check_same_shape(pred, gt);
  if (mask.size() != gt.joint_count()) {
    throw ValidationError("masked_l1_loss: mask length does not match the joint count");
  }
  const std::size_t valid = count_true(mask);
  if (valid == 0 || gt.frame_count() == 0) {
    throw ValidationError("masked_l1_loss: mask selects nothing");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (mask[j]) {
        sum += (pred.frames[t][j] - gt.frames[t][j]).lpNorm<1>();
      }
    }
  }
  return sum / static_cast<double>(valid * gt.frame_count());
}

SegmentProjection point_to_segment_distance(const Vec3& p, const Vec3& b1, const Vec3& b2) {
  const Vec3 d = b2 - b1;
  const double len2 = d.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp((p - b1).dot(d) / len2, 0.0, 1.0);
  }
  const Vec3 closest = b1 + t * d;
  return {(p - closest).norm(), t, closest};
}

void SkeletonInstance::check() const {
  if (positions.size() != parents.size()) {
    throw ValidationError("skeleton instance: positions and parents differ in length");
  }
  const auto issues = check_parents(parents);
  if (!issues.empty()) {
    throw SkeletonError(issues);
  }
  for (const Vec3& p : positions) {
    if (!p.allFinite()) {
      throw ValidationError("skeleton instance has a non-finite joint position");
    }
  }
}

double cd_skeleton_directed(const SkeletonInstance& a, const SkeletonInstance& b) {
  a.check();
  b.check();
  const std::vector<BoneSegment> segments = bone_segments(std::span<const int>(b.parents), b.positions);
  if (segments.empty()) {
    throw ValidationError("CD-Skeleton target has a single joint and no bone segments");
  }
  double sum = 0.0;
  for (const Vec3& x : a.positions) {
    double best = std::numeric_limits<double>::infinity();
    for (const BoneSegment& s : segments) {
      best = std::min(best, point_to_segment_distance(x, s.parent, s.child).distance);
    }
    sum += best;
  }
  return sum / static_cast<double>(a.positions.size());
}

double cd_skeleton(const SkeletonInstance& a, const SkeletonInstance& b) {
  return 0.5 * (cd_skeleton_directed(a, b) + cd_skeleton_directed(b, a));
}

SequenceScore cd_skeleton_sequence(
    const JointTrajectory& pred,
    std::span<const int> pred_parents,
    const JointTrajectory& gt,
    std::span<const int> gt_parents) {
  if (pred.frame_count() != gt.frame_count()) {
    throw ValidationError(
        "frame counts differ: " + std::to_string(pred.frame_count()) + " vs " +
        std::to_string(gt.frame_count()));
  }
  SequenceScore score;
  score.per_frame.reserve(gt.frame_count());
  const std::vector<int> pp(pred_parents.begin(), pred_parents.end());
  const std::vector<int> gp(gt_parents.begin(), gt_parents.end());
  for (std::size_t t = 0; t < gt.frame_count(); ++t) {
    const SkeletonInstance a{pred.frames[t], pp};
    const SkeletonInstance b{gt.frames[t], gp};
    score.per_frame.push_back(cd_skeleton(a, b));
  }
  double sum = 0.0;
  for (double v : score.per_frame) {
    sum += v;
  }
  score.mean = score.per_frame.empty() ? 0.0 : sum / static_cast<double>(score.per_frame.size());
  return score;
}

SequenceScore cd_skeleton_sequence(
    const Skeleton& skeleton,
    const AnimationClip& pred,
    const JointTrajectory& gt,
    std::span<const int> gt_parents) {
  return cd_skeleton_sequence(fk_sequence(skeleton, pred), skeleton.parents(), gt, gt_parents);
}

} // namespace rigfit
