#include "rigfit/normalize.hpp"

#include <cmath>

namespace rigfit {

namespace {

constexpr double kMinExtent = 1e-12;

} // namespace

Aabb bounding_box(std::span<const Vec3> points) {
  if (points.empty()) {
    throw ValidationError("bounding box of an empty point set");
  }
  Aabb box{points[0], points[0]};
  for (const Vec3& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

Aabb trajectory_bounds(const JointTrajectory& trajectory) {
  Vec3List points;
  for (const auto& frame : trajectory.frames) {
    for (std::size_t j = 0; j < trajectory.mask.size(); ++j) {
      if (trajectory.mask[j]) {
        points.push_back(frame.at(j));
      }
    }
  }
  return bounding_box(points);
}

bool NormalizationTransform::is_identity(double tolerance) const {
  return center.cwiseAbs().maxCoeff() <= tolerance && std::abs(scale - 1.0) <= tolerance;
}

RestNormalization rest_normalize(const Skeleton& skeleton, std::span<const Vec3> extra_rest_points) {
  Vec3List points = rest_pose_positions(skeleton);
  points.insert(points.end(), extra_rest_points.begin(), extra_rest_points.end());
  const double extent = bounding_box(points).max_extent();
  if (!(extent > kMinExtent)) {
    throw ValidationError("rest pose has zero extent; cannot normalize");
  }
  NormalizationTransform transform;
  transform.scale = 1.0 / extent;
  Vec3List offsets = skeleton.offsets();
  for (Vec3& o : offsets) {
    o *= transform.scale;
  }
  return {skeleton.with_offsets(std::move(offsets)), transform};
}

Vec3List end_site_rest_positions(const BvhDocument& document) {
  const Vec3List rest = rest_pose_positions(document.skeleton);
  Vec3List out;
  for (std::size_t j = 0; j < document.end_sites.size(); ++j) {
    if (document.end_sites[j]) {
      out.push_back(rest[j] + *document.end_sites[j]);
    }
  }
  return out;
}

BvhDocument rest_normalize(const BvhDocument& document, NormalizationTransform* transform) {
  const Vec3List sites = end_site_rest_positions(document);
  RestNormalization rn = rest_normalize(document.skeleton, sites);
  BvhDocument out = document;
  out.skeleton = rn.skeleton;
  for (auto& site : out.end_sites) {
    if (site) {
      *site *= rn.transform.scale;
    }
  }
  for (Pose& pose : out.clip.frames) {
    pose.root_translation *= rn.transform.scale;
  }
  for (Vec3List& frame : out.joint_translations) {
    for (Vec3& v : frame) {
      v *= rn.transform.scale;
    }
  }
  if (transform != nullptr) {
    *transform = rn.transform;
  }
  return out;
}

TranslationRemoval remove_global_translation(const JointTrajectory& trajectory, std::size_t root) {
  if (root >= trajectory.mask.size() || !trajectory.mask[root]) {
    throw ValidationError("root joint is missing from the trajectory mask; cannot remove translation");
  }
  TranslationRemoval out{trajectory, {}};
  out.root_positions.reserve(trajectory.frames.size());
  for (Vec3List& frame : out.trajectory.frames) {
    const Vec3 origin = frame.at(root);
    out.root_positions.push_back(origin);
    for (Vec3& p : frame) {
      p -= origin;
    }
  }
  return out;
}

JointTrajectory reattach_global_translation(const JointTrajectory& trajectory, std::span<const Vec3> root_positions) {
  if (root_positions.size() != trajectory.frames.size()) {
    throw ValidationError("root position count does not match the frame count");
  }
  JointTrajectory out = trajectory;
  for (std::size_t t = 0; t < out.frames.size(); ++t) {
    for (Vec3& p : out.frames[t]) {
      p += root_positions[t];
    }
  }
  return out;
}

JointTrajectory apply_transform(const JointTrajectory& trajectory, const NormalizationTransform& transform) {
  JointTrajectory out = trajectory;
  for (Vec3List& frame : out.frames) {
    for (Vec3& p : frame) {
      p = transform.apply(p);
    }
  }
  return out;
}

JointTrajectory denormalize(const JointTrajectory& trajectory, const NormalizationTransform& transform) {
  JointTrajectory out = trajectory;
  for (Vec3List& frame : out.frames) {
    for (Vec3& p : frame) {
      p = transform.invert(p);
    }
  }
  return out;
}

SequenceNormalization sequence_normalize(const JointTrajectory& trajectory) {
  const Aabb box = trajectory_bounds(trajectory);
  const double extent = box.max_extent();
  if (!(extent > kMinExtent)) {
    throw ValidationError("trajectory has zero extent; cannot normalize");
  }
  NormalizationTransform transform{box.center(), 2.0 / extent};
  return {apply_transform(trajectory, transform), transform};
}

NormalizedSequence normalize_sequence(const JointTrajectory& trajectory, std::size_t root) {
  TranslationRemoval removed = remove_global_translation(trajectory, root);
  SequenceNormalization scaled = sequence_normalize(removed.trajectory);
  return {std::move(scaled.trajectory), scaled.transform, std::move(removed.root_positions)};
}

JointTrajectory denormalize_sequence(const NormalizedSequence& normalized) {
  return reattach_global_translation(
      denormalize(normalized.trajectory, normalized.transform), normalized.root_positions);
}

} // namespace rigfit
