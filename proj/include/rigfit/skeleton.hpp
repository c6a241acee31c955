#pragma once

#include "rigfit/error.hpp"
#include "rigfit/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rigfit {

inline constexpr int kNoParent = -1;

/// Offsets shorter than this are treated as zero-length bones.
inline constexpr double kZeroLengthBone = 1e-12;

struct SkeletonIssue {
  enum class Kind {
    LengthMismatch,
    NoRoot,
    MultipleRoots,
    ParentOutOfRange,
    SelfParent,
    Cycle,
    NonFiniteOffset,
  };

  Kind kind;
  // Offending joint in the caller's (original) indexing, or -1 when the issue is global.
  int joint = -1;
  std::string message;
};

std::string to_string(SkeletonIssue::Kind kind);

/// Structural checks on a bare parent array (single root, in-range indices, acyclic).
std::vector<SkeletonIssue> check_parents(std::span<const int> parents);

class SkeletonError : public ValidationError {
 public:
  explicit SkeletonError(std::vector<SkeletonIssue> issues);

  const std::vector<SkeletonIssue>& issues() const noexcept {
    return issues_;
  }

 private:
  std::vector<SkeletonIssue> issues_;
};

/// Kinematic tree stored parent-before-child. The remap table keeps track of
/// where each joint sat in the input lists.
class Skeleton {
 public:
  /// Throws SkeletonError listing every violated invariant.
  static Skeleton create(
      std::vector<std::string> names,
      std::vector<int> parents,
      Vec3List offsets);

  std::size_t size() const noexcept {
    return parents_.size();
  }

  const std::vector<std::string>& joint_names() const noexcept {
    return names_;
  }
  const std::vector<int>& parents() const noexcept {
    return parents_;
  }
  const Vec3List& offsets() const noexcept {
    return offsets_;
  }

  const std::string& name(std::size_t joint) const {
    return names_.at(joint);
  }
  int parent(std::size_t joint) const {
    return parents_.at(joint);
  }
  const Vec3& offset(std::size_t joint) const {
    return offsets_.at(joint);
  }
  const std::vector<std::size_t>& children(std::size_t joint) const {
    return children_.at(joint);
  }
  bool is_zero_length(std::size_t joint) const {
    return zero_length_.at(joint);
  }

  /// Canonical index -> index in the lists passed to create().
  const std::vector<std::size_t>& original_index() const noexcept {
    return original_index_;
  }

  std::optional<std::size_t> find(const std::string& name) const;

  /// Same topology with replaced offsets (used for rig rescaling).
  Skeleton with_offsets(Vec3List offsets) const;

 private:
  Skeleton() = default;

  std::vector<std::string> names_;
  std::vector<int> parents_;
  Vec3List offsets_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<bool> zero_length_;
  std::vector<std::size_t> original_index_;
};

struct SkeletonValidation {
  std::optional<Skeleton> skeleton;
  std::vector<SkeletonIssue> issues;

  bool ok() const noexcept {
    return skeleton.has_value();
  }
};

/// Non-throwing front door to Skeleton::create().
SkeletonValidation validate_skeleton(
    std::vector<std::string> names,
    std::vector<int> parents,
    Vec3List offsets);

/// Local axis-angle rotation per joint plus the root's world position.
struct Pose {
  Vec3List rotations;
  Vec3 root_translation = Vec3::Zero();

  static Pose identity(std::size_t joint_count);
};

struct AnimationClip {
  std::vector<Pose> frames;
  double fps = 30.0;

  std::size_t frame_count() const noexcept {
    return frames.size();
  }
};

/// T x N grid of world positions with a per-joint validity mask.
struct JointTrajectory {
  std::vector<Vec3List> frames;
  std::vector<bool> mask;
  double fps = 30.0;

  std::size_t frame_count() const noexcept {
    return frames.size();
  }
  std::size_t joint_count() const noexcept {
    return mask.size();
  }
  std::size_t valid_count() const;

  /// Throws ValidationError on ragged rows, an empty mask or non-finite valid entries.
  void check() const;
};

/// World positions and accumulated world rotations of one posed frame.
struct FkResult {
  Vec3List positions;
  std::vector<Mat3> global_rotations;
};

FkResult forward_kinematics_full(const Skeleton& skeleton, const Pose& pose);

Vec3List forward_kinematics(const Skeleton& skeleton, const Pose& pose);

JointTrajectory fk_sequence(const Skeleton& skeleton, const AnimationClip& clip);

Vec3List rest_pose_positions(const Skeleton& skeleton);

struct BoneSegment {
  Vec3 parent;
  Vec3 child;
};

std::vector<BoneSegment> bone_segments(const Skeleton& skeleton, std::span<const Vec3> positions);
std::vector<BoneSegment> bone_segments(std::span<const int> parents, std::span<const Vec3> positions);

} // namespace rigfit
