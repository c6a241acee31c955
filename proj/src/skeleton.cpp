#include "rigfit/skeleton.hpp"

#include "rigfit/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rigfit {

std::string to_string(SkeletonIssue::Kind kind) {
  switch (kind) {
    case SkeletonIssue::Kind::LengthMismatch:
      return "length mismatch";
    case SkeletonIssue::Kind::NoRoot:
      return "no root";
    case SkeletonIssue::Kind::MultipleRoots:
      return "multiple roots";
    case SkeletonIssue::Kind::ParentOutOfRange:
      return "parent out of range";
    case SkeletonIssue::Kind::SelfParent:
      return "self parent";
    case SkeletonIssue::Kind::Cycle:
      return "cycle";
    case SkeletonIssue::Kind::NonFiniteOffset:
      return "non-finite offset";
  }
  return "unknown";
}

namespace {

std::string join_issues(const std::vector<SkeletonIssue>& issues) {
  std::string out = "invalid skeleton:";
  for (const auto& issue : issues) {
    out += "\n  - " + issue.message;
  }
  return out;
}

} // namespace

SkeletonError::SkeletonError(std::vector<SkeletonIssue> issues)
    : ValidationError(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<SkeletonIssue> check_parents(std::span<const int> parents) {
  using Kind = SkeletonIssue::Kind;
  std::vector<SkeletonIssue> issues;
  const int n = static_cast<int>(parents.size());

  std::vector<int> roots;
  bool links_ok = true;
  for (int i = 0; i < n; ++i) {
    const int p = parents[i];
    if (p == kNoParent) {
      roots.push_back(i);
    } else if (p < 0 || p >= n) {
      issues.push_back(
          {Kind::ParentOutOfRange,
           i,
           "joint " + std::to_string(i) + " has out-of-range parent " + std::to_string(p)});
      links_ok = false;
    } else if (p == i) {
      issues.push_back({Kind::SelfParent, i, "joint " + std::to_string(i) + " is its own parent"});
      links_ok = false;
    }
  }

  if (n > 0 && roots.empty()) {
    issues.push_back({Kind::NoRoot, -1, "no joint has parent -1"});
  }
  if (roots.size() > 1) {
    std::string list;
    for (int r : roots) {
      list += (list.empty() ? "" : ", ") + std::to_string(r);
    }
    issues.push_back({Kind::MultipleRoots, roots[1], "multiple roots: joints " + list});
  }

  // Walk each chain upward; a walk longer than n, or one that revisits a joint
  // on the current path, means a cycle.
  if (links_ok) {
    std::vector<int> state(n, 0); // 0 = unseen, 1 = on current path, 2 = reaches a root
    for (int start = 0; start < n; ++start) {
      std::vector<int> path;
      int j = start;
      while (j != kNoParent && state[j] == 0) {
        state[j] = 1;
        path.push_back(j);
        j = parents[j];
      }
      if (j != kNoParent && state[j] == 1) {
        issues.push_back(
            {Kind::Cycle, j, "cycle detected through joint " + std::to_string(j)});
        for (int k : path) {
          state[k] = 3;
        }
        continue;
      }
      const int resolved = (j == kNoParent) ? 2 : state[j];
      for (int k : path) {
        state[k] = resolved;
      }
    }
  }
  return issues;
}

Skeleton Skeleton::create(
    std::vector<std::string> names,
    std::vector<int> parents,
    Vec3List offsets) {
  using Kind = SkeletonIssue::Kind;
  std::vector<SkeletonIssue> issues;

  if (names.size() != parents.size() || names.size() != offsets.size()) {
    issues.push_back(
        {Kind::LengthMismatch,
         -1,
         "input lengths differ: " + std::to_string(names.size()) + " names, " +
             std::to_string(parents.size()) + " parents, " + std::to_string(offsets.size()) +
             " offsets"});
    throw SkeletonError(std::move(issues));
  }
  if (parents.empty()) {
    issues.push_back({Kind::NoRoot, -1, "skeleton has no joints"});
    throw SkeletonError(std::move(issues));
  }

  issues = check_parents(parents);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (!offsets[i].allFinite()) {
      issues.push_back(
          {Kind::NonFiniteOffset,
           static_cast<int>(i),
           "joint " + std::to_string(i) + " has a non-finite offset"});
    }
  }
  if (!issues.empty()) {
    throw SkeletonError(std::move(issues));
  }

  const std::size_t n = parents.size();
  std::vector<std::vector<std::size_t>> original_children(n);
  std::size_t root = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (parents[i] == kNoParent) {
      root = i;
    } else {
      original_children[parents[i]].push_back(i);
    }
  }

  bool ordered = root == 0;
  for (std::size_t i = 1; ordered && i < n; ++i) {
    ordered = parents[i] < static_cast<int>(i);
  }

  std::vector<std::size_t> order(n);
  if (ordered) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    // Depth-first preorder keeps every subtree contiguous.
    order.clear();
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      order.push_back(j);
      const auto& kids = original_children[j];
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
        stack.push_back(*it);
      }
    }
  }

  std::vector<std::size_t> canonical(n);
  for (std::size_t k = 0; k < n; ++k) {
    canonical[order[k]] = k;
  }

  Skeleton s;
  s.names_.resize(n);
  s.parents_.resize(n);
  s.offsets_.resize(n);
  s.children_.resize(n);
  s.zero_length_.resize(n);
  s.original_index_ = order;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    s.names_[k] = std::move(names[src]);
    s.parents_[k] = parents[src] == kNoParent ? kNoParent : static_cast<int>(canonical[parents[src]]);
    s.offsets_[k] = offsets[src];
    s.zero_length_[k] = offsets[src].norm() < kZeroLengthBone;
    if (s.parents_[k] != kNoParent) {
      s.children_[s.parents_[k]].push_back(k);
    }
  }
  return s;
}

std::optional<std::size_t> Skeleton::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - names_.begin());
}

Skeleton Skeleton::with_offsets(Vec3List offsets) const {
  if (offsets.size() != size()) {
    throw ValidationError("with_offsets: expected " + std::to_string(size()) + " offsets");
  }
  Skeleton s = *this;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (!offsets[i].allFinite()) {
      throw ValidationError("with_offsets: non-finite offset for joint " + names_[i]);
    }
    s.zero_length_[i] = offsets[i].norm() < kZeroLengthBone;
  }
  s.offsets_ = std::move(offsets);
  return s;
}

SkeletonValidation validate_skeleton(
    std::vector<std::string> names,
    std::vector<int> parents,
    Vec3List offsets) {
  SkeletonValidation out;
  try {
    out.skeleton = Skeleton::create(std::move(names), std::move(parents), std::move(offsets));
  } catch (const SkeletonError& e) {
    out.issues = e.issues();
  }
  return out;
}

Pose Pose::identity(std::size_t joint_count) {
  Pose p;
  p.rotations.assign(joint_count, Vec3::Zero());
  return p;
}

std::size_t JointTrajectory::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void JointTrajectory::check() const {
  if (mask.empty() || valid_count() == 0) {
    throw ValidationError("trajectory mask has no valid joint");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw ValidationError("trajectory fps must be positive");
  }
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != mask.size()) {
      throw ValidationError(
          "trajectory frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
          " joints, expected " + std::to_string(mask.size()));
    }
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (mask[j] && !frames[t][j].allFinite()) {
        throw ValidationError(
            "trajectory frame " + std::to_string(t) + " joint " + std::to_string(j) +
            " is not finite");
      }
    }
  }
}

FkResult forward_kinematics_full(const Skeleton& skeleton, const Pose& pose) {
  const std::size_t n = skeleton.size();
  if (pose.rotations.size() != n) {
    throw ValidationError(
        "pose has " + std::to_string(pose.rotations.size()) + " rotations, skeleton has " +
        std::to_string(n) + " joints");
  }
  FkResult fk;
  fk.positions.resize(n);
  fk.global_rotations.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat3 local = axis_angle_to_matrix(pose.rotations[i]);
    const int p = skeleton.parent(i);
    if (p == kNoParent) {
      fk.positions[i] = pose.root_translation;
      fk.global_rotations[i] = local;
    } else {
      fk.positions[i] = fk.positions[p] + fk.global_rotations[p] * skeleton.offset(i);
      fk.global_rotations[i] = fk.global_rotations[p] * local;
    }
  }
  return fk;
}

Vec3List forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
  return forward_kinematics_full(skeleton, pose).positions;
}

JointTrajectory fk_sequence(const Skeleton& skeleton, const AnimationClip& clip) {
  JointTrajectory out;
  out.fps = clip.fps;
  out.mask.assign(skeleton.size(), true);
  out.frames.reserve(clip.frames.size());
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    if (clip.frames[t].rotations.size() != skeleton.size()) {
      throw ValidationError(
          "clip frame " + std::to_string(t) + " has " +
          std::to_string(clip.frames[t].rotations.size()) + " rotations, skeleton has " +
          std::to_string(skeleton.size()) + " joints");
    }
    out.frames.push_back(forward_kinematics(skeleton, clip.frames[t]));
  }
  return out;
}

Vec3List rest_pose_positions(const Skeleton& skeleton) {
  return forward_kinematics(skeleton, Pose::identity(skeleton.size()));
}

std::vector<BoneSegment> bone_segments(const Skeleton& skeleton, std::span<const Vec3> positions) {
  return bone_segments(std::span<const int>(skeleton.parents()), positions);
}

std::vector<BoneSegment> bone_segments(std::span<const int> parents, std::span<const Vec3> positions) {
  if (parents.size() != positions.size()) {
    throw ValidationError("bone_segments: parents and positions differ in length");
  }
  std::vector<BoneSegment> segments;
  segments.reserve(parents.empty() ? 0 : parents.size() - 1);
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const int p = parents[i];
    if (p == kNoParent) {
      continue;
    }
    if (p < 0 || static_cast<std::size_t>(p) >= parents.size()) {
      throw ValidationError("bone_segments: parent index out of range");
    }
    segments.push_back({positions[p], positions[i]});
  }
  return segments;
}

} // namespace rigfit
