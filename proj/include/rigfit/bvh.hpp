#pragma once

#include "rigfit/rotation.hpp"
#include "rigfit/skeleton.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rigfit {

enum class BvhChannel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

std::string_view to_string(BvhChannel channel);
std::optional<BvhChannel> parse_bvh_channel(std::string_view name);

/// One joint's CHANNELS line, in file order.
struct JointChannels {
  std::vector<BvhChannel> channels;

  bool has_position() const;
  bool has_rotation() const;
  /// Order of the rotation channels; ZXY when the joint has none.
  EulerOrder rotation_order() const;

  static JointChannels root(EulerOrder order = EulerOrder::ZXY);
  static JointChannels rotation_only(EulerOrder order = EulerOrder::ZXY);
};

/// Hierarchy + motion of a BVH file. Angles are radians in memory and degrees on disk.
struct BvhDocument {
  Skeleton skeleton;
  // Indexed like skeleton joints.
  std::vector<JointChannels> channels;
  std::vector<std::optional<Vec3>> end_sites;
  AnimationClip clip;
  double frame_time = 1.0 / 30.0;
  // Per-frame local translations of non-root joints that carry position
  // channels ([frame][joint]). Empty when no such joint exists; FK keeps using
  // the OFFSET of those joints.
  std::vector<Vec3List> joint_translations;

  std::size_t channel_count() const;
};

/// Root with 6 channels, every other joint 3 rotation channels, ZXY order.
BvhDocument make_bvh_document(const Skeleton& skeleton, const AnimationClip& clip);

/// Throws ParseError carrying the line and column of the first problem.
BvhDocument parse_bvh(std::string_view text);

/// Deterministic text: 2-space indent, LF endings, 6 decimals.
/// Throws ValidationError if frames and skeleton disagree.
std::string write_bvh(const BvhDocument& document);

BvhDocument load_bvh(const std::filesystem::path& path);
void save_bvh(const std::filesystem::path& path, const BvhDocument& document);

} // namespace rigfit
