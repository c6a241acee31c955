#pragma once

#include "rigfit/normalize.hpp"
#include "rigfit/skeleton.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rigfit {

inline constexpr int kTrajectorySchemaVersion = 1;

/// On-disk trajectory: {"v":1,"fps":r,"joint_names":[...],"mask":[...]?,
/// "parents":[...]?,"frames":[[[x,y,z],...],...]}. Masked-out joints may hold null.
struct TrajectoryFile {
  JointTrajectory trajectory;
  std::vector<std::string> joint_names;
  // Optional kinematic tree, needed for CD-Skeleton on JSON inputs.
  std::optional<std::vector<int>> parents;
};

/// Throws ValidationError describing the first schema violation.
TrajectoryFile parse_trajectory_json(std::string_view text);
std::string write_trajectory_json(const TrajectoryFile& file);

TrajectoryFile load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const TrajectoryFile& file);

/// {"v":1,"center":[x,y,z],"scale":s,"root_positions":[[x,y,z],...]}
std::string write_transform_json(const NormalizationTransform& transform, const Vec3List& root_positions);
NormalizedSequence parse_transform_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace rigfit
