#include "rigfit/trajectory_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rigfit {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& message) {
  throw ValidationError("trajectory file: " + message);
}

// A masked joint, or one with no finite coordinate, is written as a whole null.
json vec_to_json(const Vec3& v, bool valid) {
  if (!valid || !v.array().isFinite().any()) {
    return nullptr;
  }
  json out = json::array();
  for (int k = 0; k < 3; ++k) {
    if (std::isfinite(v[k])) {
      out.push_back(v[k]);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Vec3 vec_from_json(const json& j, const std::string& where, bool allow_null) {
  if (allow_null && j.is_null()) {
    return Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  if (!j.is_array() || j.size() != 3) {
    schema_error(where + " must be a 3-element array");
  }
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (j[k].is_number()) {
      v[k] = j[k].get<double>();
    } else if (allow_null && j[k].is_null()) {
      v[k] = std::numeric_limits<double>::quiet_NaN();
    } else {
      schema_error(where + " holds a non-numeric coordinate");
    }
  }
  return v;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

} // namespace

TrajectoryFile parse_trajectory_json(std::string_view text) {
  const json doc = parse_json(text, "trajectory file");
  if (!doc.is_object()) {
    schema_error("top level must be an object");
  }
  if (!doc.contains("v") || !doc["v"].is_number_integer() || doc["v"].get<int>() != kTrajectorySchemaVersion) {
    schema_error("missing or unsupported schema version \"v\" (expected 1)");
  }
  if (!doc.contains("fps") || !doc["fps"].is_number() || !(doc["fps"].get<double>() > 0.0)) {
    schema_error("\"fps\" must be a positive number");
  }
  if (!doc.contains("joint_names") || !doc["joint_names"].is_array()) {
    schema_error("\"joint_names\" must be an array");
  }
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    schema_error("\"frames\" must be an array");
  }

  TrajectoryFile file;
  file.trajectory.fps = doc["fps"].get<double>();
  for (const json& name : doc["joint_names"]) {
    if (!name.is_string()) {
      schema_error("joint names must be strings");
    }
    file.joint_names.push_back(name.get<std::string>());
  }
  const std::size_t n = file.joint_names.size();
  if (n == 0) {
    schema_error("\"joint_names\" is empty");
  }

  file.trajectory.mask.assign(n, true);
  if (doc.contains("mask")) {
    const json& mask = doc["mask"];
    if (!mask.is_array() || mask.size() != n) {
      schema_error("\"mask\" must be a boolean array with one entry per joint");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j].is_boolean()) {
        schema_error("\"mask\" entries must be booleans");
      }
      file.trajectory.mask[j] = mask[j].get<bool>();
    }
  }

  if (doc.contains("parents")) {
    const json& parents = doc["parents"];
    if (!parents.is_array() || parents.size() != n) {
      schema_error("\"parents\" must be an integer array with one entry per joint");
    }
    std::vector<int> values;
    for (const json& p : parents) {
      if (!p.is_number_integer()) {
        schema_error("\"parents\" entries must be integers");
      }
      values.push_back(p.get<int>());
    }
    const auto issues = check_parents(values);
    if (!issues.empty()) {
      throw SkeletonError(issues);
    }
    file.parents = std::move(values);
  }

  const json& frames = doc["frames"];
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const json& row = frames[t];
    if (!row.is_array() || row.size() != n) {
      schema_error("frame " + std::to_string(t) + " must hold " + std::to_string(n) + " joints");
    }
    Vec3List positions;
    positions.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string where = "frames[" + std::to_string(t) + "][" + std::to_string(j) + "]";
      positions.push_back(vec_from_json(row[j], where, !file.trajectory.mask[j]));
    }
    file.trajectory.frames.push_back(std::move(positions));
  }
  if (file.trajectory.frames.empty()) {
    schema_error("\"frames\" is empty");
  }
  file.trajectory.check();
  return file;
}

std::string write_trajectory_json(const TrajectoryFile& file) {
  const std::size_t n = file.joint_names.size();
  if (file.trajectory.mask.size() != n) {
    throw ValidationError("trajectory file: joint name count does not match the mask");
  }
  json doc;
  doc["v"] = kTrajectorySchemaVersion;
  doc["fps"] = file.trajectory.fps;
  doc["joint_names"] = file.joint_names;
  json mask = json::array();
  for (bool m : file.trajectory.mask) {
    mask.push_back(m);
  }
  doc["mask"] = std::move(mask);
  if (file.parents) {
    doc["parents"] = *file.parents;
  }
  json frames = json::array();
  for (const Vec3List& frame : file.trajectory.frames) {
    if (frame.size() != n) {
      throw ValidationError("trajectory file: ragged frame");
    }
    json row = json::array();
    for (std::size_t j = 0; j < n; ++j) {
      row.push_back(vec_to_json(frame[j], file.trajectory.mask[j]));
    }
    frames.push_back(std::move(row));
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

TrajectoryFile load_trajectory(const std::filesystem::path& path) {
  return parse_trajectory_json(read_text_file(path));
}

void save_trajectory(const std::filesystem::path& path, const TrajectoryFile& file) {
  write_text_file(path, write_trajectory_json(file));
}

std::string write_transform_json(const NormalizationTransform& transform, const Vec3List& root_positions) {
  json doc;
  doc["v"] = kTrajectorySchemaVersion;
  doc["center"] = vec_to_json(transform.center, true);
  doc["scale"] = transform.scale;
  json roots = json::array();
  for (const Vec3& r : root_positions) {
    roots.push_back(vec_to_json(r, true));
  }
  doc["root_positions"] = std::move(roots);
  return doc.dump() + "\n";
}

NormalizedSequence parse_transform_json(std::string_view text) {
  const json doc = parse_json(text, "transform file");
  if (!doc.is_object() || !doc.contains("center") || !doc.contains("scale") || !doc["scale"].is_number()) {
    throw ValidationError("transform file: expected an object with \"center\" and \"scale\"");
  }
  NormalizedSequence out;
  out.transform.center = vec_from_json(doc["center"], "center", false);
  out.transform.scale = doc["scale"].get<double>();
  if (!(out.transform.scale > 0.0) || !std::isfinite(out.transform.scale)) {
    throw ValidationError("transform file: \"scale\" must be positive");
  }
  if (doc.contains("root_positions")) {
    if (!doc["root_positions"].is_array()) {
      throw ValidationError("transform file: \"root_positions\" must be an array");
    }
    for (const json& r : doc["root_positions"]) {
      out.root_positions.push_back(vec_from_json(r, "root_positions", false));
    }
  }
  return out;
}

} // namespace rigfit
