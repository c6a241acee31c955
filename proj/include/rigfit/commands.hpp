#pragma once

#include "rigfit/bvh.hpp"
#include "rigfit/ik_fit.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rigfit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitIo = 3,
  kExitInternal = 4,
};

struct FitOptions {
  std::filesystem::path rig;
  std::filesystem::path trajectory;
  std::filesystem::path out;
  std::optional<std::filesystem::path> report;
  // JSON object mapping trajectory joint names to rig joint names.
  std::optional<std::filesystem::path> name_map;
  FitConfig config;
};

struct EvalOptions {
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::string metric = "all";
  bool normalize = false;
};

struct NormalizeOptions {
  std::filesystem::path in;
  std::filesystem::path out;
  std::optional<std::filesystem::path> transform;
  // Apply the transform file in reverse instead of normalizing.
  bool inverse = false;
};

struct SynthOptions {
  std::filesystem::path rig;
  std::size_t frames = 24;
  std::uint64_t seed = 0;
  // Writes <out>.bvh and <out>.json.
  std::filesystem::path out;
};

struct InspectOptions {
  std::filesystem::path rig;
};

int cmd_fit(const FitOptions& options, std::ostream& out);
int cmd_eval(const EvalOptions& options, std::ostream& out);
int cmd_normalize(const NormalizeOptions& options, std::ostream& out);
int cmd_synth(const SynthOptions& options, std::ostream& out);
int cmd_inspect(const InspectOptions& options, std::ostream& out);

/// Human-readable dump of a rig as printed by `rigfit inspect`.
std::string describe_rig(const BvhDocument& document);

/// Full command-line entry point; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rigfit::cli
