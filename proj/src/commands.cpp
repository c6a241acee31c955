#include "rigfit/commands.hpp"

#include "rigfit/bvh.hpp"
#include "rigfit/log.hpp"
#include "rigfit/metrics.hpp"
#include "rigfit/normalize.hpp"
#include "rigfit/trajectory_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <set>

namespace rigfit::cli {

namespace {

using nlohmann::json;

template <typename Fn>
int guarded(const char* command, Fn&& fn) {
  auto log = cli_logger();
  try {
    return fn();
  } catch (const Error& e) {
    log->error("{}: {}", command, e.what());
    switch (e.kind()) {
      case ErrorKind::Io:
        return kExitIo;
      case ErrorKind::Validation:
      case ErrorKind::Parse:
        return kExitValidation;
      case ErrorKind::Internal:
        return kExitInternal;
    }
    return kExitInternal;
  } catch (const std::exception& e) {
    log->error("{}: internal error: {}", command, e.what());
    return kExitInternal;
  }
}

bool is_bvh_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return ext == ".bvh";
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    out += (out.empty() ? "" : ", ") + s;
  }
  return out;
}

std::map<std::string, std::string> load_name_map(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("name map: malformed JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) {
    throw ValidationError("name map must be a JSON object of trajectory-name -> rig-name");
  }
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) {
      throw ValidationError("name map value for '" + key + "' is not a string");
    }
    out[key] = value.get<std::string>();
  }
  return out;
}

// Trajectory rows re-indexed to rig joints; rig joints absent from the file are masked out.
JointTrajectory align_to_rig(
    const TrajectoryFile& file,
    const Skeleton& rig,
    const std::map<std::string, std::string>& name_map) {
  const std::size_t n = rig.size();
  std::vector<std::optional<std::size_t>> source(n);
  std::vector<std::string> unmatched;
  for (std::size_t k = 0; k < file.joint_names.size(); ++k) {
    std::string name = file.joint_names[k];
    if (const auto it = name_map.find(name); it != name_map.end()) {
      name = it->second;
    }
    const auto joint = rig.find(name);
    if (!joint) {
      unmatched.push_back(file.joint_names[k]);
      continue;
    }
    if (source[*joint]) {
      throw ValidationError("rig joint '" + name + "' is matched by more than one trajectory joint");
    }
    source[*joint] = k;
  }
  if (!unmatched.empty()) {
    throw ValidationError("trajectory joints without a rig match: " + join(unmatched));
  }

  JointTrajectory out;
  out.fps = file.trajectory.fps;
  out.mask.assign(n, false);
  std::vector<std::string> missing;
  for (std::size_t j = 0; j < n; ++j) {
    if (source[j]) {
      out.mask[j] = file.trajectory.mask[*source[j]];
    } else {
      missing.push_back(rig.name(j));
    }
  }
  if (!missing.empty()) {
    cli_logger()->warn("rig joints without trajectory data (masked out): {}", join(missing));
  }
  for (const Vec3List& row : file.trajectory.frames) {
    Vec3List aligned(n, Vec3::Zero());
    for (std::size_t j = 0; j < n; ++j) {
      if (source[j] && out.mask[j]) {
        aligned[j] = row[*source[j]];
      }
    }
    out.frames.push_back(std::move(aligned));
  }
  out.check();
  return out;
}

// Rig document re-used as the layout for a new clip.
BvhDocument with_clip(const BvhDocument& rig, AnimationClip clip) {
  BvhDocument doc = rig;
  doc.clip = std::move(clip);
  doc.frame_time = 1.0 / doc.clip.fps;
  doc.joint_translations.clear();
  bool child_positions = false;
  for (std::size_t j = 1; j < doc.channels.size(); ++j) {
    child_positions = child_positions || doc.channels[j].has_position();
  }
  if (child_positions) {
    doc.joint_translations.assign(doc.clip.frames.size(), doc.skeleton.offsets());
  }
  return doc;
}

struct EvalInput {
  TrajectoryFile file;
  std::string source;
};

EvalInput load_eval_input(const std::filesystem::path& path) {
  EvalInput in;
  in.source = path.string();
  if (is_bvh_path(path)) {
    const BvhDocument doc = load_bvh(path);
    in.file.trajectory = fk_sequence(doc.skeleton, doc.clip);
    in.file.joint_names = doc.skeleton.joint_names();
    in.file.parents = doc.skeleton.parents();
  } else {
    in.file = load_trajectory(path);
  }
  return in;
}

std::size_t root_index(const TrajectoryFile& file) {
  if (file.parents) {
    for (std::size_t j = 0; j < file.parents->size(); ++j) {
      if ((*file.parents)[j] == kNoParent) {
        return j;
      }
    }
  }
  return 0;
}

// `pred` re-indexed into `gt` joint order, if both carry the same name set.
std::optional<JointTrajectory> correspond(const TrajectoryFile& pred, const TrajectoryFile& gt) {
  if (pred.joint_names.size() != gt.joint_names.size()) {
    return std::nullopt;
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < pred.joint_names.size(); ++k) {
    index[pred.joint_names[k]] = k;
  }
  JointTrajectory out = pred.trajectory;
  for (std::size_t j = 0; j < gt.joint_names.size(); ++j) {
    const auto it = index.find(gt.joint_names[j]);
    if (it == index.end()) {
      return std::nullopt;
    }
    out.mask[j] = pred.trajectory.mask[it->second];
    for (std::size_t t = 0; t < out.frames.size(); ++t) {
      out.frames[t][j] = pred.trajectory.frames[t][it->second];
    }
  }
  return out;
}

// Parents for CD-Skeleton: the file's own, else borrowed from the other side by name.
std::optional<std::vector<int>> parents_for(const TrajectoryFile& self, const TrajectoryFile& other) {
  if (self.parents) {
    return self.parents;
  }
  if (!other.parents || self.joint_names.size() != other.joint_names.size()) {
    return std::nullopt;
  }
  std::map<std::string, std::size_t> self_index;
  for (std::size_t k = 0; k < self.joint_names.size(); ++k) {
    self_index[self.joint_names[k]] = k;
  }
  std::vector<int> parents(self.joint_names.size(), kNoParent);
  for (std::size_t j = 0; j < other.joint_names.size(); ++j) {
    const auto it = self_index.find(other.joint_names[j]);
    if (it == self_index.end()) {
      return std::nullopt;
    }
    const int p = (*other.parents)[j];
    if (p != kNoParent) {
      const auto parent_it = self_index.find(other.joint_names[p]);
      if (parent_it == self_index.end()) {
        return std::nullopt;
      }
      parents[it->second] = static_cast<int>(parent_it->second);
    }
  }
  return parents;
}

// Uniform doubles in [-1, 1) from the raw 64-bit stream, independent of the
// standard library's distribution implementations.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double symmetric() {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return 2.0 * unit - 1.0;
  }

  Vec3 vec() {
    const double x = symmetric();
    const double y = symmetric();
    const double z = symmetric();
    return {x, y, z};
  }

 private:
  std::mt19937_64 engine_;
};

std::string fmt_vec(const Vec3& v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "(%.6f, %.6f, %.6f)", v.x(), v.y(), v.z());
  return buf;
}

} // namespace

int cmd_fit(const FitOptions& options, std::ostream& out) {
  return guarded("fit", [&] {
    auto log = cli_logger();
    options.config.validate();
    const BvhDocument rig = load_bvh(options.rig);
    const TrajectoryFile file = load_trajectory(options.trajectory);
    const auto name_map = options.name_map ? load_name_map(*options.name_map) : std::map<std::string, std::string>{};
    const JointTrajectory target = align_to_rig(file, rig.skeleton, name_map);

    log->info(
        "fitting {} frames onto {} joints ({} observed)",
        target.frame_count(),
        rig.skeleton.size(),
        target.valid_count());
    const SequenceFit fit = fit_sequence(rig.skeleton, target, options.config);

    if (!rig.channels[0].has_position()) {
      log->warn("rig root has no position channels; fitted root translation is not written");
    }
    save_bvh(options.out, with_clip(rig, fit.clip));

    const double fk_error = mpjpe(fk_sequence(rig.skeleton, fit.clip), target);
    json report;
    report["space"] = "rig";
    report["mpjpe_fk"] = fk_error;
    json frames = json::array();
    for (std::size_t t = 0; t < fit.frames.size(); ++t) {
      const FrameFitResult& f = fit.frames[t];
      json diagnostics = json::array();
      for (const FitDiagnostic& d : fit.diagnostics[t]) {
        diagnostics.push_back(
            {{"joint", rig.skeleton.name(d.joint)}, {"kind", to_string(d.kind)}, {"message", d.message}});
      }
      frames.push_back(
          {{"loss_pos", f.final_loss.pos},
           {"loss_prior", f.final_loss.prior},
           {"loss_twist", f.final_loss.twist},
           {"loss_total", f.final_loss.total},
           {"iters", f.iterations_used},
           {"diagnostics", std::move(diagnostics)}});
      for (const FitDiagnostic& d : fit.diagnostics[t]) {
        log->debug("frame {}: {}", t, d.message);
      }
    }
    report["frames"] = std::move(frames);
    report["config"] = {
        {"lambda_prior", options.config.lambda_prior},
        {"lambda_twist", options.config.lambda_twist},
        {"max_iters", options.config.max_iters},
        {"grad_tol", options.config.grad_tol},
        {"step_init", options.config.step_init},
        {"fit_root_translation", options.config.fit_root_translation},
    };
    if (options.report) {
      write_text_file(*options.report, report.dump(2) + "\n");
    }
    log->info("mpjpe_fk = {}", fk_error);
    (void)out;
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& options, std::ostream& out) {
  return guarded("eval", [&] {
    static const std::set<std::string> kMetrics{"mpjpe", "mpjve", "cds", "all"};
    if (!kMetrics.count(options.metric)) {
      throw ValidationError("unknown metric '" + options.metric + "'");
    }
    EvalInput pred = load_eval_input(options.pred);
    EvalInput gt = load_eval_input(options.gt);
    if (pred.file.trajectory.frame_count() != gt.file.trajectory.frame_count()) {
      throw ValidationError(
          "frame counts differ: " + std::to_string(pred.file.trajectory.frame_count()) + " vs " +
          std::to_string(gt.file.trajectory.frame_count()));
    }
    if (options.normalize) {
      for (EvalInput* in : {&pred, &gt}) {
        in->file.trajectory = normalize_sequence(in->file.trajectory, root_index(in->file)).trajectory;
      }
    }

    const bool all = options.metric == "all";
    json report;
    report["space"] = options.normalize ? "normalized" : "raw";
    report["frames"] = gt.file.trajectory.frame_count();

    if (all || options.metric == "mpjpe" || options.metric == "mpjve") {
      const auto aligned = correspond(pred.file, gt.file);
      if (!aligned) {
        if (!all) {
          throw ValidationError("prediction and ground truth do not share the same joint names");
        }
        cli_logger()->warn("joint names differ; mpjpe/mpjve skipped");
        report["mpjpe"] = nullptr;
        report["mpjve"] = nullptr;
      } else {
        if (all || options.metric == "mpjpe") {
          report["mpjpe"] = mpjpe(*aligned, gt.file.trajectory);
        }
        if (all || options.metric == "mpjve") {
          report["mpjve"] = mpjve(*aligned, gt.file.trajectory);
        }
      }
    }
    if (all || options.metric == "cds") {
      const auto pred_parents = parents_for(pred.file, gt.file);
      const auto gt_parents = parents_for(gt.file, pred.file);
      if (!pred_parents || !gt_parents) {
        if (!all) {
          throw ValidationError("CD-Skeleton needs a parent array for both inputs");
        }
        cli_logger()->warn("missing parent arrays; cds skipped");
        report["cds"] = nullptr;
      } else {
        const SequenceScore score =
            cd_skeleton_sequence(pred.file.trajectory, *pred_parents, gt.file.trajectory, *gt_parents);
        report["cds"] = score.mean;
        report["cds_per_frame"] = score.per_frame;
      }
    }
    out << report.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_normalize(const NormalizeOptions& options, std::ostream& out) {
  return guarded("normalize", [&] {
    TrajectoryFile file = load_trajectory(options.in);
    if (options.inverse) {
      if (!options.transform) {
        throw ValidationError("--inverse needs --transform");
      }
      NormalizedSequence normalized = parse_transform_json(read_text_file(*options.transform));
      if (normalized.root_positions.empty()) {
        normalized.root_positions.assign(file.trajectory.frame_count(), Vec3::Zero());
      }
      normalized.trajectory = file.trajectory;
      file.trajectory = denormalize_sequence(normalized);
    } else {
      const NormalizedSequence normalized = normalize_sequence(file.trajectory, root_index(file));
      file.trajectory = normalized.trajectory;
      if (options.transform) {
        write_text_file(*options.transform, write_transform_json(normalized.transform, normalized.root_positions));
      }
    }
    save_trajectory(options.out, file);
    (void)out;
    return kExitOk;
  });
}

int cmd_synth(const SynthOptions& options, std::ostream& out) {
  return guarded("synth", [&] {
    if (options.frames == 0) {
      throw ValidationError("--frames must be at least 1");
    }
    const BvhDocument rig = load_bvh(options.rig);
    const std::size_t n = rig.skeleton.size();
    const double extent = bounding_box(rest_pose_positions(rig.skeleton)).max_extent();

    SynthRng rng(options.seed);
    AnimationClip clip;
    clip.fps = 1.0 / rig.frame_time;
    Pose pose = Pose::identity(n);
    const bool moving_root = rig.channels[0].has_position();
    pose.root_translation = rig.clip.frames.empty() ? rig.skeleton.offset(0) : rig.clip.frames[0].root_translation;
    for (std::size_t j = 0; j < n; ++j) {
      pose.rotations[j] = 0.6 * rng.vec();
    }
    for (std::size_t t = 0; t < options.frames; ++t) {
      if (t > 0) {
        for (std::size_t j = 0; j < n; ++j) {
          pose.rotations[j] += 0.04 * rng.vec();
        }
        if (moving_root) {
          pose.root_translation += 0.01 * extent * rng.vec();
        }
      }
      clip.frames.push_back(pose);
    }

    const std::string bvh_text = write_bvh(with_clip(rig, clip));
    // Trajectory from the written file so both outputs agree to the last digit.
    const BvhDocument written = parse_bvh(bvh_text);
    TrajectoryFile file;
    file.trajectory = fk_sequence(written.skeleton, written.clip);
    file.joint_names = written.skeleton.joint_names();
    file.parents = written.skeleton.parents();

    std::filesystem::path bvh_path = options.out;
    bvh_path += ".bvh";
    std::filesystem::path json_path = options.out;
    json_path += ".json";
    write_text_file(bvh_path, bvh_text);
    save_trajectory(json_path, file);
    (void)out;
    return kExitOk;
  });
}

std::string describe_rig(const BvhDocument& doc) {
  const Skeleton& s = doc.skeleton;
  std::string text;
  char line[512];
  std::snprintf(
      line,
      sizeof(line),
      "joints: %zu  frames: %zu  frame_time: %.6f\n",
      s.size(),
      doc.clip.frames.size(),
      doc.frame_time);
  text += line;
  std::vector<int> depth(s.size(), 0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const int p = s.parent(j);
    depth[j] = p == kNoParent ? 0 : depth[p] + 1;
    std::string channels;
    for (BvhChannel c : doc.channels[j].channels) {
      channels += (channels.empty() ? "" : " ") + std::string(to_string(c));
    }
    const std::string order = doc.channels[j].has_rotation() ? std::string(to_string(doc.channels[j].rotation_order())) : "-";
    std::snprintf(
        line,
        sizeof(line),
        "%s[%zu] %s parent=%d offset=%s length=%.6f order=%s channels=%s%s\n",
        std::string(2 * depth[j], ' ').c_str(),
        j,
        s.name(j).c_str(),
        p,
        fmt_vec(s.offset(j)).c_str(),
        p == kNoParent ? 0.0 : s.offset(j).norm(),
        order.c_str(),
        channels.empty() ? "none" : channels.c_str(),
        s.is_zero_length(j) && p != kNoParent ? " zero-length" : "");
    text += line;
    if (doc.end_sites[j]) {
      std::snprintf(
          line,
          sizeof(line),
          "%s  end_site offset=%s length=%.6f\n",
          std::string(2 * depth[j], ' ').c_str(),
          fmt_vec(*doc.end_sites[j]).c_str(),
          doc.end_sites[j]->norm());
      text += line;
    }
  }
  return text;
}

int cmd_inspect(const InspectOptions& options, std::ostream& out) {
  return guarded("inspect", [&] {
    out << describe_rig(load_bvh(options.rig));
    return kExitOk;
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging_from_env();

  CLI::App app{"rigfit: fit skeletal animation to 3D joint trajectories and score the result"};
  app.require_subcommand(1);

  FitOptions fit;
  std::string fit_report;
  std::string fit_map;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a BVH animation to a trajectory file");
  fit_cmd->add_option("--rig", fit.rig, "Rig BVH (hierarchy and channel layout)")->required();
  fit_cmd->add_option("--traj", fit.trajectory, "Trajectory JSON")->required();
  fit_cmd->add_option("--out", fit.out, "Output BVH")->required();
  fit_cmd->add_option("--lambda-prior", fit.config.lambda_prior, "Weight of the closed-form prior")->capture_default_str();
  fit_cmd->add_option("--lambda-twist", fit.config.lambda_twist, "Weight of the bone-axis twist penalty")->capture_default_str();
  fit_cmd->add_option("--max-iters", fit.config.max_iters, "Descent iterations per frame")->capture_default_str();
  fit_cmd->add_option("--grad-tol", fit.config.grad_tol, "Gradient infinity-norm stop")->capture_default_str();
  fit_cmd->add_option("--step-init", fit.config.step_init, "First trial step")->capture_default_str();
  fit_cmd->add_flag("--fit-root-translation", fit.config.fit_root_translation, "Optimize the root translation too");
  fit_cmd->add_option("--report", fit_report, "Write a JSON fit report here");
  fit_cmd->add_option("--map", fit_map, "JSON object mapping trajectory joint names to rig names");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two animations or trajectories (JSON report on stdout)");
  eval_cmd->add_option("--pred", eval.pred, "Prediction (.bvh or trajectory .json)")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground truth (.bvh or trajectory .json)")->required();
  eval_cmd->add_option("--metric", eval.metric, "mpjpe | mpjve | cds | all")
      ->check(CLI::IsMember({"mpjpe", "mpjve", "cds", "all"}))
      ->capture_default_str();
  eval_cmd->add_flag("--normalize", eval.normalize, "Remove translation and scale both inputs into [-1,1]^3 first");

  NormalizeOptions norm;
  std::string norm_transform;
  auto* norm_cmd = app.add_subcommand("normalize", "Remove global translation and scale a trajectory into [-1,1]^3");
  norm_cmd->add_option("--in", norm.in, "Input trajectory JSON")->required();
  norm_cmd->add_option("--out", norm.out, "Output trajectory JSON")->required();
  norm_cmd->add_option("--transform", norm_transform, "Transform JSON (written, or read with --inverse)");
  norm_cmd->add_flag("--inverse", norm.inverse, "Undo a previous normalization using --transform");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a smooth random clip and its FK trajectory");
  synth_cmd->add_option("--rig", synth.rig, "Rig BVH")->required();
  synth_cmd->add_option("--frames", synth.frames, "Frame count")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output prefix; writes <prefix>.bvh and <prefix>.json")->required();

  InspectOptions inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the joint tree of a BVH rig");
  inspect_cmd->add_option("--rig", inspect.rig, "Rig BVH")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (fit_cmd->parsed()) {
    if (!fit_report.empty()) {
      fit.report = fit_report;
    }
    if (!fit_map.empty()) {
      fit.name_map = fit_map;
    }
    return cmd_fit(fit, out);
  }
  if (eval_cmd->parsed()) {
    return cmd_eval(eval, out);
  }
  if (norm_cmd->parsed()) {
    if (!norm_transform.empty()) {
      norm.transform = norm_transform;
    }
    return cmd_normalize(norm, out);
  }
  if (synth_cmd->parsed()) {
    return cmd_synth(synth, out);
  }
  if (inspect_cmd->parsed()) {
    return cmd_inspect(inspect, out);
  }
  return kExitInternal;
}

} // namespace rigfit::cli
