#include "rigfit/commands.hpp"

#include "rigfit/bvh.hpp"
#include "rigfit/metrics.hpp"
#include "rigfit/trajectory_io.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

using namespace rigfit;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = RIGFIT_FIXTURE_DIR;
const std::filesystem::path kGolden = RIGFIT_GOLDEN_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run rigfit_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rigfit");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) {
  return (kFixtures / name).string();
}

// Compares against a golden file; RIGFIT_UPDATE_GOLDEN=1 rewrites it instead.
void check_golden(const std::string& name, const std::string& actual) {
  const auto path = kGolden / name;
  if (std::getenv("RIGFIT_UPDATE_GOLDEN")) {
    write_text_file(path, actual);
  }
  CHECK(read_text_file(path) == actual);
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  CHECK(rigfit_cli({}).code == cli::kExitValidation);
  CHECK(rigfit_cli({"dance"}).code == cli::kExitValidation);
  CHECK(rigfit_cli({"fit", "--rig", "x.bvh"}).code == cli::kExitValidation);
  CHECK(rigfit_cli({"eval", "--pred", "a", "--gt", "b", "--metric", "pck"}).code == cli::kExitValidation);
  const Run help = rigfit_cli({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("synth") != std::string::npos);
}

TEST_CASE("synth then fit round trip") {
  oracle::TempDir dir("fit");
  const std::string prefix = (dir / "clip").string();
  REQUIRE(rigfit_cli({"synth", "--rig", fixture("mixed_orders.bvh"), "--frames", "12", "--seed", "5", "--out", prefix}).code == 0);
  const std::string out_bvh = (dir / "fit.bvh").string();
  const std::string report = (dir / "report.json").string();
  REQUIRE(
      rigfit_cli({"fit", "--rig", fixture("mixed_orders.bvh"), "--traj", prefix + ".json", "--out", out_bvh, "--report", report})
          .code == 0);

  const BvhDocument fitted = load_bvh(out_bvh);
  const TrajectoryFile traj = load_trajectory(prefix + ".json");
  const double error = mpjpe(fk_sequence(fitted.skeleton, fitted.clip), traj.trajectory);
  // Rig bones are about 10 units long.
  CHECK(error < 1e-3 * 10.0);

  const json r = json::parse(read_text_file(report));
  CHECK(r["frames"].size() == 12);
  CHECK(r["mpjpe_fk"].get<double>() < 1e-2);
  for (const auto& f : r["frames"]) {
    CHECK(f.contains("loss_pos"));
    CHECK(f.contains("loss_prior"));
    CHECK(f.contains("loss_twist"));
    CHECK(f["iters"].get<int>() >= 0);
  }

  const Run eval = rigfit_cli({"eval", "--pred", out_bvh, "--gt", prefix + ".json", "--normalize"});
  REQUIRE(eval.code == 0);
  const json e = json::parse(eval.out);
  CHECK(e["space"] == "normalized");
  CHECK(e["mpjpe"].get<double>() < 1e-3);
}

TEST_CASE("fit flags reach the solver") {
  oracle::TempDir dir("flags");
  const std::string prefix = (dir / "clip").string();
  REQUIRE(rigfit_cli({"synth", "--rig", fixture("two_joint.bvh"), "--frames", "3", "--out", prefix}).code == 0);
  const std::string report = (dir / "r.json").string();
  REQUIRE(
      rigfit_cli({"fit", "--rig", fixture("two_joint.bvh"), "--traj", prefix + ".json", "--out", (dir / "o.bvh").string(),
                  "--max-iters", "3", "--lambda-prior", "0.5", "--lambda-twist", "0", "--grad-tol", "1e-9",
                  "--step-init", "0.01", "--fit-root-translation", "--report", report})
          .code == 0);
  const json r = json::parse(read_text_file(report));
  CHECK(r["config"]["max_iters"] == 3);
  CHECK(r["config"]["lambda_prior"] == 0.5);
  CHECK(r["config"]["fit_root_translation"] == true);
  for (const auto& f : r["frames"]) {
    CHECK(f["iters"].get<int>() <= 3);
  }
  CHECK(rigfit_cli({"fit", "--rig", fixture("two_joint.bvh"), "--traj", prefix + ".json", "--out", (dir / "o.bvh").string(),
                    "--max-iters", "0"})
            .code == cli::kExitValidation);
}

TEST_CASE("fit name matching") {
  oracle::TempDir dir("names");
  TrajectoryFile f;
  f.joint_names = {"Hips", "Chest"};
  f.trajectory.mask = {true, true};
  f.trajectory.frames = {{Vec3::Zero(), Vec3(0, 10, 0)}};
  const std::string traj = (dir / "t.json").string();
  save_trajectory(traj, f);
  const std::string out = (dir / "o.bvh").string();
  CHECK(rigfit_cli({"fit", "--rig", fixture("two_joint.bvh"), "--traj", traj, "--out", out}).code == cli::kExitValidation);

  const std::string map = (dir / "map.json").string();
  write_text_file(map, R"({"Chest":"Spine"})");
  CHECK(rigfit_cli({"fit", "--rig", fixture("two_joint.bvh"), "--traj", traj, "--out", out, "--map", map}).code == 0);
  const BvhDocument fitted = load_bvh(out);
  CHECK((forward_kinematics(fitted.skeleton, fitted.clip.frames[0])[1] - Vec3(0, 10, 0)).norm() < 1e-3);
}

TEST_CASE("missing files exit with the io code") {
  oracle::TempDir dir("io");
  const std::string out = (dir / "o.bvh").string();
  CHECK(rigfit_cli({"fit", "--rig", "/nonexistent/rig.bvh", "--traj", "t.json", "--out", out}).code == cli::kExitIo);
  CHECK(rigfit_cli({"inspect", "--rig", "/nonexistent/rig.bvh"}).code == cli::kExitIo);
  CHECK(rigfit_cli({"eval", "--pred", "/nonexistent/a.json", "--gt", "/nonexistent/b.json"}).code == cli::kExitIo);
}

TEST_CASE("malformed inputs exit with the validation code") {
  oracle::TempDir dir("bad");
  const std::string bad = (dir / "bad.bvh").string();
  write_text_file(bad, "HIERARCHY\nROOT A\n{\n");
  CHECK(rigfit_cli({"inspect", "--rig", bad}).code == cli::kExitValidation);
  const std::string bad_json = (dir / "bad.json").string();
  write_text_file(bad_json, "{\"v\":1}");
  CHECK(rigfit_cli({"normalize", "--in", bad_json, "--out", (dir / "o.json").string()}).code == cli::kExitValidation);
}

TEST_CASE("eval on identical and hand-built inputs") {
  oracle::TempDir dir("eval");
  const Run same = rigfit_cli({"eval", "--pred", fixture("quadruped.bvh"), "--gt", fixture("quadruped.bvh")});
  REQUIRE(same.code == 0);
  const json s = json::parse(same.out);
  CHECK(s["mpjpe"] == 0.0);
  CHECK(s["mpjve"] == 0.0);
  CHECK(s["cds"].get<double>() < 1e-12);
  CHECK(s["space"] == "raw");

  TrajectoryFile a;
  a.joint_names = {"p", "q"};
  a.parents = std::vector<int>{-1, 0};
  a.trajectory.mask = {true, true};
  a.trajectory.frames = {{Vec3::Zero(), Vec3(1, 0, 0)}};
  TrajectoryFile b = a;
  b.trajectory.frames = {{Vec3(0, 1, 0), Vec3(1, 1, 0)}};
  b.parents.reset();
  save_trajectory(dir / "a.json", a);
  save_trajectory(dir / "b.json", b);
  const Run cds = rigfit_cli({"eval", "--pred", (dir / "a.json").string(), "--gt", (dir / "b.json").string(), "--metric", "cds"});
  REQUIRE(cds.code == 0);
  const json c = json::parse(cds.out);
  CHECK(c["cds"] == 1.0);
  CHECK_FALSE(c.contains("mpjpe"));

  // Mixed BVH and JSON: the BVH side goes through FK first.
  const BvhDocument doc = load_bvh(fixture("star_zyx.bvh"));
  TrajectoryFile fk;
  fk.trajectory = fk_sequence(doc.skeleton, doc.clip);
  fk.joint_names = doc.skeleton.joint_names();
  save_trajectory(dir / "fk.json", fk);
  const Run mixed = rigfit_cli({"eval", "--pred", fixture("star_zyx.bvh"), "--gt", (dir / "fk.json").string()});
  REQUIRE(mixed.code == 0);
  const json m = json::parse(mixed.out);
  CHECK(m["mpjpe"].get<double>() < 1e-12);
  CHECK(m["cds"].get<double>() < 1e-12);

  CHECK(rigfit_cli({"eval", "--pred", fixture("star_zyx.bvh"), "--gt", fixture("quadruped.bvh")}).code ==
        cli::kExitValidation);
}

TEST_CASE("normalize and invert") {
  oracle::TempDir dir("norm");
  TrajectoryFile f;
  f.joint_names = {"r", "a"};
  f.trajectory.mask = {true, true};
  f.trajectory.frames = {{Vec3(10, 0, 0), Vec3(8, 0, 0)}, {Vec3(12, 1, 0), Vec3(18, 1, 0)}};
  save_trajectory(dir / "in.json", f);
  const std::string out = (dir / "out.json").string();
  const std::string transform = (dir / "t.json").string();
  REQUIRE(rigfit_cli({"normalize", "--in", (dir / "in.json").string(), "--out", out, "--transform", transform}).code == 0);
  const TrajectoryFile n = load_trajectory(out);
  // After removing the root: a at x = -2 then x = 6, so the box is [-2, 6] on x.
  CHECK((n.trajectory.frames[0][1] - Vec3(-1, 0, 0)).norm() < 1e-12);
  CHECK((n.trajectory.frames[1][1] - Vec3(1, 0, 0)).norm() < 1e-12);

  const std::string back = (dir / "back.json").string();
  REQUIRE(rigfit_cli({"normalize", "--in", out, "--out", back, "--transform", transform, "--inverse"}).code == 0);
  const TrajectoryFile restored = load_trajectory(back);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK((restored.trajectory.frames[t][j] - f.trajectory.frames[t][j]).norm() < 1e-9);
    }
  }
  CHECK(rigfit_cli({"normalize", "--in", out, "--out", back, "--inverse"}).code == cli::kExitValidation);
}

TEST_CASE("synth is deterministic and matches golden output") {
  oracle::TempDir dir("synth");
  const std::string p1 = (dir / "one").string();
  const std::string p2 = (dir / "two").string();
  REQUIRE(rigfit_cli({"synth", "--rig", fixture("two_joint.bvh"), "--frames", "2", "--seed", "0", "--out", p1}).code == 0);
  REQUIRE(rigfit_cli({"synth", "--rig", fixture("two_joint.bvh"), "--frames", "2", "--seed", "0", "--out", p2}).code == 0);
  CHECK(read_text_file(p1 + ".bvh") == read_text_file(p2 + ".bvh"));
  CHECK(read_text_file(p1 + ".json") == read_text_file(p2 + ".json"));
  check_golden("synth_two_joint_seed0.bvh", read_text_file(p1 + ".bvh"));
  check_golden("synth_two_joint_seed0.json", read_text_file(p1 + ".json"));

  REQUIRE(rigfit_cli({"synth", "--rig", fixture("two_joint.bvh"), "--frames", "2", "--seed", "1", "--out", p2}).code == 0);
  CHECK(read_text_file(p1 + ".bvh") != read_text_file(p2 + ".bvh"));

  REQUIRE(rigfit_cli({"synth", "--rig", fixture("branch_yzx.bvh"), "--frames", "1", "--out", p2}).code == 0);
  CHECK(load_bvh(p2 + ".bvh").clip.frame_count() == 1);
  CHECK(load_trajectory(p2 + ".json").trajectory.frame_count() == 1);
  CHECK(rigfit_cli({"synth", "--rig", fixture("two_joint.bvh"), "--frames", "0", "--out", p2}).code == cli::kExitValidation);
}

TEST_CASE("inspect dumps match golden files") {
  for (const char* name : {"two_joint", "mixed_orders", "zero_length"}) {
    CAPTURE(name);
    const Run r = rigfit_cli({"inspect", "--rig", fixture(std::string(name) + ".bvh")});
    REQUIRE(r.code == 0);
    check_golden(std::string("inspect_") + name + ".txt", r.out);
  }
}

TEST_CASE("the installed executable behaves like the in-process driver") {
  oracle::TempDir dir("exe");
  const std::string cmd = std::string("\"") + RIGFIT_CLI_PATH + "\" inspect --rig \"" + fixture("two_joint.bvh") + "\" > \"" +
                          (dir / "out.txt").string() + "\"";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(read_text_file(dir / "out.txt") == rigfit_cli({"inspect", "--rig", fixture("two_joint.bvh")}).out);
  const std::string missing = std::string("\"") + RIGFIT_CLI_PATH + "\" inspect --rig /nonexistent.bvh 2>/dev/null";
  const int status = std::system(missing.c_str());
  CHECK(WEXITSTATUS(status) == cli::kExitIo);
}

} // TEST_SUITE
