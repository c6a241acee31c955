#include "rigfit/bvh.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace rigfit;

namespace {

const std::filesystem::path kFixtures = RIGFIT_FIXTURE_DIR;
const std::filesystem::path kGolden = RIGFIT_GOLDEN_DIR;

std::vector<std::filesystem::path> fixture_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(kFixtures)) {
    if (entry.path().extension() == ".bvh") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimal = R"(HIERARCHY
ROOT Hips
{
  OFFSET 1 2 3
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 5 0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.04
0 0 0 0 0 0 0 0 0
1 2 3 90 0 0 0 0 0
)";

int parse_error_line(const std::string& text) {
  try {
    parse_bvh(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

// Largest angle (degrees) between corresponding joint rotations of two clips.
double max_rotation_gap_deg(const AnimationClip& a, const AnimationClip& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    for (std::size_t j = 0; j < a.frames[t].rotations.size(); ++j) {
      const Mat3 delta =
          axis_angle_to_matrix(a.frames[t].rotations[j]).transpose() * axis_angle_to_matrix(b.frames[t].rotations[j]);
      const double c = std::clamp((delta.trace() - 1.0) / 2.0, -1.0, 1.0);
      worst = std::max(worst, std::acos(c) * 180.0 / std::numbers::pi);
    }
  }
  return worst;
}

} // namespace

TEST_SUITE("bvh") {

TEST_CASE("minimal fixture") {
  const BvhDocument doc = parse_bvh(kMinimal);
  REQUIRE(doc.skeleton.size() == 2);
  CHECK(doc.clip.frame_count() == 2);
  CHECK(doc.skeleton.name(1) == "Spine");
  CHECK(doc.skeleton.offset(0) == Vec3(1, 2, 3));
  CHECK(doc.skeleton.offset(1) == Vec3(0, 10, 0));
  REQUIRE(doc.end_sites[1]);
  CHECK(*doc.end_sites[1] == Vec3(0, 5, 0));
  CHECK_FALSE(doc.end_sites[0]);
  CHECK(doc.frame_time == 0.04);
  CHECK(doc.clip.fps == doctest::Approx(25.0));
  CHECK(doc.channel_count() == 9);
  CHECK(doc.channels[1].rotation_order() == EulerOrder::ZXY);

  const Pose& rest = doc.clip.frames[0];
  CHECK(rest.rotations[0] == Vec3::Zero());
  CHECK(rest.rotations[1] == Vec3::Zero());
  CHECK(rest.root_translation == Vec3::Zero());

  const Pose& moved = doc.clip.frames[1];
  CHECK(moved.root_translation == Vec3(1, 2, 3));
  CHECK((moved.rotations[0] - Vec3(0, 0, std::numbers::pi / 2)).norm() < 1e-12);
}

TEST_CASE("root without position channels sits at its offset") {
  const BvhDocument doc = load_bvh(kFixtures / "chain_yxz_rootrot.bvh");
  CHECK_FALSE(doc.channels[0].has_position());
  for (const Pose& p : doc.clip.frames) {
    CHECK(p.root_translation == doc.skeleton.offset(0));
  }
}

TEST_CASE("structured parse errors") {
  SUBCASE("row arity names the line") {
    const std::string bad = replace(kMinimal, "1 2 3 90 0 0 0 0 0", "1 2 3 90 0 0 0 0");
    CHECK(parse_error_line(bad) == 20);
  }
  SUBCASE("unknown channel") {
    CHECK(parse_error_line(replace(kMinimal, "Xrotation Yrotation\n    End", "Xrotation Wrotation\n    End")) == 9);
  }
  SUBCASE("missing motion") {
    const std::string text = kMinimal;
    CHECK_THROWS_AS(parse_bvh(text.substr(0, text.find("MOTION"))), ParseError);
  }
  SUBCASE("non-numeric literal") {
    CHECK(parse_error_line(replace(kMinimal, "OFFSET 0 10 0", "OFFSET 0 ten 0")) == 8);
    CHECK(parse_error_line(replace(kMinimal, "1 2 3 90", "1 2 3 nan")) == 20);
  }
  SUBCASE("unexpected token") {
    CHECK(parse_error_line(replace(kMinimal, "JOINT Spine", "BONE Spine")) == 6);
  }
  SUBCASE("frame count mismatch") {
    CHECK_THROWS_AS(parse_bvh(replace(kMinimal, "Frames: 2", "Frames: 3")), ParseError);
  }
  SUBCASE("two rotation channels") {
    CHECK_THROWS_AS(
        parse_bvh(replace(kMinimal, "CHANNELS 3 Zrotation Xrotation Yrotation", "CHANNELS 2 Zrotation Xrotation")),
        ParseError);
  }
  SUBCASE("every prefix fails cleanly") {
    const std::string text = kMinimal;
    for (std::size_t cut = 0; cut + 1 < text.size(); cut += 3) {
      try {
        parse_bvh(text.substr(0, cut));
      } catch (const ParseError&) {
      }
    }
  }
  SUBCASE("column is reported") {
    try {
      parse_bvh(replace(kMinimal, "OFFSET 0 10 0", "OFFSET 0 ten 0"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.column() == 14);
    }
  }
}

TEST_CASE("fixture corpus round-trips") {
  const auto files = fixture_files();
  REQUIRE(files.size() >= 10);
  std::set<EulerOrder> orders;
  bool six_channel_root = false;
  bool end_sites = false;
  for (const auto& path : files) {
    CAPTURE(path.filename().string());
    const BvhDocument doc = load_bvh(path);
    for (const auto& c : doc.channels) {
      if (c.has_rotation()) {
        orders.insert(c.rotation_order());
      }
    }
    six_channel_root = six_channel_root || doc.channels[0].channels.size() == 6;
    for (const auto& e : doc.end_sites) {
      end_sites = end_sites || e.has_value();
    }

    const std::string text = write_bvh(doc);
    const BvhDocument again = parse_bvh(text);
    REQUIRE(again.skeleton.size() == doc.skeleton.size());
    CHECK(again.skeleton.joint_names() == doc.skeleton.joint_names());
    CHECK(again.skeleton.parents() == doc.skeleton.parents());
    REQUIRE(again.clip.frame_count() == doc.clip.frame_count());
    CHECK(max_rotation_gap_deg(doc.clip, again.clip) < 1e-4);
    for (std::size_t j = 0; j < doc.skeleton.size(); ++j) {
      CHECK((again.skeleton.offset(j) - doc.skeleton.offset(j)).norm() < 1e-5);
      CHECK(again.channels[j].channels == doc.channels[j].channels);
      CHECK(again.end_sites[j].has_value() == doc.end_sites[j].has_value());
    }
    for (std::size_t t = 0; t < doc.clip.frame_count(); ++t) {
      CHECK((again.clip.frames[t].root_translation - doc.clip.frames[t].root_translation).norm() < 1e-5);
    }
    // The writer is a fixed point after one pass.
    CHECK(write_bvh(again) == text);
  }
  CHECK(orders.size() == 6);
  CHECK(six_channel_root);
  CHECK(end_sites);
}

TEST_CASE("non-root position channels survive a round trip") {
  const BvhDocument doc = load_bvh(kFixtures / "child_positions.bvh");
  REQUIRE(doc.joint_translations.size() == doc.clip.frame_count());
  const BvhDocument again = parse_bvh(write_bvh(doc));
  for (std::size_t t = 0; t < doc.clip.frame_count(); ++t) {
    CHECK((again.joint_translations[t][1] - doc.joint_translations[t][1]).norm() < 1e-5);
  }
}

TEST_CASE("writer layout rules and golden output") {
  const Skeleton s = Skeleton::create({"Hips", "Spine", "Head"}, {-1, 0, 1}, {Vec3::Zero(), Vec3(0, 1, 0), Vec3(0, 0.5, 0)});
  AnimationClip clip;
  clip.frames.push_back(Pose::identity(3));
  Pose moved = Pose::identity(3);
  moved.root_translation = Vec3(0.25, 1.0, -0.5);
  moved.rotations[1] = Vec3(0, 0, std::numbers::pi / 6);
  moved.rotations[2] = Vec3(-0.0000001, 0, 0);
  clip.frames.push_back(moved);
  const std::string text = write_bvh(make_bvh_document(s, clip));
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find("CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation") != std::string::npos);
  CHECK(text.find("CHANNELS 3 Zrotation Xrotation Yrotation") != std::string::npos);
  CHECK(text.find("-0.000000") == std::string::npos);
  if (std::getenv("RIGFIT_UPDATE_GOLDEN")) {
    std::ofstream(kGolden / "writer_three_joint.bvh", std::ios::binary) << text;
  }
  CHECK(text == slurp(kGolden / "writer_three_joint.bvh"));

  AnimationClip one;
  one.frames.push_back(Pose::identity(3));
  const BvhDocument single = parse_bvh(write_bvh(make_bvh_document(s, one)));
  CHECK(single.clip.frame_count() == 1);

  AnimationClip broken = clip;
  broken.frames[1].rotations.pop_back();
  CHECK_THROWS_AS(write_bvh(make_bvh_document(s, broken)), ValidationError);
}

TEST_CASE("file errors are io errors") {
  CHECK_THROWS_AS(load_bvh(kFixtures / "does_not_exist.bvh"), IoError);
}

} // TEST_SUITE
