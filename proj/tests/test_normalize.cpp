#include "rigfit/normalize.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

using namespace rigfit;

namespace {

JointTrajectory make_traj(std::vector<Vec3List> frames) {
  JointTrajectory traj;
  traj.mask.assign(frames.front().size(), true);
  traj.frames = std::move(frames);
  return traj;
}

JointTrajectory random_traj(oracle::Rng& rng, std::size_t frames, std::size_t joints, double scale) {
  std::vector<Vec3List> rows(frames);
  for (auto& row : rows) {
    for (std::size_t j = 0; j < joints; ++j) {
      row.push_back(rng.vec(scale) + Vec3(3, -2, 7));
    }
  }
  return make_traj(rows);
}

} // namespace

TEST_SUITE("normalize") {

TEST_CASE("rest normalization halves offsets for extent 2") {
  const Skeleton s = Skeleton::create(
      {"r", "a", "b"}, {-1, 0, 0}, {Vec3::Zero(), Vec3(2, 0, 0), Vec3(0, 1, 0)});
  const RestNormalization n = rest_normalize(s);
  CHECK(n.transform.scale == doctest::Approx(0.5));
  CHECK(n.transform.center == Vec3::Zero());
  CHECK(n.skeleton.offset(1).isApprox(Vec3(1, 0, 0)));
  CHECK(n.skeleton.offset(2).isApprox(Vec3(0, 0.5, 0)));
  CHECK(bounding_box(rest_pose_positions(n.skeleton)).max_extent() == doctest::Approx(1.0));
}

TEST_CASE("unit-extent rest pose is left alone") {
  const Skeleton s = Skeleton::create({"r", "a"}, {-1, 0}, {Vec3::Zero(), Vec3(0, 0, 1)});
  CHECK(rest_normalize(s).transform.is_identity());
}

TEST_CASE("single joint rest pose is degenerate") {
  const Skeleton s = Skeleton::create({"r"}, {-1}, {Vec3::Zero()});
  CHECK_THROWS_AS(rest_normalize(s), ValidationError);
}

TEST_CASE("end sites enter the rest box") {
  const BvhDocument doc = load_bvh(std::filesystem::path(RIGFIT_FIXTURE_DIR) / "two_joint.bvh");
  NormalizationTransform transform;
  const BvhDocument scaled = rest_normalize(doc, &transform);
  // Spine at 10 plus an End Site 8 further: extent 18.
  CHECK(transform.scale == doctest::Approx(1.0 / 18.0));
  Vec3List points = rest_pose_positions(scaled.skeleton);
  for (const Vec3& e : end_site_rest_positions(scaled)) {
    points.push_back(e);
  }
  CHECK(bounding_box(points).max_extent() == doctest::Approx(1.0));
  CHECK(scaled.end_sites[1]->isApprox(Vec3(0, 8.0 / 18.0, 0)));
}

TEST_CASE("translation removal") {
  oracle::Rng rng(31);
  JointTrajectory centered = random_traj(rng, 4, 3, 1.0);
  for (auto& row : centered.frames) {
    const Vec3 root = row[0];
    for (auto& p : row) {
      p -= root;
    }
  }
  const TranslationRemoval same = remove_global_translation(centered);
  CHECK(same.trajectory.frames == centered.frames);

  const JointTrajectory shifted = make_traj({{Vec3(1, 2, 3), Vec3(1, 2, 3)}, {Vec3(1, 2, 3), Vec3(1, 2, 3)}});
  const TranslationRemoval removed = remove_global_translation(shifted);
  for (const auto& row : removed.trajectory.frames) {
    for (const auto& p : row) {
      CHECK(p == Vec3::Zero());
    }
  }
  CHECK(removed.root_positions == Vec3List{Vec3(1, 2, 3), Vec3(1, 2, 3)});

  const JointTrajectory raw = random_traj(rng, 5, 4, 10.0);
  const TranslationRemoval r = remove_global_translation(raw, 2);
  const JointTrajectory back = reattach_global_translation(r.trajectory, r.root_positions);
  for (std::size_t t = 0; t < raw.frames.size(); ++t) {
    CHECK(r.trajectory.frames[t][2] == Vec3::Zero());
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK((back.frames[t][j] - raw.frames[t][j]).norm() < 1e-12);
    }
  }

  JointTrajectory masked_root = raw;
  masked_root.mask[0] = false;
  CHECK_THROWS_AS(remove_global_translation(masked_root), ValidationError);
}

TEST_CASE("sequence normalization hand example") {
  const JointTrajectory traj = make_traj({{Vec3(-2, 0, 0), Vec3(6, 0, 0)}, {Vec3(0, 0, 0), Vec3(1, 0, 0)}});
  const SequenceNormalization n = sequence_normalize(traj);
  CHECK(n.transform.center.isApprox(Vec3(2, 0, 0)));
  CHECK(n.transform.scale == doctest::Approx(0.25));
  CHECK(n.trajectory.frames[0][0].isApprox(Vec3(-1, 0, 0)));
  CHECK(n.trajectory.frames[0][1].isApprox(Vec3(1, 0, 0)));
}

TEST_CASE("already normalized sequences map to themselves") {
  const JointTrajectory traj = make_traj({{Vec3(-1, 0.3, -0.5), Vec3(1, -0.3, 0.5)}});
  CHECK(sequence_normalize(traj).transform.is_identity());
}

TEST_CASE("degenerate sequence") {
  const JointTrajectory traj = make_traj({{Vec3(1, 1, 1), Vec3(1, 1, 1)}});
  CHECK_THROWS_AS(sequence_normalize(traj), ValidationError);
}

TEST_CASE("normalization properties on random sequences") {
  oracle::Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    JointTrajectory traj = random_traj(rng, rng.integer(1, 10), rng.integer(3, 8), rng.uniform(0.1, 50.0));
    // A masked joint far outside the box must not move it.
    traj.mask.back() = false;
    for (auto& row : traj.frames) {
      row.back() = Vec3(1e6, -1e6, 1e6);
    }
    const NormalizedSequence n = normalize_sequence(traj);
    double extreme = 0.0;
    for (const auto& row : n.trajectory.frames) {
      for (std::size_t j = 0; j + 1 < row.size(); ++j) {
        CHECK(row[j].cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
        extreme = std::max(extreme, row[j].cwiseAbs().maxCoeff());
      }
    }
    CHECK(extreme == doctest::Approx(1.0).epsilon(1e-9));

    // Uniform: distance ratios survive.
    const auto& a = traj.frames.front();
    const auto& b = n.trajectory.frames.front();
    CHECK(
        (b[1] - b[0]).norm() / (a[1] - a[0]).norm() ==
        doctest::Approx(n.transform.scale).epsilon(1e-9));

    const JointTrajectory back = denormalize_sequence(n);
    for (std::size_t t = 0; t < traj.frames.size(); ++t) {
      for (std::size_t j = 0; j + 1 < traj.frames[t].size(); ++j) {
        CHECK((back.frames[t][j] - traj.frames[t][j]).norm() <= 1e-9 * std::max(1.0, traj.frames[t][j].norm()));
      }
    }
  }
}

} // TEST_SUITE
