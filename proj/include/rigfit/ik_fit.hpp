#pragma once

#include "rigfit/skeleton.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace rigfit {

struct FitConfig {
  double lambda_prior = 1e-3;
  double lambda_twist = 1e-2;
  int max_iters = 200;
  // Stop once the gradient infinity-norm drops below this.
  double grad_tol = 1e-6;
  double step_init = 1e-1;
  // When set, the root translation joins the optimized parameters. It is
  // always initialized from the trajectory's root joint.
  bool fit_root_translation = false;

  /// Throws ValidationError for negative weights or non-positive budgets.
  void validate() const;
};

struct FitDiagnostic {
  enum class Kind {
    // Observed child coincides with its parent; the joint kept its fallback rotation.
    DegenerateBone,
    // Cross-covariance of a branching joint vanished.
    DegenerateProcrustes,
    // Root joint is masked out; translation carried over instead of observed.
    MissingRoot,
  };

  Kind kind;
  std::size_t joint;
  std::string message;
};

std::string to_string(FitDiagnostic::Kind kind);

struct GeometricInit {
  Pose pose;
  std::vector<FitDiagnostic> diagnostics;
};

/// Closed-form per-frame IK. Joints are visited parent first; a joint with one
/// observable child bone gets the minimal rotation aligning that bone, a joint
/// with several gets the Procrustes fit over all of them, both expressed in the
/// parent's accumulated world frame. Joints with nothing to align keep identity.
/// `fallback` supplies rotations for degenerate joints (the previous frame's solution).
GeometricInit geometric_init_frame(
    const Skeleton& skeleton,
    std::span<const Vec3> target,
    const std::vector<bool>& mask,
    const Pose* fallback = nullptr);

struct LossTerms {
  double total = 0.0;
  double pos = 0.0;
  double prior = 0.0;
  double twist = 0.0;
};

/// total = pos + lambda_prior * prior + lambda_twist * twist, where
///   pos   = mean over valid joints of |FK(theta)_i - target_i|^2
///   prior = (1/N) sum |theta_i - theta_geo_i|^2
///   twist = (1/N) sum (theta_i . u_i)^2, u_i the unit rest direction of the
/// bone joint i swings: its only non-zero-length child's offset, or its own
/// offset for a leaf. Branching joints and the rest carry no twist term.
LossTerms fit_loss(
    const Skeleton& skeleton,
    const Pose& pose,
    std::span<const Vec3> target,
    std::span<const Vec3> theta_geo,
    const std::vector<bool>& mask,
    const FitConfig& config);

/// d(total)/d(theta) stacked per joint (3N), followed by the root translation
/// gradient (3 more entries) when config.fit_root_translation is set.
Eigen::VectorXd fit_loss_gradient(
    const Skeleton& skeleton,
    const Pose& pose,
    std::span<const Vec3> target,
    std::span<const Vec3> theta_geo,
    const std::vector<bool>& mask,
    const FitConfig& config);

enum class StopReason { GradientTolerance, MaxIterations, StepUnderflow };

struct FrameFitResult {
  Pose pose;
  LossTerms final_loss;
  // Loss at the pose the descent started from.
  LossTerms start_loss;
  int iterations_used = 0;
  // Closed-form estimate the prior is anchored to.
  Pose init_pose;
  // Objective value of every accepted iterate, starting point included.
  std::vector<double> accepted_losses;
  StopReason stop = StopReason::MaxIterations;
};

/// Gradient descent from `start` with Barzilai-Borwein trial steps; a trial
/// step is halved until the objective strictly decreases, so accepted losses
/// never increase. Returns the last accepted iterate with canonical axis-angles.
FrameFitResult refine_frame(
    const Skeleton& skeleton,
    std::span<const Vec3> target,
    const Pose& start,
    const Pose& init_pose,
    const std::vector<bool>& mask,
    const FitConfig& config);

struct SequenceFit {
  AnimationClip clip;
  std::vector<FrameFitResult> frames;
  std::vector<std::vector<FitDiagnostic>> diagnostics;
};

/// Frame 0 starts from its own closed-form estimate; frame t > 0 starts from
/// the solution of frame t - 1 while its prior stays anchored to frame t's estimate.
/// Throws ValidationError on a joint-count mismatch or an invalid trajectory.
SequenceFit fit_sequence(const Skeleton& skeleton, const JointTrajectory& trajectory, const FitConfig& config);

} // namespace rigfit
