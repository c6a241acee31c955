#include "rigfit/ik_fit.hpp"

#include "rigfit/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rigfit {

namespace {

// Trial steps are clamped to this range.
constexpr double kMinStep = 1e-14;
constexpr double kMaxStep = 1e4;

void check_frame_inputs(
    const Skeleton& skeleton,
    const Pose& pose,
    std::span<const Vec3> target,
    std::span<const Vec3> theta_geo,
    const std::vector<bool>& mask) {
  const std::size_t n = skeleton.size();
  if (pose.rotations.size() != n || target.size() != n || theta_geo.size() != n || mask.size() != n) {
    throw ValidationError("fit inputs disagree with the skeleton joint count");
  }
}

std::size_t count_valid(const std::vector<bool>& mask) {
  const auto valid = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (valid == 0) {
    throw ValidationError("mask has no valid joint");
  }
  return valid;
}

// Axis of the bone each joint swings. A joint driving a single bone can spin
// about it without moving that bone, so that spin is what the twist term
// sees. Leaves use their own bone; branching joints have no free spin and
// get no twist term.
Vec3List twist_axes(const Skeleton& skeleton) {
  Vec3List axes(skeleton.size(), Vec3::Zero());
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    std::vector<std::size_t> driven;
    for (std::size_t c : skeleton.children(i)) {
      if (!skeleton.is_zero_length(c)) {
        driven.push_back(c);
      }
    }
    if (driven.size() == 1) {
      axes[i] = skeleton.offset(driven.front()).normalized();
    } else if (skeleton.children(i).empty() && skeleton.parent(i) != kNoParent && !skeleton.is_zero_length(i)) {
      axes[i] = skeleton.offset(i).normalized();
    }
  }
  return axes;
}

// One frame's objective with everything that stays fixed during descent.
class FrameObjective {
 public:
  FrameObjective(
      const Skeleton& skeleton,
      std::span<const Vec3> target,
      std::span<const Vec3> theta_geo,
      const std::vector<bool>& mask,
      const FitConfig& config)
      : skeleton_(skeleton),
        target_(target),
        theta_geo_(theta_geo),
        mask_(mask),
        config_(config),
        axes_(twist_axes(skeleton)),
        valid_(count_valid(mask)) {}

  std::size_t parameter_count() const {
    return 3 * skeleton_.size() + (config_.fit_root_translation ? 3 : 0);
  }

  Eigen::VectorXd pack(const Pose& pose) const {
    Eigen::VectorXd x(parameter_count());
    for (std::size_t i = 0; i < skeleton_.size(); ++i) {
      x.segment<3>(3 * i) = pose.rotations[i];
    }
    if (config_.fit_root_translation) {
      x.tail<3>() = pose.root_translation;
    }
    return x;
  }

  Pose unpack(const Eigen::VectorXd& x, const Vec3& fixed_root) const {
    Pose pose;
    pose.rotations.resize(skeleton_.size());
    for (std::size_t i = 0; i < skeleton_.size(); ++i) {
      pose.rotations[i] = x.segment<3>(3 * i);
    }
    pose.root_translation = config_.fit_root_translation ? Vec3(x.tail<3>()) : fixed_root;
    return pose;
  }

  LossTerms evaluate(const Pose& pose, Eigen::VectorXd* gradient) const {
    const std::size_t n = skeleton_.size();
    const FkResult fk = forward_kinematics_full(skeleton_, pose);
    const double inv_valid = 1.0 / static_cast<double>(valid_);
    const double inv_n = 1.0 / static_cast<double>(n);

    LossTerms loss;
    Vec3List force(n, Vec3::Zero());
    Vec3List moment(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask_[i]) {
        continue;
      }
      const Vec3 residual = fk.positions[i] - target_[i];
      loss.pos += residual.squaredNorm();
      force[i] = 2.0 * inv_valid * residual;
      moment[i] = fk.positions[i].cross(force[i]);
    }
    loss.pos *= inv_valid;

    for (std::size_t i = 0; i < n; ++i) {
      loss.prior += (pose.rotations[i] - theta_geo_[i]).squaredNorm();
      const double twist = pose.rotations[i].dot(axes_[i]);
      loss.twist += twist * twist;
    }
    loss.prior *= inv_n;
    loss.twist *= inv_n;
    loss.total = loss.pos + config_.lambda_prior * loss.prior + config_.lambda_twist * loss.twist;

    if (gradient == nullptr) {
      return loss;
    }

    // Subtree sums of dL/dP and P x dL/dP, children folded into parents.
    for (std::size_t i = n; i-- > 1;) {
      const auto p = static_cast<std::size_t>(skeleton_.parent(i));
      force[p] += force[i];
      moment[p] += moment[i];
    }

    gradient->setZero(parameter_count());
    for (std::size_t j = 0; j < n; ++j) {
      // World torque of the subtree residuals about joint j, pulled back into
      // axis-angle coordinates through the right Jacobian.
      const Vec3 torque = moment[j] - fk.positions[j].cross(force[j]);
      const Vec3& theta = pose.rotations[j];
      Vec3 g = so3_right_jacobian(theta).transpose() * (fk.global_rotations[j].transpose() * torque);
      g += 2.0 * config_.lambda_prior * inv_n * (theta - theta_geo_[j]);
      g += 2.0 * config_.lambda_twist * inv_n * theta.dot(axes_[j]) * axes_[j];
      gradient->segment<3>(3 * j) = g;
    }
    if (config_.fit_root_translation) {
      gradient->tail<3>() = force[0];
    }
    return loss;
  }

 private:
  const Skeleton& skeleton_;
  std::span<const Vec3> target_;
  std::span<const Vec3> theta_geo_;
  const std::vector<bool>& mask_;
  const FitConfig& config_;
  Vec3List axes_;
  std::size_t valid_;
};

Pose canonical(Pose pose) {
  for (Vec3& theta : pose.rotations) {
    if (theta.norm() > std::numbers::pi) {
      theta = canonicalize_axis_angle(theta);
    }
  }
  return pose;
}

} // namespace

void FitConfig::validate() const {
  if (!(lambda_prior >= 0.0) || !std::isfinite(lambda_prior)) {
    throw ValidationError("lambda_prior must be a finite nonnegative number");
  }
  if (!(lambda_twist >= 0.0) || !std::isfinite(lambda_twist)) {
    throw ValidationError("lambda_twist must be a finite nonnegative number");
  }
  if (max_iters <= 0) {
    throw ValidationError("max_iters must be positive");
  }
  if (!(grad_tol > 0.0)) {
    throw ValidationError("grad_tol must be positive");
  }
  if (!(step_init > 0.0) || !std::isfinite(step_init)) {
    throw ValidationError("step_init must be positive");
  }
}

std::string to_string(FitDiagnostic::Kind kind) {
  switch (kind) {
    case FitDiagnostic::Kind::DegenerateBone:
      return "degenerate_bone";
    case FitDiagnostic::Kind::DegenerateProcrustes:
      return "degenerate_procrustes";
    case FitDiagnostic::Kind::MissingRoot:
      return "missing_root";
  }
  return "unknown";
}

GeometricInit geometric_init_frame(
    const Skeleton& skeleton,
    std::span<const Vec3> target,
    const std::vector<bool>& mask,
    const Pose* fallback) {
  const std::size_t n = skeleton.size();
  if (target.size() != n || mask.size() != n) {
    throw ValidationError("geometric init: target/mask size does not match the skeleton");
  }
  if (fallback != nullptr && fallback->rotations.size() != n) {
    throw ValidationError("geometric init: fallback pose size does not match the skeleton");
  }

  GeometricInit out{Pose::identity(n), {}};
  if (mask[0]) {
    out.pose.root_translation = target[0];
  } else {
    out.pose.root_translation = fallback != nullptr ? fallback->root_translation : Vec3::Zero();
    out.diagnostics.push_back(
        {FitDiagnostic::Kind::MissingRoot, 0, "root joint '" + skeleton.name(0) + "' is masked out"});
  }

  Vec3List positions(n);
  std::vector<Mat3> globals(n);
  Vec3List rest_dirs;
  Vec3List obs_dirs;
  for (std::size_t j = 0; j < n; ++j) {
    const int p = skeleton.parent(j);
    const Mat3 parent_global = p == kNoParent ? Mat3::Identity() : globals[p];
    positions[j] = p == kNoParent ? out.pose.root_translation
                                  : Vec3(positions[p] + parent_global * skeleton.offset(j));
    const Vec3 base = mask[j] ? target[j] : positions[j];

    rest_dirs.clear();
    obs_dirs.clear();
    bool degenerate = false;
    for (std::size_t c : skeleton.children(j)) {
      if (skeleton.is_zero_length(c) || !mask[c]) {
        continue;
      }
      const Vec3 observed = parent_global.transpose() * (target[c] - base);
      if (observed.norm() <= kDirectionEpsilon) {
        degenerate = true;
        out.diagnostics.push_back(
            {FitDiagnostic::Kind::DegenerateBone,
             j,
             "observed bone '" + skeleton.name(j) + "' -> '" + skeleton.name(c) + "' has zero length"});
        continue;
      }
      rest_dirs.push_back(skeleton.offset(c).normalized());
      obs_dirs.push_back(observed.normalized());
    }

    Mat3 local = Mat3::Identity();
    if (rest_dirs.empty()) {
      if (degenerate && fallback != nullptr) {
        local = axis_angle_to_matrix(fallback->rotations[j]);
      }
    } else {
      const ProcrustesResult fit = orthogonal_procrustes(rest_dirs, obs_dirs);
      if (fit.degenerate) {
        out.diagnostics.push_back(
            {FitDiagnostic::Kind::DegenerateProcrustes,
             j,
             "direction covariance vanished at '" + skeleton.name(j) + "'"});
        if (fallback != nullptr) {
          local = axis_angle_to_matrix(fallback->rotations[j]);
        }
      } else {
        local = fit.rotation;
      }
    }
    globals[j] = parent_global * local;
    out.pose.rotations[j] = matrix_to_axis_angle(local);
  }
  return out;
}

LossTerms fit_loss(
    const Skeleton& skeleton,
    const Pose& pose,
    std::span<const Vec3> target,
    std::span<const Vec3> theta_geo,
    const std::vector<bool>& mask,
    const FitConfig& config) {
  check_frame_inputs(skeleton, pose, target, theta_geo, mask);
  return FrameObjective(skeleton, target, theta_geo, mask, config).evaluate(pose, nullptr);
}

Eigen::VectorXd fit_loss_gradient(
    const Skeleton& skeleton,
    const Pose& pose,
    std::span<const Vec3> target,
    std::span<const Vec3> theta_geo,
    const std::vector<bool>& mask,
    const FitConfig& config) {
  check_frame_inputs(skeleton, pose, target, theta_geo, mask);
  Eigen::VectorXd gradient;
  FrameObjective(skeleton, target, theta_geo, mask, config).evaluate(pose, &gradient);
  return gradient;
}

FrameFitResult refine_frame(
    const Skeleton& skeleton,
    std::span<const Vec3> target,
    const Pose& start,
    const Pose& init_pose,
    const std::vector<bool>& mask,
    const FitConfig& config) {
  config.validate();
  check_frame_inputs(skeleton, start, target, init_pose.rotations, mask);
  const FrameObjective objective(skeleton, target, init_pose.rotations, mask, config);

  FrameFitResult result;
  result.init_pose = init_pose;

  Eigen::VectorXd x = objective.pack(start);
  Eigen::VectorXd g;
  LossTerms loss = objective.evaluate(start, &g);
  result.start_loss = loss;
  result.accepted_losses.push_back(loss.total);

  double trial = config.step_init;
  Eigen::VectorXd g_next;
  result.stop = StopReason::MaxIterations;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < config.grad_tol) {
      result.stop = StopReason::GradientTolerance;
      break;
    }
    double step = trial;
    Eigen::VectorXd x_next;
    LossTerms next_loss;
    bool accepted = false;
    while (step >= kMinStep) {
      x_next = x - step * g;
      next_loss = objective.evaluate(objective.unpack(x_next, start.root_translation), &g_next);
      if (next_loss.total < loss.total) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.stop = StopReason::StepUnderflow;
      break;
    }

    // Barzilai-Borwein estimate of the inverse curvature along the last move.
    const Eigen::VectorXd dx = x_next - x;
    const Eigen::VectorXd dg = g_next - g;
    const double curvature = dx.dot(dg);
    trial = curvature > 0.0 ? dx.squaredNorm() / curvature : 2.0 * step;
    trial = std::clamp(trial, kMinStep, kMaxStep);

    x = std::move(x_next);
    g = g_next;
    loss = next_loss;
    result.accepted_losses.push_back(loss.total);
    ++result.iterations_used;
  }

  const Pose raw = objective.unpack(x, start.root_translation);
  result.pose = canonical(raw);
  result.final_loss = objective.evaluate(result.pose, nullptr);
  return result;
}

SequenceFit fit_sequence(const Skeleton& skeleton, const JointTrajectory& trajectory, const FitConfig& config) {
  config.validate();
  trajectory.check();
  if (trajectory.joint_count() != skeleton.size()) {
    throw ValidationError(
        "trajectory has " + std::to_string(trajectory.joint_count()) + " joints, skeleton has " +
        std::to_string(skeleton.size()));
  }

  SequenceFit out;
  out.clip.fps = trajectory.fps;
  out.clip.frames.reserve(trajectory.frame_count());
  for (std::size_t t = 0; t < trajectory.frame_count(); ++t) {
    const Vec3List& target = trajectory.frames[t];
    const Pose* previous = t == 0 ? nullptr : &out.clip.frames.back();
    GeometricInit geo = geometric_init_frame(skeleton, target, trajectory.mask, previous);

    Pose start = previous == nullptr ? geo.pose : *previous;
    start.root_translation = geo.pose.root_translation;

    FrameFitResult frame = refine_frame(skeleton, target, start, geo.pose, trajectory.mask, config);
    out.clip.frames.push_back(frame.pose);
    out.frames.push_back(std::move(frame));
    out.diagnostics.push_back(std::move(geo.diagnostics));
  }
  return out;
}

} // namespace rigfit
