#pragma once

// Point-by-point damped least-squares IK chained along a goal path.
//
// Each goal point is solved from the previous solution (warm start). The task
// vector stacks the position error (cm) and a weighted direction error:
//   e = [P_target - P ; w (d_target - d)]
// and each inner step is dtheta = J^T (J J^T + lambda^2 I)^-1 e, capped per
// joint and clamped to the joint limits.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "armtraj/autodiff.hpp"
#include "armtraj/kinematics.hpp"
#include "armtraj/optimizer.hpp"
#include "armtraj/pathgen.hpp"

namespace armtraj {

struct IkTarget {
  Vec3d position{};
  std::optional<Vec3d> direction;  // unit; absent for position-only targets
};

struct IkConfig {
  double damping = 0.1;
  std::size_t max_iterations = 200;
  double position_tolerance_cm = 0.01;
  double direction_tolerance = 1e-4;
  double orientation_weight = 1.0;
  double max_step_deg = 5.0;          // per inner iteration
  double max_point_change_deg = 45.0;  // per goal point, from the warm start
};

enum class PathOrder { forward, backward };

struct IkPointReport {
  std::size_t step = 0;
  bool reached = false;
  bool singular = false;
  double position_error_cm = 0.0;
  double direction_error = 0.0;
  std::size_t iterations = 0;
};

struct BaselineResult {
  TrajectorySolution solution;
  std::vector<IkPointReport> points;
};

/// 6 x m (or 3 x m) task Jacobian of [position; direction] in cm/deg and 1/deg.
inline Eigen::MatrixXd task_jacobian(const KinematicChain& chain, const Pose& pose, bool with_direction,
                                     EffectorState<double>* state = nullptr) {
  ad::Tape tape;
  std::vector<ad::Var> q;
  q.reserve(pose.size());
  for (double a : pose) q.push_back(tape.variable(a));
  const auto s = fk_diff(chain, q);
  const Eigen::Index rows = with_direction ? 6 : 3;
  Eigen::MatrixXd jac(rows, static_cast<Eigen::Index>(pose.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const ad::Var& out = r < 3 ? s.position[static_cast<std::size_t>(r)] : s.direction[static_cast<std::size_t>(r - 3)];
    const ad::Gradients g = tape.backward(out);
    for (std::size_t j = 0; j < q.size(); ++j) jac(r, static_cast<Eigen::Index>(j)) = g[q[j]];
  }
  if (state) {
    for (std::size_t c = 0; c < 3; ++c) {
      state->position[c] = s.position[c].value();
      state->direction[c] = s.direction[c].value();
    }
  }
  return jac;
}

/// Solves one target starting from `pose`, which is updated in place.
inline IkPointReport solve_ik_point(const KinematicChain& chain, Pose& pose, const IkTarget& target,
                                    const IkConfig& cfg) {
  IkPointReport rep;
  const bool with_dir = target.direction.has_value();
  const Eigen::Index rows = with_dir ? 6 : 3;
  const auto& limits = chain.joints();
  const double lambda2 = cfg.damping * cfg.damping;
  const Pose warm = pose;

  auto errors = [&](const EffectorState<double>& s) {
    rep.position_error_cm = norm(target.position - s.position);
    rep.direction_error = with_dir ? norm(*target.direction - s.direction) : 0.0;
  };
  auto done = [&] {
    return rep.position_error_cm <= cfg.position_tolerance_cm && rep.direction_error <= cfg.direction_tolerance;
  };

  errors(fk(chain, pose));
  while (!done() && rep.iterations < cfg.max_iterations) {
    EffectorState<double> s;
    Eigen::MatrixXd jac = task_jacobian(chain, pose, with_dir, &s);
    Eigen::VectorXd e(rows);
    for (Eigen::Index r = 0; r < 3; ++r) e(r) = target.position[static_cast<std::size_t>(r)] - s.position[static_cast<std::size_t>(r)];
    if (with_dir) {
      jac.bottomRows(3) *= cfg.orientation_weight;
      for (Eigen::Index r = 0; r < 3; ++r) {
        e(3 + r) = cfg.orientation_weight *
                   ((*target.direction)[static_cast<std::size_t>(r)] - s.direction[static_cast<std::size_t>(r)]);
      }
    }
    const Eigen::MatrixXd jjt = jac * jac.transpose() + lambda2 * Eigen::MatrixXd::Identity(rows, rows);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(jjt);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      rep.singular = true;
      break;
    }
    const Eigen::VectorXd step = jac.transpose() * ldlt.solve(e);
    if (!step.allFinite()) {
      rep.singular = true;
      break;
    }
    double moved = 0.0;
    for (std::size_t j = 0; j < pose.size(); ++j) {
      const double d = std::clamp(step(static_cast<Eigen::Index>(j)), -cfg.max_step_deg, cfg.max_step_deg);
      double next = std::clamp(pose[j] + d, warm[j] - cfg.max_point_change_deg, warm[j] + cfg.max_point_change_deg);
      next = std::clamp(next, limits[j].min_deg, limits[j].max_deg);
      moved = std::max(moved, std::abs(next - pose[j]));
      pose[j] = next;
    }
    ++rep.iterations;
    errors(fk(chain, pose));
    if (moved < 1e-12) break;  // stuck on limits or at a stationary point
  }
  rep.reached = rep.position_error_cm <= cfg.position_tolerance_cm;
  return rep;
}

/// Walks the goal points in `order`, each solved from the previous solution.
/// The direction target at point i is the normalized v^g_min(i, n-1).
inline BaselineResult ik_step_chain(const KinematicChain& chain, const Pose& seed, const GoalPath& goal,
                                    PathOrder order, const IkConfig& cfg = {}) {
  if (!chain.within_limits(seed, 1e-9)) throw std::invalid_argument("baseline seed pose outside joint limits");
  if (goal.points.empty()) throw std::invalid_argument("goal path has no points");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t count = goal.points.size();
  BaselineResult out;
  out.solution.poses.assign(count, Pose{});
  out.points.resize(count);
  Pose current = seed;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = order == PathOrder::forward ? k : count - 1 - k;
    IkTarget target{goal.points[i], std::nullopt};
    if (!goal.vectors.empty()) target.direction = normalized(goal.vectors[std::min(i, goal.vectors.size() - 1)]);
    IkPointReport rep = solve_ik_point(chain, current, target, cfg);
    rep.step = i;
    out.points[i] = rep;
    out.solution.poses[i] = current;
    out.solution.iterations += rep.iterations;
  }
  out.solution.states = fk_batch(chain, out.solution.poses);
  out.solution.converged =
      std::all_of(out.points.begin(), out.points.end(), [](const IkPointReport& r) { return r.reached; });
  out.solution.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace armtraj
