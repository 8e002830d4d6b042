#pragma once

// Whole-trajectory generation through differentiable forward kinematics.
//
// The (n+1) x m joint angles of a trajectory are parameterized by logits z.
// Each angle is theta = theta_min + sigmoid(z) * (theta_max - theta_min), so
// every iterate stays strictly inside the joint range while the gradient never
// vanishes at a clip. All poses are pushed through fk at once, scored by a
// seven-term loss, and the logits are updated by Adam.
//
// Units are mixed on purpose: positions in cm, angles in degrees. The default
// weights are tuned for exactly these units.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "armtraj/autodiff.hpp"
#include "armtraj/kinematics.hpp"
#include "armtraj/pathgen.hpp"

namespace armtraj {

using LogitMatrix = std::vector<std::vector<double>>;

inline constexpr std::size_t kLossTerms = 7;

struct LossWeights {
  // position, orientation, start pose, end pose, start point, end point, fluency
  std::array<double, kLossTerms> c{1.0, 50.0, 5.0, 100.0, 10.0, 200.0, 1.0};

  void validate(bool allow_all_zero = false) const {
    bool any = false;
    for (double w : c) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and >= 0");
      any = any || w > 0.0;
    }
    if (!any && !allow_all_zero) throw std::invalid_argument("at least one loss weight must be positive");
  }
  bool operator==(const LossWeights&) const = default;
};

struct OptimizerConfig {
  double learning_rate = 0.1;
  std::size_t max_iterations = 20000;
  // Converged once the largest per-iteration angle change (deg) stays below
  // stop_angle_delta for stop_patience consecutive iterations.
  double stop_angle_delta = 1e-3;
  std::size_t stop_patience = 10;
  std::optional<double> stop_loss;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("Adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  }
};

template <typename T>
struct LossValue {
  T total{};
  std::array<T, kLossTerms> terms{};
};

struct LossTrace {
  double total = 0.0;
  std::array<double, kLossTerms> terms{};
};

struct TrajectorySolution {
  std::vector<Pose> poses;
  std::vector<EffectorState<double>> states;
  std::vector<LossTrace> loss_trace;
  std::size_t iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Maps one logit into the open interval (min, max).
template <typename T>
T angle_from_logit(const T& z, const Joint& limits) {
  const double range = limits.max_deg - limits.min_deg;
  T theta = sigmoid(z) * range + limits.min_deg;
  // Saturated sigmoids round onto the bounds; shift back by a constant so the
  // derivative is untouched.
  const double v = value_of(theta);
  const double hi = std::nextafter(limits.max_deg, limits.min_deg);
  const double lo = std::nextafter(limits.min_deg, limits.max_deg);
  if (v > hi) theta = theta - (v - hi);
  if (v < lo) theta = theta + (lo - v);
  return theta;
}

inline std::vector<Pose> angles_from_logits(const LogitMatrix& z, std::span<const Joint> limits) {
  std::vector<Pose> out;
  out.reserve(z.size());
  for (const auto& row : z) {
    if (row.size() != limits.size()) throw std::invalid_argument("logit row width differs from joint count");
    Pose p(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) p[j] = angle_from_logit(row[j], limits[j]);
    out.push_back(std::move(p));
  }
  return out;
}

inline constexpr double kInitClamp = 1e-4;

/// Inverse of the range mapping, with the fraction clamped to [1e-4, 1 - 1e-4].
inline double logit_for_angle(double theta, const Joint& limits) {
  constexpr double tol = 1e-9;
  if (theta < limits.min_deg - tol || theta > limits.max_deg + tol) {
    throw std::invalid_argument("angle " + std::to_string(theta) + " outside limits of joint '" + limits.name + "'");
  }
  const double r = std::clamp((theta - limits.min_deg) / (limits.max_deg - limits.min_deg), kInitClamp, 1.0 - kInitClamp);
  return std::log(r / (1.0 - r));
}

/// Logits of the pose-space interpolation start + (i/n)(end - start).
inline LogitMatrix init_logits(const Pose& start, const Pose& end, std::size_t n, std::span<const Joint> limits) {
  if (n == 0) throw std::invalid_argument("need at least one segment");
  if (start.size() != limits.size() || end.size() != limits.size()) {
    throw std::invalid_argument("pose arity differs from joint count");
  }
  LogitMatrix z(n + 1, std::vector<double>(limits.size()));
  for (std::size_t i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n);
    for (std::size_t j = 0; j < limits.size(); ++j) {
      z[i][j] = logit_for_angle(start[j] + f * (end[j] - start[j]), limits[j]);
    }
  }
  return z;
}

/// The seven loss terms and their weighted sum. Generic over double / ad::Var.
///
///   L0 = 1/(3n+3) sum_i |P_i - P^g_i|^2
///   L1 = 1 - 1/n sum_{i<n} cos(v_i, v^g_i)
///   L2 = |p^s - p_0|^2          L3 = |p^e - p_n|^2
///   L4 = |P^g_0 - P_0|^2        L5 = |P^g_n - P_n|^2
///   L6 = 1/(nm) sum_{i<n} |p_{i+1} - p_i|^2
template <typename T>
LossValue<T> composite_loss(const std::vector<std::vector<T>>& poses, const std::vector<EffectorState<T>>& states,
                            const GoalPath& goal, const Pose& start_pose, const Pose& end_pose,
                            const LossWeights& w) {
  using std::sqrt;
  const std::size_t n = goal.segments();
  if (n == 0 || poses.size() != n + 1 || states.size() != n + 1 || goal.points.size() != n + 1) {
    throw std::invalid_argument("loss: trajectory, states and goal path sizes disagree");
  }
  const std::size_t m = poses.front().size();
  if (start_pose.size() != m || end_pose.size() != m) throw std::invalid_argument("loss: pose arity mismatch");

  auto sq_dist = [](const Vec3<T>& a, const Vec3d& b) {
    T s = square(a[0] - b[0]);
    s = s + square(a[1] - b[1]);
    return s + square(a[2] - b[2]);
  };
  auto pose_sq_dist = [m](const std::vector<T>& a, const auto& b) {
    T s = square(a[0] - b[0]);
    for (std::size_t j = 1; j < m; ++j) s = s + square(a[j] - b[j]);
    return s;
  };

  LossValue<T> out;
  T l0 = sq_dist(states[0].position, goal.points[0]);
  for (std::size_t i = 1; i <= n; ++i) l0 = l0 + sq_dist(states[i].position, goal.points[i]);
  out.terms[0] = l0 / static_cast<double>(3 * n + 3);

  T cos_sum(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3d& g = goal.vectors[i];
    const double gn = norm(g);
    if (!(gn > 1e-9)) throw std::invalid_argument("loss: goal vector " + std::to_string(i) + " has zero norm");
    const Vec3<T>& v = states[i].direction;
    const T vn2 = square(v[0]) + square(v[1]) + square(v[2]);
    if (!(value_of(vn2) > 1e-18)) throw std::invalid_argument("loss: direction " + std::to_string(i) + " has zero norm");
    const T proj = v[0] * g[0] + v[1] * g[1] + v[2] * g[2];
    cos_sum = cos_sum + proj / (sqrt(vn2) * gn);
  }
  out.terms[1] = T(1.0) - cos_sum / static_cast<double>(n);

  out.terms[2] = pose_sq_dist(poses[0], start_pose);
  out.terms[3] = pose_sq_dist(poses[n], end_pose);
  out.terms[4] = sq_dist(states[0].position, goal.points[0]);
  out.terms[5] = sq_dist(states[n].position, goal.points[n]);

  T l6 = pose_sq_dist(poses[1], poses[0]);
  for (std::size_t i = 1; i < n; ++i) l6 = l6 + pose_sq_dist(poses[i + 1], poses[i]);
  out.terms[6] = l6 / static_cast<double>(n * m);

  T total(0.0);
  for (std::size_t k = 0; k < kLossTerms; ++k) {
    if (w.c[k] != 0.0) total = total + out.terms[k] * w.c[k];
  }
  out.total = total;
  return out;
}

/// Loss of a finished trajectory in plain arithmetic.
inline LossTrace evaluate_loss(const std::vector<Pose>& poses, const std::vector<EffectorState<double>>& states,
                               const GoalPath& goal, const Pose& start_pose, const Pose& end_pose,
                               const LossWeights& w) {
  const auto v = composite_loss<double>(poses, states, goal, start_pose, end_pose, w);
  return LossTrace{v.total, v.terms};
}

namespace detail {

// Adam on a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, const OptimizerConfig& cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grad[k];
      v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
      const double mhat = m_[k] / b1t;
      const double vhat = v_[k] / b2t;
      params[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace detail

/// Gradient of the composite loss with respect to every logit, row-major.
struct LossGradient {
  LossTrace loss;
  std::vector<double> grad;
};

inline LossGradient loss_gradient(const KinematicChain& chain, const LogitMatrix& z, const GoalPath& goal,
                                  const Pose& start_pose, const Pose& end_pose, const LossWeights& w,
                                  ad::Tape& tape) {
  const std::size_t m = chain.dof();
  tape.clear();
  std::vector<std::vector<ad::Var>> logits(z.size());
  std::vector<std::vector<ad::Var>> poses(z.size());
  std::vector<EffectorState<ad::Var>> states;
  states.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    logits[i].reserve(m);
    poses[i].reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      logits[i].push_back(tape.variable(z[i][j]));
      poses[i].push_back(angle_from_logit(logits[i][j], chain.joints()[j]));
    }
    states.push_back(fk_diff(chain, poses[i]));
  }
  const auto loss = composite_loss<ad::Var>(poses, states, goal, start_pose, end_pose, w);
  LossGradient out;
  out.loss.total = loss.total.value();
  for (std::size_t k = 0; k < kLossTerms; ++k) out.loss.terms[k] = loss.terms[k].value();
  const ad::Gradients g = tape.backward(loss.total);
  out.grad.reserve(z.size() * m);
  for (const auto& row : logits) {
    for (const auto& var : row) out.grad.push_back(g[var]);
  }
  return out;
}

/// Adam loop over the logits. `z` is the initial guess.
inline TrajectorySolution optimize_logits(const KinematicChain& chain, LogitMatrix z, const GoalPath& goal,
                                          const Pose& start_pose, const Pose& end_pose, const LossWeights& w,
                                          const OptimizerConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = chain.dof();
  const auto& limits = chain.joints();

  std::vector<double> params;
  params.reserve(z.size() * m);
  for (const auto& row : z) params.insert(params.end(), row.begin(), row.end());

  detail::Adam adam(params.size(), cfg);
  ad::Tape tape;
  TrajectorySolution sol;
  std::vector<Pose> angles = angles_from_logits(z, limits);
  std::size_t calm = 0;

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    LossGradient lg;
    try {
      lg = loss_gradient(chain, z, goal, start_pose, end_pose, w, tape);
    } catch (const ad::AutodiffError& e) {
      throw DivergenceError(std::string("loss evaluation failed: ") + e.what(), iter);
    }
    if (!std::isfinite(lg.loss.total)) throw DivergenceError("loss is not finite", iter);
    sol.loss_trace.push_back(lg.loss);
    if (cfg.stop_loss && lg.loss.total <= *cfg.stop_loss) {
      sol.converged = true;
      break;
    }
    if (std::all_of(lg.grad.begin(), lg.grad.end(), [](double g) { return g == 0.0; })) {
      sol.converged = true;
      break;
    }
    for (double g : lg.grad) {
      if (!std::isfinite(g)) throw DivergenceError("gradient is not finite", iter);
    }

    adam.step(params, lg.grad);
    ++sol.iterations;
    for (std::size_t i = 0; i < z.size(); ++i) {
      std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(i * m), m, z[i].begin());
    }
    std::vector<Pose> next = angles_from_logits(z, limits);
    double max_change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) max_change = std::max(max_change, std::abs(next[i][j] - angles[i][j]));
    }
    angles = std::move(next);
    calm = max_change < cfg.stop_angle_delta ? calm + 1 : 0;
    if (calm >= cfg.stop_patience) {
      sol.converged = true;
      break;
    }
  }

  sol.poses = std::move(angles);
  sol.states = fk_batch(chain, sol.poses);
  // loss_trace[i] is the loss at iterate i, including the returned one.
  if (sol.loss_trace.size() == sol.iterations) {
    sol.loss_trace.push_back(evaluate_loss(sol.poses, sol.states, goal, start_pose, end_pose, w));
  }
  sol.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// Trajectory from p_s to p_e whose fingertip follows `shape`.
inline TrajectorySolution generate_trajectory(const KinematicChain& chain, const Pose& start_pose,
                                              const Pose& end_pose, const ShapeSpec& shape, std::size_t n,
                                              const LossWeights& w, const OptimizerConfig& cfg) {
  w.validate();
  const Vec3d ps = fk(chain, start_pose).position;
  const Vec3d pe = fk(chain, end_pose).position;
  const GoalPath goal = build_goal_path(shape, ps, pe, n);
  return optimize_logits(chain, init_logits(start_pose, end_pose, n, chain.joints()), goal, start_pose, end_pose,
                         w, cfg);
}

/// Trajectory along an absolute goal path with no start/end constraints; the
/// start/end pose and point weights are forced to zero and every row starts
/// from `initial_pose`.
inline TrajectorySolution generate_trajectory_unanchored(const KinematicChain& chain, const Pose& initial_pose,
                                                         const GoalPath& goal, LossWeights w,
                                                         const OptimizerConfig& cfg) {
  w.c[2] = w.c[3] = w.c[4] = w.c[5] = 0.0;
  w.validate(true);
  const std::size_t n = goal.segments();
  return optimize_logits(chain, init_logits(initial_pose, initial_pose, n, chain.joints()), goal, initial_pose,
                         initial_pose, w, cfg);
}

}  // namespace armtraj
