#pragma once

// Trajectory quality metrics. Everything here is a pure function of exported
// trajectory data, so a run can be re-scored from its CSV files alone.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "armtraj/kinematics.hpp"
#include "armtraj/pathgen.hpp"

namespace armtraj {

class EvaluationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mean and population standard deviation.
struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

inline std::vector<Vec3d> positions_of(const std::vector<EffectorState<double>>& states) {
  std::vector<Vec3d> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.position);
  return out;
}

inline std::vector<Vec3d> directions_of(const std::vector<EffectorState<double>>& states) {
  std::vector<Vec3d> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.direction);
  return out;
}

struct LineDistance {
  std::vector<double> per_step_mm;
  Summary stats;
};

/// Perpendicular distance (mm) of each position from the infinite line P_s P_e.
inline LineDistance distance_from_line(const std::vector<Vec3d>& positions, const Vec3d& line_start,
                                       const Vec3d& line_end) {
  const Vec3d axis = line_end - line_start;
  if (!(norm(axis) > 0.0)) throw EvaluationError("distance_from_line: coincident endpoints");
  const Vec3d u = normalized(axis);
  LineDistance out;
  out.per_step_mm.reserve(positions.size());
  for (const Vec3d& p : positions) {
    const Vec3d w = p - line_start;
    out.per_step_mm.push_back(10.0 * norm(w - dot(w, u) * u));
  }
  out.stats = summarize(out.per_step_mm);
  return out;
}

inline double angle_between_deg(const Vec3d& a, const Vec3d& b) {
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw EvaluationError("angle between vectors: zero vector");
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

struct PointingDeviation {
  std::vector<double> per_step_deg;  // steps 0..n-1
  Summary all;
  Summary settled;  // steps >= first_settled_step
  std::size_t first_settled_step = 0;
};

/// Angle between direction_i and goal vector i for i < n.
inline PointingDeviation pointing_deviation(const std::vector<Vec3d>& directions, const GoalPath& goal,
                                            std::size_t first_settled_step = 10) {
  const std::size_t n = goal.segments();
  if (directions.size() < n) throw EvaluationError("pointing_deviation: fewer directions than goal vectors");
  PointingDeviation out;
  out.first_settled_step = first_settled_step;
  out.per_step_deg.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.per_step_deg.push_back(angle_between_deg(directions[i], goal.vectors[i]));
  out.all = summarize(out.per_step_deg);
  if (first_settled_step < n) {
    out.settled = summarize(std::span<const double>(out.per_step_deg).subspan(first_settled_step));
  }
  return out;
}

/// Touch surface: a plane and the point on it that should be hit.
struct SurfaceSpec {
  Vec3d point{};
  Vec3d normal{1.0, 0.0, 0.0};
  Vec3d target{};

  void validate() const {
    if (std::abs(norm(normal) - 1.0) > 1e-9) throw EvaluationError("surface normal must be a unit vector");
    if (std::abs(dot(target - point, normal)) > 1e-9) throw EvaluationError("surface target is not on the plane");
  }
};

/// Plane through `target` with the given normal (normalized here).
inline SurfaceSpec surface_through(const Vec3d& target, const Vec3d& normal) {
  SurfaceSpec s{target, normalized(normal), target};
  return s;
}

struct FitStep {
  std::size_t step = 0;
  bool reliable = false;
  double error_cm = 0.0;  // meaningful only when reliable
};

/// Below this |cos| between the fitted line and the plane normal the
/// intersection is treated as unreliable.
inline constexpr double kParallelCos = 1e-3;

/// For each step i >= window-1, fits a 3-D line to positions i-window+1..i,
/// intersects it with the surface plane and reports the distance to the target.
inline std::vector<FitStep> pointing_error_fit(const std::vector<Vec3d>& positions, const SurfaceSpec& surface,
                                               std::size_t window = 10) {
  surface.validate();
  if (window < 2) throw EvaluationError("pointing_error_fit: window must be at least 2");
  if (positions.size() < window) throw EvaluationError("pointing_error_fit: trajectory shorter than the fit window");
  std::vector<FitStep> out;
  bool any = false;
  for (std::size_t i = window - 1; i < positions.size(); ++i) {
    FitStep fs;
    fs.step = i;
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(window), 3);
    for (std::size_t k = 0; k < window; ++k) {
      const Vec3d& p = positions[i + 1 - window + k];
      pts.row(static_cast<Eigen::Index>(k)) << p[0], p[1], p[2];
    }
    const Eigen::RowVector3d centroid = pts.colwise().mean();
    const Eigen::MatrixXd centered = pts.rowwise() - centroid;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(0) > 1e-12) {
      Eigen::Vector3d d = svd.matrixV().col(0);
      // Orient along the motion.
      if (d.dot((pts.row(static_cast<Eigen::Index>(window - 1)) - pts.row(0)).transpose()) < 0.0) d = -d;
      const Eigen::Vector3d nrm(surface.normal[0], surface.normal[1], surface.normal[2]);
      const double cosang = d.dot(nrm);
      if (std::abs(cosang) > kParallelCos) {
        const Eigen::Vector3d c = centroid.transpose();
        const Eigen::Vector3d q(surface.point[0], surface.point[1], surface.point[2]);
        const Eigen::Vector3d hit = c + d * ((q - c).dot(nrm) / cosang);
        const Eigen::Vector3d tgt(surface.target[0], surface.target[1], surface.target[2]);
        fs.reliable = true;
        fs.error_cm = (hit - tgt).norm();
        any = true;
      }
    }
    out.push_back(fs);
  }
  if (!any) throw EvaluationError("pointing_error_fit: every fitted line is parallel to the surface");
  return out;
}

/// Mean error over the reliable steps whose index lies in [first, last).
inline std::optional<double> mean_fit_error(const std::vector<FitStep>& fit, std::size_t first, std::size_t last) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const FitStep& f : fit) {
    if (f.reliable && f.step >= first && f.step < last) {
      sum += f.error_cm;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// Largest pairwise distance (mm) among start points.
inline double start_point_variation(const std::vector<Vec3d>& starts) {
  if (starts.size() < 2) throw EvaluationError("start_point_variation needs at least two start points");
  double best = 0.0;
  for (std::size_t a = 0; a < starts.size(); ++a) {
    for (std::size_t b = a + 1; b < starts.size(); ++b) best = std::max(best, norm(starts[a] - starts[b]));
  }
  return 10.0 * best;
}

/// Mean squared consecutive-pose difference, deg^2.
inline double fluency(const std::vector<Pose>& poses) {
  if (poses.size() < 2) throw EvaluationError("fluency needs at least two poses");
  const std::size_t n = poses.size() - 1;
  const std::size_t m = poses.front().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (poses[i + 1].size() != m) throw EvaluationError("fluency: ragged trajectory");
    for (std::size_t j = 0; j < m; ++j) s += (poses[i + 1][j] - poses[i][j]) * (poses[i + 1][j] - poses[i][j]);
  }
  return s / static_cast<double>(n * m);
}

/// One row of the report tables.
struct TrajectoryMetrics {
  std::string id;
  std::string method;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  double final_loss = 0.0;
  bool converged = false;
  LineDistance distance;
  PointingDeviation pointing;
  std::vector<FitStep> pointing_error;
  double start_variation_mm = 0.0;  // P_0 against the nominal start point
  double fluency = 0.0;
};

struct TrajectoryInput {
  std::string id;
  std::string method;
  std::vector<Pose> poses;
  std::vector<EffectorState<double>> states;
  GoalPath goal;
  std::optional<Vec3d> surface_normal;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  double final_loss = 0.0;
  bool converged = false;
};

inline TrajectoryMetrics evaluate_trajectory(const TrajectoryInput& in, std::size_t fit_window = 10,
                                             std::size_t first_settled_step = 10) {
  if (in.states.size() != in.goal.points.size() || in.poses.size() != in.states.size()) {
    throw EvaluationError("trajectory '" + in.id + "': poses, states and goal points disagree in length");
  }
  TrajectoryMetrics m;
  m.id = in.id;
  m.method = in.method;
  m.iterations = in.iterations;
  m.wall_seconds = in.wall_seconds;
  m.final_loss = in.final_loss;
  m.converged = in.converged;
  const auto pos = positions_of(in.states);
  const Vec3d& ps = in.goal.points.front();
  const Vec3d& pe = in.goal.points.back();
  m.distance = distance_from_line(pos, ps, pe);
  m.pointing = pointing_deviation(directions_of(in.states), in.goal, first_settled_step);
  if (in.surface_normal) m.pointing_error = pointing_error_fit(pos, surface_through(pe, *in.surface_normal), fit_window);
  m.start_variation_mm = start_point_variation({ps, pos.front()});
  m.fluency = fluency(in.poses);
  return m;
}

}  // namespace armtraj
