#pragma once

// Goal paths: n+1 goal points and n goal direction vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "armtraj/kinematics.hpp"
#include "armtraj/robot_model.hpp"

namespace armtraj {

class PathError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GoalPath {
  std::vector<Vec3d> points;   // n + 1 goal points, cm
  std::vector<Vec3d> vectors;  // n goal vectors

  std::size_t segments() const { return vectors.size(); }
};

struct LineShape {};

/// A 2-D drawing (e.g. a letter) laid onto a plane through the anchor point.
/// The first vertex lands on the anchor; +u runs along `up x normal`, +v along
/// the component of world +z orthogonal to the normal.
struct PolylineShape {
  std::vector<std::array<double, 2>> points;
  Vec3d normal{-1.0, 0.0, 0.0};
  double scale = 1.0;
};

/// Natural cubic spline through P_s, the control points, and P_e.
struct SplineShape {
  std::vector<Vec3d> control;
};

using ShapeSpec = std::variant<LineShape, PolylineShape, SplineShape>;

namespace detail {

inline GoalPath with_difference_vectors(std::vector<Vec3d> points) {
  GoalPath g;
  g.points = std::move(points);
  for (std::size_t i = 0; i + 1 < g.points.size(); ++i) g.vectors.push_back(g.points[i + 1] - g.points[i]);
  return g;
}

// Splits `samples` segments over edges proportionally to length (largest
// remainder, every edge at least one) so vertices stay on the resampled path.
inline std::vector<std::size_t> allocate_segments(const std::vector<double>& lengths, std::size_t samples) {
  const std::size_t edges = lengths.size();
  double total = 0.0;
  for (double l : lengths) total += l;
  std::vector<std::size_t> count(edges, 1);
  std::vector<double> exact(edges);
  std::size_t used = 0;
  for (std::size_t e = 0; e < edges; ++e) {
    exact[e] = static_cast<double>(samples) * lengths[e] / total;
    count[e] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(exact[e])));
    used += count[e];
  }
  auto excess = [&](std::size_t e) { return static_cast<double>(count[e]) - exact[e]; };
  while (used < samples) {
    std::size_t best = 0;
    for (std::size_t e = 1; e < edges; ++e) {
      if (excess(e) < excess(best)) best = e;
    }
    ++count[best];
    ++used;
  }
  while (used > samples) {
    std::size_t best = edges;
    for (std::size_t e = 0; e < edges; ++e) {
      if (count[e] > 1 && (best == edges || excess(e) > excess(best))) best = e;
    }
    --count[best];
    --used;
  }
  return count;
}

// Uniform arc-length resampling of a piecewise-linear path.
inline std::vector<Vec3d> resample_uniform(const std::vector<Vec3d>& pts, std::size_t n) {
  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) cum.push_back(cum.back() + norm(pts[i + 1] - pts[i]));
  const double total = cum.back();
  std::vector<Vec3d> out;
  std::size_t seg = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    if (i == n) {
      out.push_back(pts.back());
      break;
    }
    const double s = total * static_cast<double>(i) / static_cast<double>(n);
    while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out.push_back(pts[seg] + t * (pts[seg + 1] - pts[seg]));
  }
  return out;
}

// Natural cubic spline coefficients for one coordinate over knots t.
struct CubicSpline1d {
  std::vector<double> t, a, b, c, d;

  CubicSpline1d(const std::vector<double>& knots, const std::vector<double>& y) : t(knots), a(y) {
    const std::size_t n = knots.size() - 1;
    std::vector<double> h(n), alpha(n + 1, 0.0), l(n + 1, 1.0), mu(n + 1, 0.0), z(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i] = knots[i + 1] - knots[i];
    for (std::size_t i = 1; i < n; ++i) {
      alpha[i] = 3.0 / h[i] * (y[i + 1] - y[i]) - 3.0 / h[i - 1] * (y[i] - y[i - 1]);
    }
    for (std::size_t i = 1; i < n; ++i) {
      l[i] = 2.0 * (knots[i + 1] - knots[i - 1]) - h[i - 1] * mu[i - 1];
      mu[i] = h[i] / l[i];
      z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
    }
    b.assign(n, 0.0);
    c.assign(n + 1, 0.0);
    d.assign(n, 0.0);
    for (std::size_t j = n; j-- > 0;) {
      c[j] = z[j] - mu[j] * c[j + 1];
      b[j] = (y[j + 1] - y[j]) / h[j] - h[j] * (c[j + 1] + 2.0 * c[j]) / 3.0;
      d[j] = (c[j + 1] - c[j]) / (3.0 * h[j]);
    }
  }

  double operator()(double x) const {
    std::size_t j = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), x) - t.begin());
    j = std::clamp<std::size_t>(j == 0 ? 0 : j - 1, 0, b.size() - 1);
    const double dx = x - t[j];
    return a[j] + dx * (b[j] + dx * (c[j] + dx * d[j]));
  }
};

}  // namespace detail

/// Straight line from P_s to P_e split into n equal segments.
inline GoalPath goal_points_line(const Vec3d& start, const Vec3d& end, std::size_t n) {
  if (n == 0) throw PathError("goal path needs at least one segment");
  if (start == end) throw PathError("coincident endpoints: the line has no direction");
  GoalPath g;
  g.points.reserve(n + 1);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / nn;
    g.points.push_back({start[0] + f * (end[0] - start[0]), start[1] + f * (end[1] - start[1]),
                        start[2] + f * (end[2] - start[2])});
  }
  const Vec3d v{(end[0] - start[0]) / nn, (end[1] - start[1]) / nn, (end[2] - start[2]) / nn};
  g.vectors.assign(n, v);
  return g;
}

/// In-plane basis (u, v) of a drawing plane with the given normal.
inline std::array<Vec3d, 2> plane_basis(const Vec3d& normal) {
  const Vec3d nrm = normalized(normal);
  Vec3d up{0.0, 0.0, 1.0};
  if (std::abs(dot(up, nrm)) > 0.999) up = {0.0, 1.0, 0.0};
  const Vec3d v = normalized(up - dot(up, nrm) * nrm);
  const Vec3d u = normalized(cross(v, nrm));
  return {u, v};
}

/// Lays a 2-D polyline onto the plane through `anchor` and resamples it into
/// n segments by arc length, keeping every vertex when n allows. Every goal
/// vector is the unit plane normal.
inline GoalPath goal_points_polyline(const PolylineShape& shape, const Vec3d& anchor, std::size_t n) {
  if (n == 0) throw PathError("goal path needs at least one segment");
  if (shape.points.size() < 2) throw PathError("polyline needs at least two points");
  if (!(shape.scale > 0.0)) throw PathError("polyline scale must be positive");
  if (!(norm(shape.normal) > 0.0)) throw PathError("drawing plane normal must be nonzero");
  const auto [u, v] = plane_basis(shape.normal);
  const auto& p0 = shape.points.front();
  std::vector<Vec3d> verts;
  for (const auto& p : shape.points) {
    const double a = shape.scale * (p[0] - p0[0]);
    const double b = shape.scale * (p[1] - p0[1]);
    verts.push_back(anchor + (a * u + b * v));
  }
  std::vector<double> lengths;
  for (std::size_t i = 0; i + 1 < verts.size(); ++i) lengths.push_back(norm(verts[i + 1] - verts[i]));
  double total = 0.0;
  for (double l : lengths) total += l;
  if (!(total > 0.0)) throw PathError("zero-length polyline");

  // Zero-length edges carry no samples.
  std::vector<Vec3d> kept{verts.front()};
  std::vector<double> kept_len;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] > 0.0) {
      kept.push_back(verts[i + 1]);
      kept_len.push_back(lengths[i]);
    }
  }

  GoalPath g;
  if (n >= kept_len.size()) {
    const auto counts = detail::allocate_segments(kept_len, n);
    g.points.push_back(kept.front());
    for (std::size_t e = 0; e < kept_len.size(); ++e) {
      for (std::size_t k = 1; k <= counts[e]; ++k) {
        if (k == counts[e]) {
          g.points.push_back(kept[e + 1]);
        } else {
          const double t = static_cast<double>(k) / static_cast<double>(counts[e]);
          g.points.push_back(kept[e] + t * (kept[e + 1] - kept[e]));
        }
      }
    }
  } else {
    g.points = detail::resample_uniform(kept, n);
  }
  g.vectors.assign(n, normalized(shape.normal));
  return g;
}

/// Spline through P_s, the control points and P_e, resampled to n equal arcs.
inline GoalPath goal_points_spline(const SplineShape& shape, const Vec3d& start, const Vec3d& end, std::size_t n,
                                   std::size_t dense_per_span = 2000) {
  if (n == 0) throw PathError("goal path needs at least one segment");
  std::vector<Vec3d> knots{start};
  knots.insert(knots.end(), shape.control.begin(), shape.control.end());
  knots.push_back(end);
  std::vector<double> t{0.0};
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double chord = norm(knots[i + 1] - knots[i]);
    if (!(chord > 0.0)) throw PathError("spline has coincident consecutive knots");
    t.push_back(t.back() + chord);
  }
  std::array<std::vector<double>, 3> coord;
  for (const Vec3d& k : knots) {
    for (int c = 0; c < 3; ++c) coord[c].push_back(k[c]);
  }
  const detail::CubicSpline1d sx(t, coord[0]), sy(t, coord[1]), sz(t, coord[2]);
  const std::size_t dense = dense_per_span * (knots.size() - 1);
  std::vector<Vec3d> curve;
  curve.reserve(dense + 1);
  for (std::size_t i = 0; i <= dense; ++i) {
    const double x = i == dense ? t.back() : t.back() * static_cast<double>(i) / static_cast<double>(dense);
    curve.push_back({sx(x), sy(x), sz(x)});
  }
  curve.front() = start;
  curve.back() = end;
  return detail::with_difference_vectors(detail::resample_uniform(curve, n));
}

/// Goal path anchored at P_s (and P_e where the shape has an end).
inline GoalPath build_goal_path(const ShapeSpec& shape, const Vec3d& start, const Vec3d& end, std::size_t n) {
  if (std::holds_alternative<LineShape>(shape)) return goal_points_line(start, end, n);
  if (const auto* poly = std::get_if<PolylineShape>(&shape)) return goal_points_polyline(*poly, start, n);
  return goal_points_spline(std::get<SplineShape>(shape), start, end, n);
}

/// Per-segment joint speeds in deg/s; each segment lasts duration_ms / n.
inline std::vector<std::vector<double>> angular_velocities(const std::vector<Pose>& trajectory, double duration_ms) {
  if (!(duration_ms > 0.0)) throw PathError("duration must be positive");
  if (trajectory.size() < 2) throw PathError("trajectory needs at least two poses");
  const std::size_t n = trajectory.size() - 1;
  const double segment_s = duration_ms / static_cast<double>(n) / 1000.0;
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (trajectory[i].size() != trajectory[0].size() || trajectory[i + 1].size() != trajectory[0].size()) {
      throw PathError("ragged trajectory at row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < trajectory[i].size(); ++j) {
      out[i].push_back((trajectory[i + 1][j] - trajectory[i][j]) / segment_s);
    }
  }
  return out;
}

/// Shape file: {"kind": "line"} | {"kind": "polyline", "points": [[u, v], ...],
/// "normal": [x, y, z], "scale": s} | {"kind": "spline", "control": [[x, y, z], ...]}.
inline ShapeSpec parse_shape(const std::string& text, const std::string& origin = "<shape>") {
  using detail::ojson;
  const ojson doc = detail::parse_json(text, origin);
  const std::string kind = detail::string_field(doc, "kind", origin);
  if (kind == "line") return LineShape{};
  if (kind == "polyline") {
    PolylineShape s;
    const ojson& pts = detail::field(doc, "points", origin);
    if (!pts.is_array()) throw ModelError(origin + ".points: expected an array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto where = origin + ".points[" + std::to_string(i) + "]";
      if (!pts[i].is_array() || pts[i].size() != 2) throw ModelError(where + ": expected [u, v]");
      s.points.push_back({detail::number(pts[i][0], where), detail::number(pts[i][1], where)});
    }
    if (auto it = doc.find("normal"); it != doc.end()) s.normal = detail::vec3(*it, origin + ".normal");
    s.scale = detail::number_or(doc, "scale", 1.0, origin);
    if (s.points.size() < 2) throw ModelError(origin + ".points: polyline needs at least two points");
    if (!(norm(s.normal) > 0.0)) throw ModelError(origin + ".normal: must be nonzero");
    return s;
  }
  if (kind == "spline") {
    SplineShape s;
    const ojson& ctl = detail::field(doc, "control", origin);
    if (!ctl.is_array()) throw ModelError(origin + ".control: expected an array");
    for (std::size_t i = 0; i < ctl.size(); ++i) {
      s.control.push_back(detail::vec3(ctl[i], origin + ".control[" + std::to_string(i) + "]"));
    }
    return s;
  }
  throw ModelError(origin + ".kind: unknown shape kind '" + kind + "'");
}

inline ShapeSpec load_shape(const std::string& path) { return parse_shape(detail::read_text(path), path); }

}  // namespace armtraj
