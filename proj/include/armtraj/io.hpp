#pragma once

// CSV / JSON / SVG artifacts. Numbers are written in shortest round-trip form
// so a re-read trajectory is bit-identical to the one in memory.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "armtraj/evaluation.hpp"
#include "armtraj/kinematics.hpp"
#include "armtraj/optimizer.hpp"
#include "armtraj/pathgen.hpp"
#include "armtraj/robot_model.hpp"

namespace armtraj {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace csv {

inline std::string num(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_num(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw IoError(where + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace csv

/// step,theta_0..theta_{m-1},x,y,z,dx,dy,dz
inline std::string trajectory_csv(const std::vector<Pose>& poses, const std::vector<EffectorState<double>>& states) {
  if (poses.size() != states.size()) throw IoError("trajectory and states differ in length");
  std::ostringstream os;
  const std::size_t m = poses.empty() ? 0 : poses.front().size();
  os << "step";
  for (std::size_t j = 0; j < m; ++j) os << ",theta_" << j;
  os << ",x,y,z,dx,dy,dz\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    os << i;
    for (double a : poses[i]) os << ',' << csv::num(a);
    for (double c : states[i].position) os << ',' << csv::num(c);
    for (double c : states[i].direction) os << ',' << csv::num(c);
    os << '\n';
  }
  return os.str();
}

struct TrajectoryData {
  std::vector<Pose> poses;
  std::vector<EffectorState<double>> states;
};

inline TrajectoryData read_trajectory_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  std::size_t m = 0;
  while (std::find(t.header.begin(), t.header.end(), "theta_" + std::to_string(m)) != t.header.end()) ++m;
  if (m == 0) throw IoError(path + ": no theta columns");
  TrajectoryData d;
  const std::size_t cx = t.column("x"), cdx = t.column("dx");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    Pose p(m);
    for (std::size_t j = 0; j < m; ++j) p[j] = csv::parse_num(row[t.column("theta_" + std::to_string(j))], where);
    EffectorState<double> s;
    for (std::size_t c = 0; c < 3; ++c) {
      s.position[c] = csv::parse_num(row[cx + c], where);
      s.direction[c] = csv::parse_num(row[cdx + c], where);
    }
    d.poses.push_back(std::move(p));
    d.states.push_back(s);
  }
  return d;
}

/// iteration,L,L0..L6
inline std::string loss_csv(const std::vector<LossTrace>& trace) {
  std::ostringstream os;
  os << "iteration,L";
  for (std::size_t k = 0; k < kLossTerms; ++k) os << ",L" << k;
  os << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << i << ',' << csv::num(trace[i].total);
    for (double v : trace[i].terms) os << ',' << csv::num(v);
    os << '\n';
  }
  return os.str();
}

/// segment,omega_0..omega_{m-1} in deg/s.
inline std::string velocity_csv(const std::vector<std::vector<double>>& omega) {
  std::ostringstream os;
  const std::size_t m = omega.empty() ? 0 : omega.front().size();
  os << "segment";
  for (std::size_t j = 0; j < m; ++j) os << ",omega_" << j;
  os << '\n';
  for (std::size_t i = 0; i < omega.size(); ++i) {
    os << i;
    for (double w : omega[i]) os << ',' << csv::num(w);
    os << '\n';
  }
  return os.str();
}

/// step,x,y,z,vx,vy,vz; the last point has no vector and leaves those cells empty.
inline std::string goal_csv(const GoalPath& g) {
  std::ostringstream os;
  os << "step,x,y,z,vx,vy,vz\n";
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    os << i;
    for (double c : g.points[i]) os << ',' << csv::num(c);
    if (i < g.vectors.size()) {
      for (double c : g.vectors[i]) os << ',' << csv::num(c);
    } else {
      os << ",,,";
    }
    os << '\n';
  }
  return os.str();
}

inline GoalPath read_goal_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  GoalPath g;
  const std::size_t cx = t.column("x"), cv = t.column("vx");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    Vec3d p{};
    for (std::size_t c = 0; c < 3; ++c) p[c] = csv::parse_num(row[cx + c], where);
    g.points.push_back(p);
    if (!row[cv].empty()) {
      Vec3d v{};
      for (std::size_t c = 0; c < 3; ++c) v[c] = csv::parse_num(row[cv + c], where);
      g.vectors.push_back(v);
    }
  }
  if (g.points.size() < 2 || g.vectors.size() + 1 != g.points.size()) {
    throw IoError(path + ": expected n+1 points and n vectors");
  }
  return g;
}

/// One row per trajectory, mirroring the report tables.
inline std::string metrics_csv(const std::vector<TrajectoryMetrics>& rows) {
  std::ostringstream os;
  os << "trajectory,method,iterations,converged,wall_s,final_loss,distance_mean_mm,distance_std_mm,"
        "pointing_all_mean_deg,pointing_all_std_deg,pointing_mean_deg,pointing_std_deg,start_variation_mm,"
        "fluency\n";
  for (const auto& r : rows) {
    os << r.id << ',' << r.method << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
       << csv::num(r.wall_seconds) << ',' << csv::num(r.final_loss) << ',' << csv::num(r.distance.stats.mean) << ','
       << csv::num(r.distance.stats.stddev) << ',' << csv::num(r.pointing.all.mean) << ','
       << csv::num(r.pointing.all.stddev) << ',' << csv::num(r.pointing.settled.mean) << ','
       << csv::num(r.pointing.settled.stddev) << ',' << csv::num(r.start_variation_mm) << ','
       << csv::num(r.fluency) << '\n';
  }
  return os.str();
}

/// trajectory,method,step,reliable,error_cm
inline std::string pointing_error_csv(const std::vector<TrajectoryMetrics>& rows) {
  std::ostringstream os;
  os << "trajectory,method,step,reliable,error_cm\n";
  for (const auto& r : rows) {
    for (const FitStep& f : r.pointing_error) {
      os << r.id << ',' << r.method << ',' << f.step << ',' << (f.reliable ? 1 : 0) << ','
         << (f.reliable ? csv::num(f.error_cm) : std::string()) << '\n';
    }
  }
  return os.str();
}

/// Fixed-width text table for the terminal.
inline std::string metrics_table(const std::vector<TrajectoryMetrics>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-8s %6s %8s %9s %16s %16s %10s %8s\n", "trajectory", "method", "iters",
                "wall[s]", "loss", "dist[mm]", "pointing[deg]", "start[mm]", "L6");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %-8s %6zu %8.2f %9.3f %7.2f +- %5.2f %7.1f +- %5.1f %10.2f %8.3f\n",
                  r.id.c_str(), r.method.c_str(), r.iterations, r.wall_seconds, r.final_loss, r.distance.stats.mean,
                  r.distance.stats.stddev, r.pointing.settled.mean, r.pointing.settled.stddev, r.start_variation_mm,
                  r.fluency);
    os << line;
  }
  return os.str();
}

namespace svg {

struct Series {
  std::string label;
  std::vector<std::array<double, 2>> points;
  bool dashed = false;
};

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                  "#17becf", "#7f7f7f", "#bcbd22"};
  return palette[i % 10];
}

/// Line plot with equal or free axis scaling.
inline std::string plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                        const std::vector<Series>& series, bool equal_axes) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
      x0 = std::min(x0, p[0]);
      x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]);
      y1 = std::max(y1, p[1]);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const double w = 640, h = 480, ml = 70, mr = 150, mt = 40, mb = 50;
  double sx = (w - ml - mr) / (x1 - x0), sy = (h - mt - mb) / (y1 - y0);
  if (equal_axes) sx = sy = std::min(sx, sy);
  auto X = [&](double x) { return ml + (x - x0) * sx; };
  auto Y = [&](double y) { return h - mb - (y - y0) * sy; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  char buf[64];
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", xv);
    os << "<text x=\"" << X(xv) << "\" y=\"" << h - mb + 16 << "\" text-anchor=\"middle\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", yv);
    os << "<text x=\"" << ml - 6 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  os << "<text x=\"15\" y=\"" << (mt + h - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << (mt + h - mb) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    os << "<polyline fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"1.5\"";
    if (s.dashed) os << " stroke-dasharray=\"4 3\"";
    os << " points=\"";
    for (const auto& p : s.points) {
      if (std::isfinite(p[0]) && std::isfinite(p[1])) os << X(p[0]) << ',' << Y(p[1]) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << w - mr + 10 << "\" y=\"" << mt + 16 * (i + 1) << "\" fill=\"" << color(i) << "\">"
       << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace svg

/// Front view (y right, z up) of fingertip paths with their goal points dashed.
inline std::string front_view_svg(const std::string& title, const std::vector<std::string>& labels,
                                  const std::vector<std::vector<Vec3d>>& paths,
                                  const std::vector<std::vector<Vec3d>>& goals) {
  std::vector<svg::Series> series;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    svg::Series s{labels[k], {}, false};
    for (const Vec3d& p : paths[k]) s.points.push_back({p[1], p[2]});
    series.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < goals.size(); ++k) {
    svg::Series s{labels[k] + " goal", {}, true};
    for (const Vec3d& p : goals[k]) s.points.push_back({p[1], p[2]});
    series.push_back(std::move(s));
  }
  return svg::plot(title, "y [cm]", "z [cm]", series, true);
}

/// Drawing-plane view of a traced shape: (u, v) coordinates relative to `origin`.
inline std::string plane_view_svg(const std::string& title, const Vec3d& normal, const Vec3d& origin,
                                  const std::vector<Vec3d>& traced, const std::vector<Vec3d>& goal) {
  const auto [u, v] = plane_basis(normal);
  auto project = [&](const std::vector<Vec3d>& pts, const std::string& label, bool dashed) {
    svg::Series s{label, {}, dashed};
    for (const Vec3d& p : pts) s.points.push_back({dot(p - origin, u), dot(p - origin, v)});
    return s;
  };
  return svg::plot(title, "u [cm]", "v [cm]", {project(traced, "traced", false), project(goal, "goal", true)}, true);
}

/// Absolute pointing error per step, one curve per trajectory.
inline std::string pointing_error_svg(const std::string& title, const std::vector<TrajectoryMetrics>& rows) {
  std::vector<svg::Series> series;
  for (const auto& r : rows) {
    svg::Series s{r.id + " " + r.method, {}, false};
    for (const FitStep& f : r.pointing_error) {
      if (f.reliable) s.points.push_back({static_cast<double>(f.step), f.error_cm});
    }
    series.push_back(std::move(s));
  }
  return svg::plot(title, "step", "pointing error [cm]", series, false);
}

inline std::string loss_svg(const std::string& title, const std::vector<LossTrace>& trace) {
  svg::Series s{"L", {}, false};
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].total > 0.0) s.points.push_back({static_cast<double>(i), std::log10(trace[i].total)});
  }
  return svg::plot(title, "iteration", "log10 loss", {s}, false);
}

}  // namespace armtraj
