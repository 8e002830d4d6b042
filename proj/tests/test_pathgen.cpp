#include <gtest/gtest.h>

#include <cmath>

#include "armtraj/pathgen.hpp"
#include "test_util.hpp"

using namespace armtraj;

namespace {

double dist_to_segment(const Vec3d& p, const Vec3d& a, const Vec3d& b) {
  const Vec3d ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(p - (a + t * ab));
}

}  // namespace

TEST(Pathgen, LineSplitsIntoEqualSegments) {
  const GoalPath g = goal_points_line({0, 0, 0}, {10, 0, 0}, 5);
  ASSERT_EQ(g.points.size(), 6u);
  ASSERT_EQ(g.segments(), 5u);
  EXPECT_EQ(g.points[2], (Vec3d{4, 0, 0}));
  for (const Vec3d& v : g.vectors) EXPECT_EQ(v, (Vec3d{2, 0, 0}));
}

TEST(Pathgen, LineEndpointsAreExact) {
  const Vec3d s{-10.5, -16.5, 40.5}, e{-18, -12.1, 30.2};
  const GoalPath g = goal_points_line(s, e, 50);
  EXPECT_EQ(g.points.front(), s);
  EXPECT_EQ(g.points.back(), e);
}

TEST(Pathgen, LineRejectsDegenerateInput) {
  EXPECT_THROW(goal_points_line({1, 2, 3}, {1, 2, 3}, 5), PathError);
  EXPECT_THROW(goal_points_line({0, 0, 0}, {1, 0, 0}, 0), PathError);
}

TEST(Pathgen, LetterLKeepsItsCorners) {
  // Two edges of length 2 and 1: six segments fall 4 + 2.
  PolylineShape L{{{0, 0}, {0, -2}, {1, -2}}, {-1, 0, 0}, 1.0};
  const Vec3d anchor{0, 0, 0};
  const GoalPath g = goal_points_polyline(L, anchor, 6);
  ASSERT_EQ(g.points.size(), 7u);
  const auto [u, v] = plane_basis(L.normal);
  const Vec3d corner = -2.0 * v;
  const Vec3d foot = u - 2.0 * v;
  EXPECT_NEAR(norm(g.points[0] - anchor), 0.0, 1e-12);
  EXPECT_NEAR(norm(g.points[4] - corner), 0.0, 1e-12);
  EXPECT_NEAR(norm(g.points[6] - foot), 0.0, 1e-12);
  EXPECT_NEAR(norm(g.points[2] - (-1.0 * v)), 0.0, 1e-12);
  for (const Vec3d& vec : g.vectors) EXPECT_EQ(vec, (Vec3d{-1, 0, 0}));
}

TEST(Pathgen, PlaneBasisIsOrthonormalAndUpright) {
  for (const Vec3d n : {Vec3d{-1, 0, 0}, Vec3d{0, 1, 0}, Vec3d{-0.53, 0.51, -0.68}, Vec3d{0, 0, 1}}) {
    const auto [u, v] = plane_basis(n);
    const Vec3d nn = normalized(n);
    EXPECT_NEAR(norm(u), 1.0, 1e-12);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
    EXPECT_NEAR(dot(u, v), 0.0, 1e-12);
    EXPECT_NEAR(dot(u, nn), 0.0, 1e-12);
    EXPECT_NEAR(dot(v, nn), 0.0, 1e-12);
    if (std::abs(nn[2]) < 0.999) {
      EXPECT_GT(v[2], 0.0);
    }
  }
  // Normal -x: an observer facing the robot sees +u to the right, along -y.
  const auto [u, v] = plane_basis({-1, 0, 0});
  EXPECT_NEAR(u[1], -1.0, 1e-12);
  EXPECT_NEAR(v[2], 1.0, 1e-12);
}

TEST(Pathgen, PolylineWithFewerSegmentsThanEdgesResamplesUniformly) {
  PolylineShape z{{{0, 0}, {1, 0}, {1, 1}, {2, 1}}, {0, 0, 1}, 1.0};
  const GoalPath g = goal_points_polyline(z, {0, 0, 0}, 2);
  ASSERT_EQ(g.points.size(), 3u);
  const auto [u, v] = plane_basis(z.normal);
  EXPECT_NEAR(norm(g.points[1] - (u + 0.5 * v)), 0.0, 1e-12);
}

TEST(Pathgen, PolylineErrors) {
  EXPECT_THROW(goal_points_polyline(PolylineShape{{{0, 0}}, {1, 0, 0}, 1}, {}, 4), PathError);
  EXPECT_THROW(goal_points_polyline(PolylineShape{{{0, 0}, {0, 0}}, {1, 0, 0}, 1}, {}, 4), PathError);
  EXPECT_THROW(goal_points_polyline(PolylineShape{{{0, 0}, {1, 0}}, {0, 0, 0}, 1}, {}, 4), PathError);
  EXPECT_THROW(goal_points_polyline(PolylineShape{{{0, 0}, {1, 0}}, {1, 0, 0}, -1}, {}, 4), PathError);
}

TEST(Pathgen, SplineWithoutControlPointsIsTheLine) {
  const Vec3d s{0, 0, 0}, e{3, 4, 0};
  const GoalPath g = goal_points_spline(SplineShape{}, s, e, 10);
  const GoalPath l = goal_points_line(s, e, 10);
  for (std::size_t i = 0; i <= 10; ++i) EXPECT_NEAR(norm(g.points[i] - l.points[i]), 0.0, 1e-9);
}

TEST(Pathgen, SplinePassesThroughControlAndIsEvenlySpaced) {
  const Vec3d s{0, 0, 0}, c{1, 1, 0}, e{2, 0, 0};
  const GoalPath g = goal_points_spline(SplineShape{{c}}, s, e, 40);
  EXPECT_EQ(g.points.front(), s);
  EXPECT_EQ(g.points.back(), e);
  double best = 1e9;
  for (const Vec3d& p : g.points) best = std::min(best, norm(p - c));
  EXPECT_LT(best, 0.05);
  // Symmetric knots put the control point on the middle sample.
  EXPECT_NEAR(norm(g.points[20] - c), 0.0, 1e-3);
  double lo = 1e9, hi = 0;
  for (const Vec3d& v : g.vectors) {
    lo = std::min(lo, norm(v));
    hi = std::max(hi, norm(v));
  }
  EXPECT_LT(hi / lo, 1.01);
}

TEST(Pathgen, SplineRejectsRepeatedKnots) {
  EXPECT_THROW(goal_points_spline(SplineShape{{{0, 0, 0}}}, {0, 0, 0}, {1, 0, 0}, 4), PathError);
}

TEST(PathgenProperty, SegmentAllocationSumsAndCoversEveryEdge) {
  testutil::Rng rng(21);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> lengths;
    for (std::size_t e = 0, edges = 1 + rng.index(6); e < edges; ++e) lengths.push_back(rng.uniform(0.01, 5));
    const std::size_t n = lengths.size() + rng.index(60);
    const auto counts = detail::allocate_segments(lengths, n);
    std::size_t total = 0;
    double len_total = 0.0;
    for (double l : lengths) len_total += l;
    for (std::size_t e = 0; e < counts.size(); ++e) {
      EXPECT_GE(counts[e], 1u);
      // Largest remainder keeps each count within one of its share, except
      // where the at-least-one floor lifts it.
      const double share = static_cast<double>(n) * lengths[e] / len_total;
      EXPECT_LT(std::abs(static_cast<double>(counts[e]) - share), 1.0 + static_cast<double>(lengths.size()));
      total += counts[e];
    }
    EXPECT_EQ(total, n);
  }
}

TEST(PathgenProperty, PolylineSamplesStayOnThePolylineAndKeepVertices) {
  testutil::Rng rng(22);
  for (int k = 0; k < 200; ++k) {
    PolylineShape s;
    for (std::size_t i = 0, count = 2 + rng.index(5); i < count; ++i) {
      s.points.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3)});
    }
    s.normal = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (norm(s.normal) < 0.1) continue;
    s.scale = rng.uniform(0.5, 3);
    const std::size_t n = s.points.size() - 1 + rng.index(40);
    const Vec3d anchor{rng.uniform(-20, 0), rng.uniform(-20, 0), rng.uniform(20, 40)};
    const GoalPath g = goal_points_polyline(s, anchor, n);
    ASSERT_EQ(g.points.size(), n + 1);
    const auto [u, v] = plane_basis(s.normal);
    std::vector<Vec3d> verts;
    for (const auto& p : s.points) {
      verts.push_back(anchor + (s.scale * (p[0] - s.points[0][0]) * u + s.scale * (p[1] - s.points[0][1]) * v));
    }
    for (const Vec3d& p : g.points) {
      double best = 1e9;
      for (std::size_t e = 0; e + 1 < verts.size(); ++e) {
        if (norm(verts[e + 1] - verts[e]) > 0) best = std::min(best, dist_to_segment(p, verts[e], verts[e + 1]));
      }
      EXPECT_LT(best, 1e-9);
    }
    for (const Vec3d& vert : verts) {
      double best = 1e9;
      for (const Vec3d& p : g.points) best = std::min(best, norm(p - vert));
      EXPECT_LT(best, 1e-9);
    }
  }
}

TEST(Pathgen, AngularVelocities) {
  // 2 segments over 1000 ms: 0.5 s each.
  const auto w = angular_velocities({{0, 10}, {5, 10}, {5, 0}}, 1000);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0], (std::vector<double>{10, 0}));
  EXPECT_EQ(w[1], (std::vector<double>{0, -20}));
  EXPECT_THROW(angular_velocities({{0}}, 1000), PathError);
  EXPECT_THROW(angular_velocities({{0}, {1}}, 0), PathError);
  EXPECT_THROW(angular_velocities({{0}, {1, 2}}, 10), PathError);
}

TEST(PathgenProperty, VelocitiesIntegrateBackToTheTrajectory) {
  testutil::Rng rng(23);
  for (int k = 0; k < 100; ++k) {
    std::vector<Pose> traj;
    for (std::size_t i = 0, len = 2 + rng.index(60); i < len; ++i) {
      traj.push_back({rng.uniform(-90, 90), rng.uniform(-90, 90), rng.uniform(-90, 90)});
    }
    const double T = rng.uniform(100, 5000);
    const auto w = angular_velocities(traj, T);
    const double dt = T / static_cast<double>(traj.size() - 1) / 1000.0;
    Pose acc = traj[0];
    for (const auto& row : w) {
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += row[j] * dt;
    }
    for (std::size_t j = 0; j < acc.size(); ++j) EXPECT_NEAR(acc[j], traj.back()[j], 1e-9);
  }
}

TEST(Pathgen, ShapeFiles) {
  EXPECT_TRUE(std::holds_alternative<LineShape>(parse_shape(R"({"kind": "line"})")));
  const ShapeSpec s = load_shape(testutil::data_path("shapes/letter_L.json"));
  const auto* poly = std::get_if<PolylineShape>(&s);
  ASSERT_NE(poly, nullptr);
  EXPECT_EQ(poly->points.size(), 3u);
  const ShapeSpec sp = parse_shape(R"({"kind": "spline", "control": [[1, 2, 3]]})");
  EXPECT_EQ(std::get<SplineShape>(sp).control.size(), 1u);
  EXPECT_THROW(parse_shape(R"({"kind": "circle"})"), ModelError);
  EXPECT_THROW(parse_shape(R"({"kind": "polyline", "points": [[0, 0]]})"), ModelError);
  EXPECT_THROW(parse_shape(R"({"kind": "polyline", "points": [[0, 0, 1], [1, 1]]})"), ModelError);
}

TEST(Pathgen, BuildDispatchesOnShape) {
  const Vec3d s{0, 0, 0}, e{0, 0, -4};
  EXPECT_EQ(build_goal_path(LineShape{}, s, e, 4).points[1], (Vec3d{0, 0, -1}));
  const GoalPath p = build_goal_path(PolylineShape{{{0, 0}, {0, -1}}, {-1, 0, 0}, 4.0}, s, e, 4);
  EXPECT_NEAR(norm(p.points[4] - e), 0.0, 1e-12);
}
