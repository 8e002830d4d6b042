#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "armtraj/io.hpp"
#include "test_util.hpp"

using namespace armtraj;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "armtraj_test_io";
  fs::create_directories(dir);
  return dir / name;
}

// Balanced-tag check; enough for the generated SVG, which has no comments or CDATA.
bool well_formed(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = xml.find('<', pos)) != std::string::npos) {
    const std::size_t end = xml.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = xml.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag.back() == '/') continue;
    if (tag.front() == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else {
      stack.push_back(tag.substr(0, tag.find_first_of(" \n")));
    }
  }
  return stack.empty();
}

}  // namespace

TEST(Io, NumbersRoundTripExactly) {
  testutil::Rng rng(71);
  for (int k = 0; k < 10000; ++k) {
    const double x = rng.uniform(-1e3, 1e3) * std::pow(10.0, rng.uniform(-12, 12));
    EXPECT_EQ(csv::parse_num(csv::num(x), "t"), x);
  }
  EXPECT_EQ(csv::parse_num(csv::num(std::numeric_limits<double>::min()), "t"), std::numeric_limits<double>::min());
  EXPECT_THROW(csv::parse_num("1.5x", "t"), IoError);
  EXPECT_THROW(csv::parse_num("", "t"), IoError);
}

TEST(IoProperty, TrajectoryCsvRoundTripsBitwise) {
  const KinematicChain c = nico_right_arm();
  testutil::Rng rng(72);
  for (int k = 0; k < 5; ++k) {
    std::vector<Pose> poses;
    for (std::size_t i = 0, n = 2 + rng.index(40); i < n; ++i) poses.push_back(testutil::random_pose(c, rng));
    const auto states = fk_batch(c, poses);
    const fs::path p = scratch("traj.csv");
    csv::write_text(p.string(), trajectory_csv(poses, states));
    const TrajectoryData d = read_trajectory_csv(p.string());
    ASSERT_EQ(d.poses, poses);
    for (std::size_t i = 0; i < states.size(); ++i) {
      EXPECT_EQ(d.states[i].position, states[i].position);
      EXPECT_EQ(d.states[i].direction, states[i].direction);
    }
    EXPECT_EQ(trajectory_csv(d.poses, d.states), trajectory_csv(poses, states));
  }
}

TEST(Io, TrajectoryCsvLayout) {
  const std::string text = trajectory_csv({{1.5, -2}}, {EffectorState<double>{{1, 2, 3}, {0, 0, 1}, {}}});
  EXPECT_EQ(text, "step,theta_0,theta_1,x,y,z,dx,dy,dz\n0,1.5,-2,1,2,3,0,0,1\n");
  EXPECT_THROW(trajectory_csv({{1}}, {}), IoError);
}

TEST(IoProperty, GoalCsvRoundTripsBitwise) {
  testutil::Rng rng(73);
  for (int k = 0; k < 20; ++k) {
    const Vec3d a{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
    const Vec3d b{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
    const GoalPath g = goal_points_line(a, b, 1 + rng.index(80));
    const fs::path p = scratch("goal.csv");
    csv::write_text(p.string(), goal_csv(g));
    const GoalPath back = read_goal_csv(p.string());
    EXPECT_EQ(back.points, g.points);
    EXPECT_EQ(back.vectors, g.vectors);
  }
}

TEST(Io, MalformedCsvIsReported) {
  const fs::path p = scratch("bad.csv");
  csv::write_text(p.string(), "step,theta_0,x,y,z,dx,dy,dz\n0,1,2,3\n");
  try {
    read_trajectory_csv(p.string());
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":2: expected 8 fields"), std::string::npos) << e.what();
  }
  csv::write_text(p.string(), "step,x,y,z\n0,1,2,3\n");
  EXPECT_THROW(read_trajectory_csv(p.string()), IoError);
  EXPECT_THROW(read_goal_csv(p.string()), IoError);
  EXPECT_THROW(csv::read((scratch("absent") / "x.csv").string()), IoError);
}

TEST(Io, MetricsCsvHasOneRowPerTrajectory) {
  TrajectoryMetrics m;
  m.id = "touch_1";
  m.method = "neural";
  m.iterations = 12;
  m.converged = true;
  m.distance.stats.mean = 0.25;
  m.pointing_error = {FitStep{9, true, 0.5}, FitStep{10, false, 0.0}};
  const std::string text = metrics_csv({m, m});
  std::istringstream in(text);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(csv::split(header).size(), 14u);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(csv::split(line).size(), 14u);
    EXPECT_EQ(line.rfind("touch_1,neural,12,1,", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(pointing_error_csv({m}),
            "trajectory,method,step,reliable,error_cm\ntouch_1,neural,9,1,0.5\ntouch_1,neural,10,0,\n");
  EXPECT_NE(metrics_table({m}).find("touch_1"), std::string::npos);
}

TEST(Io, LossCsvColumns) {
  LossTrace t;
  t.total = 3;
  t.terms = {1, 2, 0, 0, 0, 0, 0};
  EXPECT_EQ(loss_csv({t}), "iteration,L,L0,L1,L2,L3,L4,L5,L6\n0,3,1,2,0,0,0,0,0\n");
}

TEST(Io, SvgOutputIsWellFormed) {
  const std::vector<Vec3d> path{{0, 0, 0}, {0, 1, 1}, {0, 2, 1}};
  EXPECT_TRUE(well_formed(front_view_svg("paths", {"a"}, {path}, {path})));
  EXPECT_TRUE(well_formed(plane_view_svg("letter", {-1, 0, 0}, {0, 0, 0}, path, path)));
  LossTrace t;
  t.total = 2;
  EXPECT_TRUE(well_formed(loss_svg("loss", {t, t})));
  TrajectoryMetrics m;
  m.pointing_error = {FitStep{9, true, 0.5}};
  EXPECT_TRUE(well_formed(pointing_error_svg("err", {m})));
  // Degenerate input still yields finite coordinates.
  const std::string empty = svg::plot("e", "x", "y", {}, true);
  EXPECT_TRUE(well_formed(empty));
  EXPECT_EQ(empty.find("nan"), std::string::npos);
  EXPECT_FALSE(well_formed("<svg><g></svg>"));
}
