#include <gtest/gtest.h>

#include <string>

#include "armtraj/robot_model.hpp"
#include "test_util.hpp"

using namespace armtraj;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

KinematicChain random_chain(testutil::Rng& rng) {
  const std::size_t m = 1 + rng.index(8);
  std::vector<Joint> joints;
  for (std::size_t j = 0; j < m; ++j) {
    const double lo = rng.uniform(-200, 0);
    joints.push_back({"j" + std::to_string(j), lo, lo + rng.uniform(1, 300)});
  }
  std::vector<Primitive> prims;
  std::vector<JointMark> marks;
  const Axis axes[] = {Axis::x, Axis::y, Axis::z};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t extra = rng.index(3); extra > 0; --extra) {
      if (rng.coin()) {
        prims.emplace_back(Translate{{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)}});
      } else {
        prims.emplace_back(ConstRotation{axes[rng.index(3)], rng.uniform(-180, 180)});
      }
    }
    prims.emplace_back(JointRotation{axes[rng.index(3)], j, rng.coin() ? 1.0 : rng.uniform(-2, 2) + 3.0,
                                     rng.coin() ? 0.0 : rng.uniform(-90, 90)});
    marks.push_back({prims.size() - 1, joints[j].name});
  }
  prims.emplace_back(Translate{{rng.uniform(-10, 10), 0.1, 0}});
  return KinematicChain("random", joints, prims, marks);
}

}  // namespace

TEST(RobotModel, ShippedModelFileEqualsBuiltin) {
  EXPECT_EQ(load_model(testutil::data_path("models/nico_right_arm.json")), nico_right_arm());
}

TEST(RobotModel, ShippedPosesLoadStrictly) {
  const KinematicChain c = nico_right_arm();
  const PoseFile f = load_poses(testutil::data_path("models/nico_poses.json"), c);
  EXPECT_TRUE(f.warnings.empty());
  EXPECT_TRUE(f.contains("start"));
  for (int k = 1; k <= 7; ++k) EXPECT_TRUE(f.contains("touch_" + std::to_string(k)));
  ASSERT_TRUE(f.surface_normal.has_value());
  EXPECT_NEAR(norm(*f.surface_normal), 1.0, 1e-12);
}

TEST(RobotModel, ShippedTouchPointsLieOnOnePlane) {
  const KinematicChain c = nico_right_arm();
  const PoseFile f = load_poses(testutil::data_path("models/nico_poses.json"), c);
  const Vec3d n = *f.surface_normal;
  const double d0 = dot(fk(c, f.get("touch_1")).position, n);
  for (int k = 2; k <= 7; ++k) {
    EXPECT_NEAR(dot(fk(c, f.get("touch_" + std::to_string(k))).position, n), d0, 1e-3);
  }
}

TEST(RobotModelProperty, RandomModelsRoundTrip) {
  testutil::Rng rng(99);
  for (int k = 0; k < 100; ++k) {
    const KinematicChain c = random_chain(rng);
    const std::string text = serialize_model(c);
    const KinematicChain back = parse_model(text);
    ASSERT_EQ(back, c) << text;
    EXPECT_EQ(serialize_model(back), text);
    const Pose p = testutil::random_pose(c, rng);
    EXPECT_EQ(fk(c, p).position, fk(back, p).position);
  }
}

TEST(RobotModel, ParseErrorsCarryLineAndColumn) {
  const std::string msg = error_of([] { parse_model("{\n  \"name\": \"x\",\n  oops\n}", "arm.json"); });
  EXPECT_NE(msg.find("arm.json:3:"), std::string::npos) << msg;
}

TEST(RobotModel, SchemaErrorsNameTheField) {
  EXPECT_NE(error_of([] { parse_model(R"({"joints": [], "primitives": []})"); }).find("name: missing field"),
            std::string::npos);
  const std::string bad_kind = error_of([] {
    parse_model(R"({"name": "a", "joints": [{"name": "q", "min_deg": -1, "max_deg": 1}],
                    "primitives": [{"kind": "twist"}]})");
  });
  EXPECT_NE(bad_kind.find("primitives[0].kind"), std::string::npos) << bad_kind;
  const std::string bad_joint = error_of([] {
    parse_model(R"({"name": "a", "joints": [{"name": "q", "min_deg": -1, "max_deg": 1}],
                    "primitives": [{"kind": "rot_joint", "axis": "z", "joint": "nope"}]})");
  });
  EXPECT_NE(bad_joint.find("unknown joint 'nope'"), std::string::npos) << bad_joint;
  const std::string bad_m = error_of([] {
    parse_model(R"({"name": "a", "m": 2, "joints": [{"name": "q", "min_deg": -1, "max_deg": 1}],
                    "primitives": [{"kind": "rot_joint", "axis": "z", "joint": "q"}]})");
  });
  EXPECT_NE(bad_m.find(".m:"), std::string::npos) << bad_m;
  const std::string bad_axis = error_of([] {
    parse_model(R"({"name": "a", "joints": [{"name": "q", "min_deg": -1, "max_deg": 1}],
                    "primitives": [{"kind": "rot_joint", "axis": "w", "joint": "q"}]})");
  });
  EXPECT_NE(bad_axis.find("axis"), std::string::npos) << bad_axis;
}

TEST(RobotModel, InvalidChainIsAModelError) {
  const std::string msg = error_of([] {
    parse_model(R"({"name": "a", "joints": [{"name": "q", "min_deg": 5, "max_deg": 1}],
                    "primitives": [{"kind": "rot_joint", "axis": "z", "joint": "q"}]})");
  });
  EXPECT_NE(msg.find("invalid chain"), std::string::npos) << msg;
}

TEST(RobotModel, MissingFileIsReported) {
  const std::string msg = error_of([] { load_model("/nonexistent/arm.json"); });
  EXPECT_NE(msg.find("cannot open"), std::string::npos);
}

TEST(RobotModel, PoseNotFound) {
  const KinematicChain c = nico_right_arm();
  const PoseFile f = load_poses(testutil::data_path("models/nico_poses.json"), c);
  const std::string msg = error_of([&] { f.get("touch_9"); });
  EXPECT_NE(msg.find("pose not found"), std::string::npos);
}

TEST(RobotModel, PoseArityAndModelMismatch) {
  const KinematicChain c = testutil::planar_2link();
  EXPECT_NE(error_of([&] { parse_poses(R"({"model": "planar2", "poses": {"a": [1, 2, 3]}})", c); }).find("arity 3"),
            std::string::npos);
  EXPECT_NE(error_of([&] { parse_poses(R"({"model": "other", "poses": {}})", c); }).find("recorded for 'other'"),
            std::string::npos);
}

TEST(RobotModel, OutOfRangePoseStrictVersusLenient) {
  const KinematicChain c = testutil::planar_2link();
  const std::string text = R"({"model": "planar2", "poses": {"a": [10, 175]}})";
  EXPECT_NE(error_of([&] { parse_poses(text, c); }).find("outside"), std::string::npos);
  const PoseFile f = parse_poses(text, c, PoseCheck::lenient);
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_NE(f.warnings[0].find("'q2'"), std::string::npos);
  EXPECT_EQ(f.get("a")[1], 175.0);
}

TEST(RobotModelProperty, PoseFilesRoundTrip) {
  const KinematicChain c = nico_right_arm();
  testutil::Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    PoseFile f;
    f.model_name = c.name();
    for (std::size_t i = 0, count = 1 + rng.index(5); i < count; ++i) {
      f.poses.push_back({"p" + std::to_string(i), testutil::random_pose(c, rng)});
    }
    if (rng.coin()) f.surface_normal = Vec3d{rng.uniform(-1, 1), rng.uniform(-1, 1), 1.0};
    const PoseFile back = parse_poses(serialize_poses(f), c);
    ASSERT_EQ(back.poses.size(), f.poses.size());
    for (std::size_t i = 0; i < f.poses.size(); ++i) {
      EXPECT_EQ(back.poses[i].name, f.poses[i].name);
      EXPECT_EQ(back.poses[i].angles, f.poses[i].angles);
    }
    EXPECT_EQ(back.surface_normal, f.surface_normal);
  }
}
