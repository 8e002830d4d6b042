#pragma once

// Model and pose files.
//
// Both are UTF-8 JSON documents. A model file:
//
//   {
//     "name": "nico_right_arm",
//     "m": 7,
//     "joints": [{"name": "shoulder_z", "min_deg": -100, "max_deg": 100}, ...],
//     "primitives": [
//       {"kind": "translate", "xyz": [0, 5, 19.5]},
//       {"kind": "rot_const", "axis": "z", "deg": 90},
//       {"kind": "rot_joint", "axis": "z", "joint": "shoulder_z", "scale": 1, "offset_deg": 0},
//       ...
//     ],
//     "marks": [{"primitive": 2, "joint": "shoulder_z"}, ...]
//   }
//
// "scale" and "offset_deg" default to 1 and 0, "marks" and "m" are optional.
// A pose file:
//
//   {
//     "model": "nico_right_arm",
//     "poses": {"start": [...], "touch_1": [...]},
//     "surface_normal": [-1, 0, 0]
//   }
//
// "surface_normal" is optional and names the normal of the plane the touch
// poses were recorded on.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "armtraj/kinematics.hpp"
#include "json.hpp"

namespace armtraj {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ojson parse_json(const std::string& text, const std::string& origin) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ModelError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": parse error: " +
                     e.what());
  }
}

inline const ojson& field(const ojson& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw ModelError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ModelError(where + "." + key + ": missing field");
  return *it;
}

inline double number(const ojson& v, const std::string& where) {
  if (!v.is_number()) throw ModelError(where + ": expected a number");
  return v.get<double>();
}

inline std::string string_field(const ojson& obj, const std::string& key, const std::string& where) {
  const ojson& v = field(obj, key, where);
  if (!v.is_string()) throw ModelError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline double number_or(const ojson& obj, const std::string& key, double fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return number(*it, where + "." + key);
}

inline Vec3d vec3(const ojson& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ModelError(where + ": expected an array of 3 numbers");
  return {number(v[0], where + "[0]"), number(v[1], where + "[1]"), number(v[2], where + "[2]")};
}

inline Axis parse_axis(const ojson& v, const std::string& where) {
  if (v == "x") return Axis::x;
  if (v == "y") return Axis::y;
  if (v == "z") return Axis::z;
  throw ModelError(where + ": expected one of \"x\", \"y\", \"z\"");
}

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

}  // namespace detail

inline KinematicChain parse_model(const std::string& text, const std::string& origin = "<model>") {
  using detail::ojson;
  const ojson doc = detail::parse_json(text, origin);
  const std::string name = detail::string_field(doc, "name", origin);

  const ojson& jj = detail::field(doc, "joints", origin);
  if (!jj.is_array()) throw ModelError(origin + ".joints: expected an array");
  std::vector<Joint> joints;
  for (std::size_t j = 0; j < jj.size(); ++j) {
    const auto where = origin + ".joints[" + std::to_string(j) + "]";
    joints.push_back(Joint{detail::string_field(jj[j], "name", where),
                           detail::number(detail::field(jj[j], "min_deg", where), where + ".min_deg"),
                           detail::number(detail::field(jj[j], "max_deg", where), where + ".max_deg")});
  }
  if (auto it = doc.find("m"); it != doc.end()) {
    if (!it->is_number_unsigned() || it->get<std::size_t>() != joints.size()) {
      throw ModelError(origin + ".m: must equal the number of joints (" + std::to_string(joints.size()) + ")");
    }
  }
  auto joint_id = [&](const std::string& jname, const std::string& where) {
    for (std::size_t j = 0; j < joints.size(); ++j) {
      if (joints[j].name == jname) return j;
    }
    throw ModelError(where + ": unknown joint '" + jname + "'");
  };

  const ojson& pp = detail::field(doc, "primitives", origin);
  if (!pp.is_array()) throw ModelError(origin + ".primitives: expected an array");
  std::vector<Primitive> prims;
  for (std::size_t i = 0; i < pp.size(); ++i) {
    const auto where = origin + ".primitives[" + std::to_string(i) + "]";
    const std::string kind = detail::string_field(pp[i], "kind", where);
    if (kind == "translate") {
      prims.emplace_back(Translate{detail::vec3(detail::field(pp[i], "xyz", where), where + ".xyz")});
    } else if (kind == "rot_const") {
      prims.emplace_back(ConstRotation{detail::parse_axis(detail::field(pp[i], "axis", where), where + ".axis"),
                                       detail::number(detail::field(pp[i], "deg", where), where + ".deg")});
    } else if (kind == "rot_joint") {
      JointRotation jr;
      jr.axis = detail::parse_axis(detail::field(pp[i], "axis", where), where + ".axis");
      jr.joint = joint_id(detail::string_field(pp[i], "joint", where), where + ".joint");
      jr.scale = detail::number_or(pp[i], "scale", 1.0, where);
      jr.offset_deg = detail::number_or(pp[i], "offset_deg", 0.0, where);
      prims.emplace_back(jr);
    } else {
      throw ModelError(where + ".kind: unknown primitive kind '" + kind + "'");
    }
  }

  std::vector<JointMark> marks;
  if (auto it = doc.find("marks"); it != doc.end()) {
    if (!it->is_array()) throw ModelError(origin + ".marks: expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const auto where = origin + ".marks[" + std::to_string(k) + "]";
      const ojson& idx = detail::field((*it)[k], "primitive", where);
      if (!idx.is_number_unsigned()) throw ModelError(where + ".primitive: expected a non-negative integer");
      marks.push_back(JointMark{idx.get<std::size_t>(), detail::string_field((*it)[k], "joint", where)});
    }
  }

  try {
    return KinematicChain(name, std::move(joints), std::move(prims), std::move(marks));
  } catch (const ChainError& e) {
    throw ModelError(origin + ": invalid chain: " + e.what());
  }
}

inline KinematicChain load_model(const std::string& path) { return parse_model(detail::read_text(path), path); }

inline std::string serialize_model(const KinematicChain& chain) {
  using detail::ojson;
  ojson doc;
  doc["name"] = chain.name();
  doc["m"] = chain.dof();
  ojson joints = ojson::array();
  for (const Joint& j : chain.joints()) {
    joints.push_back(ojson{{"name", j.name}, {"min_deg", j.min_deg}, {"max_deg", j.max_deg}});
  }
  doc["joints"] = std::move(joints);
  ojson prims = ojson::array();
  for (const Primitive& p : chain.primitives()) {
    if (const auto* t = std::get_if<Translate>(&p)) {
      prims.push_back(ojson{{"kind", "translate"}, {"xyz", {t->xyz[0], t->xyz[1], t->xyz[2]}}});
    } else if (const auto* r = std::get_if<ConstRotation>(&p)) {
      prims.push_back(ojson{{"kind", "rot_const"}, {"axis", detail::axis_name(r->axis)}, {"deg", r->deg}});
    } else {
      const auto& jr = std::get<JointRotation>(p);
      prims.push_back(ojson{{"kind", "rot_joint"},
                            {"axis", detail::axis_name(jr.axis)},
                            {"joint", chain.joints()[jr.joint].name},
                            {"scale", jr.scale},
                            {"offset_deg", jr.offset_deg}});
    }
  }
  doc["primitives"] = std::move(prims);
  ojson marks = ojson::array();
  for (const JointMark& m : chain.marks()) marks.push_back(ojson{{"primitive", m.primitive}, {"joint", m.joint}});
  doc["marks"] = std::move(marks);
  return doc.dump(2) + "\n";
}

struct NamedPose {
  std::string name;
  Pose angles;
};

struct PoseFile {
  std::string model_name;
  std::vector<NamedPose> poses;
  std::optional<Vec3d> surface_normal;
  std::vector<std::string> warnings;

  const Pose& get(const std::string& name) const {
    for (const NamedPose& p : poses) {
      if (p.name == name) return p.angles;
    }
    throw ModelError("pose not found: '" + name + "'");
  }
  bool contains(const std::string& name) const {
    for (const NamedPose& p : poses) {
      if (p.name == name) return true;
    }
    return false;
  }
};

enum class PoseCheck { strict, lenient };

inline PoseFile parse_poses(const std::string& text, const KinematicChain& chain, PoseCheck check = PoseCheck::strict,
                            const std::string& origin = "<poses>") {
  using detail::ojson;
  const ojson doc = detail::parse_json(text, origin);
  PoseFile out;
  out.model_name = detail::string_field(doc, "model", origin);
  if (out.model_name != chain.name()) {
    throw ModelError(origin + ".model: poses recorded for '" + out.model_name + "', model is '" + chain.name() + "'");
  }
  const ojson& poses = detail::field(doc, "poses", origin);
  if (!poses.is_object()) throw ModelError(origin + ".poses: expected an object of named poses");
  for (const auto& [name, arr] : poses.items()) {
    const auto where = origin + ".poses." + name;
    if (!arr.is_array()) throw ModelError(where + ": expected an array");
    if (arr.size() != chain.dof()) {
      throw ModelError(where + ": arity " + std::to_string(arr.size()) + ", model has " +
                       std::to_string(chain.dof()) + " joints");
    }
    Pose p;
    for (std::size_t j = 0; j < arr.size(); ++j) {
      const double a = detail::number(arr[j], where + "[" + std::to_string(j) + "]");
      const Joint& jt = chain.joints()[j];
      if (a < jt.min_deg || a > jt.max_deg) {
        const auto msg = where + "[" + std::to_string(j) + "]: " + std::to_string(a) + " outside [" +
                         std::to_string(jt.min_deg) + ", " + std::to_string(jt.max_deg) + "] of joint '" + jt.name +
                         "'";
        if (check == PoseCheck::strict) throw ModelError(msg);
        out.warnings.push_back(msg);
      }
      p.push_back(a);
    }
    out.poses.push_back(NamedPose{name, std::move(p)});
  }
  if (auto it = doc.find("surface_normal"); it != doc.end()) {
    out.surface_normal = detail::vec3(*it, origin + ".surface_normal");
  }
  return out;
}

inline PoseFile load_poses(const std::string& path, const KinematicChain& chain,
                           PoseCheck check = PoseCheck::strict) {
  return parse_poses(detail::read_text(path), chain, check, path);
}

inline std::string serialize_poses(const PoseFile& file) {
  using detail::ojson;
  ojson doc;
  doc["model"] = file.model_name;
  ojson poses = ojson::object();
  for (const NamedPose& p : file.poses) poses[p.name] = p.angles;
  doc["poses"] = std::move(poses);
  if (file.surface_normal) {
    const Vec3d& n = *file.surface_normal;
    doc["surface_normal"] = {n[0], n[1], n[2]};
  }
  return doc.dump(2) + "\n";
}

/// Right arm of the NICO humanoid, torso to forefinger tip, lengths in cm.
/// Joint limits are configuration placeholders, not measured ranges.
inline KinematicChain nico_right_arm() {
  std::vector<Joint> joints{
      {"shoulder_z", -100.0, 100.0},  {"shoulder_y", -120.0, 180.0}, {"arm_x", -100.0, 100.0},
      {"elbow_y", -30.0, 180.0},      {"wrist_z", -180.0, 180.0},    {"wrist_x", -180.0, 180.0},
      {"indexfinger_x", -180.0, 180.0},
  };
  constexpr double wrist_scale = 1.0 / 4.5;
  std::vector<Primitive> p{
      // to shoulder_z
      Translate{{0.0, 5.0, 19.5}},
      ConstRotation{Axis::z, 90.0},
      JointRotation{Axis::z, 0, 1.0, 0.0},
      // to shoulder_y
      Translate{{0.0, -1.5, 2.5}},
      ConstRotation{Axis::y, 90.0},
      JointRotation{Axis::z, 1, 1.0, 0.0},
      // to arm_x
      Translate{{3.0, 0.0, 9.5}},
      ConstRotation{Axis::x, -90.0},
      JointRotation{Axis::z, 2, -1.0, 0.0},
      // to elbow_y
      Translate{{17.5, 0.0, 0.0}},
      ConstRotation{Axis::x, 90.0},
      ConstRotation{Axis::z, 180.0},
      JointRotation{Axis::z, 3, -1.0, 0.0},
      // to wrist_z
      Translate{{10.0, 0.0, 0.0}},
      ConstRotation{Axis::y, 90.0},
      JointRotation{Axis::z, 4, -0.5, 0.0},
      // to wrist_x
      Translate{{0.0, 0.0, 10.0}},
      ConstRotation{Axis::x, -90.0},
      ConstRotation{Axis::z, -90.0},
      JointRotation{Axis::z, 5, wrist_scale, 10.0},
      // to indexfinger_x; T(0,-1,0) T(6,0,0) composed into one translation
      Translate{{6.0, -1.0, 0.0}},
      JointRotation{Axis::z, 6, wrist_scale, 60.0},
      // fingertip
      Translate{{6.0, 0.0, 0.0}},
      ConstRotation{Axis::y, 90.0},
  };
  std::vector<JointMark> marks{{2, "shoulder_z"}, {5, "shoulder_y"}, {8, "arm_x"},          {12, "elbow_y"},
                               {15, "wrist_z"},   {19, "wrist_x"},   {21, "indexfinger_x"}};
  return KinematicChain("nico_right_arm", std::move(joints), std::move(p), std::move(marks));
}

}  // namespace armtraj
