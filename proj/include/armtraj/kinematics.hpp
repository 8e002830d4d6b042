#pragma once

// Forward kinematics of a serial chain of translate / rotate primitives.
//
// The chain is written torso-outward (M_0, M_1, ..., M_{k-1}). Evaluation
// applies the primitives to the origin one at a time starting from the
// finger side, so no 4x4 product is ever formed:
//   position  = M_0 (M_1 ( ... (M_{k-1} (0,0,0,1)) ... ))
//   direction = R_0 (R_1 ( ... (R_{k-1} (0,0,1)) ... ))
// Angles are in degrees at the interface and converted to radians here.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "armtraj/autodiff.hpp"

namespace armtraj {

template <typename T>
using Vec3 = std::array<T, 3>;
using Vec3d = Vec3<double>;

/// Joint angles in degrees, one per degree of freedom.
using Pose = std::vector<double>;

enum class Axis { x, y, z };

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Translate {
  Vec3d xyz{};
  bool operator==(const Translate&) const = default;
};

struct ConstRotation {
  Axis axis = Axis::z;
  double deg = 0.0;
  bool operator==(const ConstRotation&) const = default;
};

// Rotation by scale * theta[joint] + offset_deg.
struct JointRotation {
  Axis axis = Axis::z;
  std::size_t joint = 0;
  double scale = 1.0;
  double offset_deg = 0.0;
  bool operator==(const JointRotation&) const = default;
};

using Primitive = std::variant<Translate, ConstRotation, JointRotation>;

struct Joint {
  std::string name;
  double min_deg = -180.0;
  double max_deg = 180.0;
  bool operator==(const Joint&) const = default;
};

/// Primitive after which the running frame origin is reported as a joint point.
struct JointMark {
  std::size_t primitive = 0;
  std::string joint;
  bool operator==(const JointMark&) const = default;
};

class ChainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class KinematicChain {
 public:
  KinematicChain(std::string name, std::vector<Joint> joints, std::vector<Primitive> primitives,
                 std::vector<JointMark> marks = {})
      : name_(std::move(name)),
        joints_(std::move(joints)),
        primitives_(std::move(primitives)),
        marks_(std::move(marks)) {
    validate();
  }

  const std::string& name() const { return name_; }
  std::size_t dof() const { return joints_.size(); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Primitive>& primitives() const { return primitives_; }
  const std::vector<JointMark>& marks() const { return marks_; }

  std::size_t joint_index(const std::string& name) const {
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      if (joints_[j].name == name) return j;
    }
    throw ChainError("unknown joint '" + name + "'");
  }

  bool within_limits(std::span<const double> pose, double tolerance = 0.0) const {
    if (pose.size() != dof()) return false;
    for (std::size_t j = 0; j < dof(); ++j) {
      if (pose[j] < joints_[j].min_deg - tolerance || pose[j] > joints_[j].max_deg + tolerance) return false;
    }
    return true;
  }

  bool operator==(const KinematicChain&) const = default;

 private:
  void validate() const {
    if (joints_.empty()) throw ChainError("chain has no joints");
    if (primitives_.empty()) throw ChainError("chain has no primitives");
    std::vector<bool> used(joints_.size(), false);
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      const Joint& jt = joints_[j];
      if (jt.name.empty()) throw ChainError("joint " + std::to_string(j) + " has no name");
      if (!std::isfinite(jt.min_deg) || !std::isfinite(jt.max_deg) || !(jt.min_deg < jt.max_deg)) {
        throw ChainError("joint '" + jt.name + "': limits require min_deg < max_deg");
      }
      for (std::size_t k = 0; k < j; ++k) {
        if (joints_[k].name == jt.name) throw ChainError("duplicate joint name '" + jt.name + "'");
      }
    }
    for (std::size_t i = 0; i < primitives_.size(); ++i) {
      const auto where = "primitive " + std::to_string(i) + ": ";
      if (const auto* t = std::get_if<Translate>(&primitives_[i])) {
        for (double c : t->xyz) {
          if (!std::isfinite(c)) throw ChainError(where + "non-finite translation");
        }
      } else if (const auto* r = std::get_if<ConstRotation>(&primitives_[i])) {
        if (!std::isfinite(r->deg)) throw ChainError(where + "non-finite angle");
      } else {
        const auto& jr = std::get<JointRotation>(primitives_[i]);
        if (jr.joint >= joints_.size()) throw ChainError(where + "joint index out of range");
        if (jr.scale == 0.0 || !std::isfinite(jr.scale)) throw ChainError(where + "joint scale must be nonzero");
        if (!std::isfinite(jr.offset_deg)) throw ChainError(where + "non-finite offset");
        used[jr.joint] = true;
      }
    }
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      if (!used[j]) throw ChainError("joint '" + joints_[j].name + "' drives no primitive");
    }
    for (const JointMark& mark : marks_) {
      if (mark.primitive >= primitives_.size()) {
        throw ChainError("mark '" + mark.joint + "' refers to primitive " + std::to_string(mark.primitive) +
                         " beyond the chain");
      }
    }
  }

  std::string name_;
  std::vector<Joint> joints_;
  std::vector<Primitive> primitives_;
  std::vector<JointMark> marks_;
};

template <typename T>
struct EffectorState {
  Vec3<T> position{};
  Vec3<T> direction{};
  std::vector<Vec3<T>> joint_points;
};

namespace detail {

// Rotation matrices exactly as the model defines them. Note the R_y sign
// placement: (x, y, z) -> (c x - s z, y, s x + c z).
template <typename T, typename C>
Vec3<T> rotate(Axis axis, const C& c, const C& s, const Vec3<T>& v) {
  switch (axis) {
    case Axis::x: return {v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]};
    case Axis::y: return {c * v[0] - s * v[2], v[1], s * v[0] + c * v[2]};
    case Axis::z: break;
  }
  return {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
}

template <typename T>
T joint_angle_deg(const JointRotation& jr, const T& theta) {
  T a = theta;
  if (jr.scale != 1.0) a = a * jr.scale;
  if (jr.offset_deg != 0.0) a = a + jr.offset_deg;
  return a;
}

// Applies primitive k to a point (translations) or direction (rotations only).
template <typename T>
Vec3<T> apply(const Primitive& prim, std::span<const T> pose, const Vec3<T>& v, bool is_point) {
  using std::cos;
  using std::sin;
  if (const auto* t = std::get_if<Translate>(&prim)) {
    if (!is_point) return v;
    return {v[0] + t->xyz[0], v[1] + t->xyz[1], v[2] + t->xyz[2]};
  }
  if (const auto* r = std::get_if<ConstRotation>(&prim)) {
    const double rad = r->deg * kDegToRad;
    return rotate<T, double>(r->axis, std::cos(rad), std::sin(rad), v);
  }
  const auto& jr = std::get<JointRotation>(prim);
  const T rad = joint_angle_deg(jr, pose[jr.joint]) * kDegToRad;
  const T c = cos(rad);
  const T s = sin(rad);
  return rotate<T, T>(jr.axis, c, s, v);
}

// Origin pushed through primitives [0, last] inclusive.
template <typename T>
Vec3<T> point_through(const KinematicChain& chain, std::span<const T> pose, std::size_t last) {
  Vec3<T> p{T(0.0), T(0.0), T(0.0)};
  const auto& prims = chain.primitives();
  for (std::size_t k = last + 1; k-- > 0;) p = apply<T>(prims[k], pose, p, true);
  return p;
}

}  // namespace detail

class PoseSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Forward kinematics for one pose. Generic over double and ad::Var.
template <typename T>
EffectorState<T> fk(const KinematicChain& chain, std::span<const T> pose, bool with_joint_points = true) {
  if (pose.size() != chain.dof()) {
    throw PoseSizeError("pose has " + std::to_string(pose.size()) + " angles, chain '" + chain.name() + "' expects " +
                        std::to_string(chain.dof()));
  }
  const auto& prims = chain.primitives();
  EffectorState<T> out;
  out.position = detail::point_through<T>(chain, pose, prims.size() - 1);
  Vec3<T> d{T(0.0), T(0.0), T(1.0)};
  for (std::size_t k = prims.size(); k-- > 0;) d = detail::apply<T>(prims[k], pose, d, false);
  out.direction = d;
  if (with_joint_points) {
    out.joint_points.reserve(chain.marks().size());
    for (const JointMark& mark : chain.marks()) {
      out.joint_points.push_back(detail::point_through<T>(chain, pose, mark.primitive));
    }
  }
  return out;
}

inline EffectorState<double> fk(const KinematicChain& chain, const Pose& pose) {
  return fk<double>(chain, std::span<const double>(pose));
}

/// Row-wise fk over a trajectory; rows must all have chain.dof() entries.
inline std::vector<EffectorState<double>> fk_batch(const KinematicChain& chain, const std::vector<Pose>& poses) {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].size() != chain.dof()) {
      throw PoseSizeError("ragged batch: row " + std::to_string(i) + " has " + std::to_string(poses[i].size()) +
                          " angles, expected " + std::to_string(chain.dof()));
    }
  }
  std::vector<EffectorState<double>> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back(fk(chain, p));
  return out;
}

/// Differentiable fk; all tape-backed inputs must share one tape. No joint points.
inline EffectorState<ad::Var> fk_diff(const KinematicChain& chain, std::span<const ad::Var> pose) {
  return fk<ad::Var>(chain, pose, false);
}

template <typename T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <typename T>
Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

template <typename T>
Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3d operator*(double s, const Vec3d& v) { return {s * v[0], s * v[1], s * v[2]}; }

inline double norm(const Vec3d& v) { return std::sqrt(dot(v, v)); }

inline Vec3d cross(const Vec3d& a, const Vec3d& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Vec3d normalized(const Vec3d& v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw std::invalid_argument("cannot normalize a zero vector");
  return (1.0 / n) * v;
}

}  // namespace armtraj
