#pragma once

// Scalar reverse-mode automatic differentiation on an append-only tape.
//
// A Var is either a constant (no tape) or a handle to a node of a Tape.
// Every arithmetic operation on tape-backed operands appends one node that
// stores the ids of its parents and the local partial derivatives, so the
// tape is topologically ordered by construction. backward() performs a single
// reverse sweep and returns the adjoint of every node with respect to a root.
//
// A Tape is single-owner: record on it from one thread only. Constants carry
// no tape pointer and are freely shareable.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace armtraj::ad {

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  sin,
  cos,
  sqrt,
  sigmoid,
  square,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::sqrt: return "sqrt";
    case Op::sigmoid: return "sigmoid";
    case Op::square: return "square";
  }
  return "?";
}

class AutodiffError : public std::runtime_error {
 public:
  AutodiffError(const std::string& what, std::int64_t node)
      : std::runtime_error(what + " (node " + std::to_string(node) + ")"), node_(node) {}
  /// Index the offending node had or would have had; -1 for constant folding.
  std::int64_t node() const { return node_; }

 private:
  std::int64_t node_;
};

class Tape;
class Gradients;

class Var {
 public:
  Var() = default;
  // Implicit: plain numbers enter expressions as constants.
  Var(double value) : value_(value) {  // NOLINT(google-explicit-constructor)
    if (!std::isfinite(value)) throw AutodiffError("non-finite constant", -1);
  }

  double value() const { return value_; }
  std::int32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  Var(double value, std::int32_t id, Tape* tape) : value_(value), id_(id), tape_(tape) {}

  double value_ = 0.0;
  std::int32_t id_ = -1;
  Tape* tape_ = nullptr;
};

class Tape {
 public:
  struct Node {
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    double d_lhs = 0.0;
    double d_rhs = 0.0;
    Op op = Op::leaf;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent variable.
  Var variable(double value) {
    if (!std::isfinite(value)) throw AutodiffError("non-finite variable", size());
    nodes_.push_back(Node{});
    return Var(value, static_cast<std::int32_t>(nodes_.size() - 1), this);
  }

  /// Drops all nodes but keeps the allocation. Vars recorded earlier become invalid.
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
  const Node& node(std::int32_t id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  bool owns(const Var& v) const { return v.tape_ == this && v.id_ >= 0 && v.id_ < size(); }

  Gradients backward(const Var& root) const;

  // Records a unary result; `arg` must be tape-backed.
  Var record(Op op, double value, const Var& arg, double d_arg) {
    check_value(op, value);
    nodes_.push_back(Node{arg.id_, -1, d_arg, 0.0, op});
    return Var(value, static_cast<std::int32_t>(nodes_.size() - 1), this);
  }

  Var record(Op op, double value, const Var& a, double d_a, const Var& b, double d_b) {
    check_value(op, value);
    nodes_.push_back(Node{a.id_, b.id_, d_a, d_b, op});
    return Var(value, static_cast<std::int32_t>(nodes_.size() - 1), this);
  }

  void check_value(Op op, double value) const {
    if (!std::isfinite(value)) {
      throw AutodiffError(std::string("non-finite result of ") + op_name(op), size());
    }
  }

 private:
  std::vector<Node> nodes_;
};

/// Adjoints of every node of a tape with respect to one root.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<double> adjoints) : adjoints_(std::move(adjoints)) {}

  /// Zero for constants and for nodes the root does not depend on.
  double operator[](const Var& v) const { return at(v.id()); }
  double at(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= adjoints_.size()) return 0.0;
    return adjoints_[static_cast<std::size_t>(id)];
  }
  bool empty() const { return adjoints_.empty(); }
  std::size_t size() const { return adjoints_.size(); }
  const std::vector<double>& adjoints() const { return adjoints_; }

 private:
  std::vector<double> adjoints_;
};

inline Gradients Tape::backward(const Var& root) const {
  if (root.is_constant()) return Gradients{};
  if (!owns(root)) throw AutodiffError("backward root is not on this tape", root.id());
  const auto last = static_cast<std::size_t>(root.id());
  std::vector<double> adj(last + 1, 0.0);
  adj[last] = 1.0;
  for (std::size_t i = last + 1; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.lhs >= 0) adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
    if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
  }
  return Gradients(std::move(adj));
}

namespace detail {

inline Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw AutodiffError("operands recorded on different tapes", -1);
  }
  return a.tape() ? a.tape() : b.tape();
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Binary op with partials (da, db) evaluated at the operand values.
inline Var binary(Op op, double value, const Var& a, double da, const Var& b, double db) {
  Tape* tape = common_tape(a, b);
  if (tape == nullptr) {
    if (!std::isfinite(value)) throw AutodiffError(std::string("non-finite result of ") + op_name(op), -1);
    return Var(value);
  }
  if (a.is_constant()) return tape->record(op, value, b, db);
  if (b.is_constant()) return tape->record(op, value, a, da);
  return tape->record(op, value, a, da, b, db);
}

inline Var unary(Op op, double value, const Var& a, double da) {
  if (a.is_constant()) {
    if (!std::isfinite(value)) throw AutodiffError(std::string("non-finite result of ") + op_name(op), -1);
    return Var(value);
  }
  return a.tape()->record(op, value, a, da);
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(Op::add, a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(Op::sub, a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(Op::mul, a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) {
    const std::int64_t at = detail::common_tape(a, b) ? detail::common_tape(a, b)->size() : -1;
    throw AutodiffError("division by zero", at);
  }
  const double q = a.value() / b.value();
  return detail::binary(Op::div, q, a, 1.0 / b.value(), b, -q / b.value());
}
inline Var operator-(const Var& a) { return detail::unary(Op::neg, -a.value(), a, -1.0); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline Var sin(const Var& a) { return detail::unary(Op::sin, std::sin(a.value()), a, std::cos(a.value())); }
inline Var cos(const Var& a) { return detail::unary(Op::cos, std::cos(a.value()), a, -std::sin(a.value())); }
inline Var sqrt(const Var& a) {
  if (a.value() < 0.0) {
    throw AutodiffError("sqrt of negative value", a.tape() ? a.tape()->size() : -1);
  }
  const double r = std::sqrt(a.value());
  if (r == 0.0 && !a.is_constant()) throw AutodiffError("sqrt derivative undefined at 0", a.tape()->size());
  return detail::unary(Op::sqrt, r, a, r == 0.0 ? 0.0 : 0.5 / r);
}
inline Var sigmoid(const Var& a) {
  const double s = detail::sigmoid_value(a.value());
  return detail::unary(Op::sigmoid, s, a, s * (1.0 - s));
}
inline Var square(const Var& a) {
  return detail::unary(Op::square, a.value() * a.value(), a, 2.0 * a.value());
}

/// Generic entry point; `b` is ignored for unary kinds.
inline Var apply(Op op, const Var& a, const Var& b = Var{}) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::neg: return -a;
    case Op::sin: return sin(a);
    case Op::cos: return cos(a);
    case Op::sqrt: return sqrt(a);
    case Op::sigmoid: return sigmoid(a);
    case Op::square: return square(a);
    case Op::leaf: break;
  }
  throw std::invalid_argument("apply: leaf is not an operation");
}

}  // namespace armtraj::ad

namespace armtraj {

// Uniform access for code templated on double / ad::Var.
inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.value(); }

inline double sigmoid(double x) { return ad::detail::sigmoid_value(x); }
inline double square(double x) { return x * x; }

}  // namespace armtraj
