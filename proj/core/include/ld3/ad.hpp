#pragma once

// Reverse-mode differentiation over 64-bit scalars.
//
// A Tape records every operation applied to tape-bound Vars as a node holding
// its value and the local partial derivatives with respect to its parents.
// Vars that are not bound to a tape are constants: operations on constants
// are folded to plain arithmetic and never reach a tape, so the same templated
// numeric code runs with S = double or S = Var and produces identical values.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ld3::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: implicit constant

  double value() const noexcept { return value_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

class Tape {
 public:
  Tape() { begin_.push_back(0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New leaf node.
  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);

  /// Records a node with the given parents and partials. Constant parents
  /// are dropped; if none remain the result is a constant.
  Var record(double value, std::span<const Var> parents, std::span<const double> partials);
  Var record(double value, const Var& a, double da);
  Var record(double value, const Var& a, double da, const Var& b, double db);

  /// Reverse sweep from `output` (seeded with `seed`). Adjoints from any
  /// earlier sweep are discarded first, so a recorded region may be swept
  /// several times (one output at a time) without re-recording.
  void backward(const Var& output, double seed = 1.0);
  /// Sweep seeded at several outputs at once (vector-Jacobian product).
  void backward(std::span<const Var> outputs, std::span<const double> seeds);

  double adjoint(const Var& v) const;
  std::vector<double> adjoints(std::span<const Var> vars) const;

  /// Number of recorded nodes.
  std::size_t size() const noexcept { return values_.size(); }
  void clear();

 private:
  void sweep(std::size_t top);

  std::vector<double> values_;
  std::vector<std::uint32_t> begin_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<double> adjoint_;
};

/// Gradient of a scalar with respect to each leaf group. Leaves that the
/// loss does not depend on get zero. Throws GradientError if a non-finite
/// value or adjoint is met on the path.
std::vector<std::vector<double>> gradient(const Var& loss,
                                          std::initializer_list<std::span<const Var>> groups);

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Var& x) noexcept { return x.value(); }

std::vector<double> values(std::span<const Var> xs);
std::vector<Var> constants(std::span<const double> xs);

Var operator-(const Var& a);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// Comparisons look at values only.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

Var exp(const Var& a);
Var expm1(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var pow(const Var& a, double p);
Var sigmoid(const Var& a);
Var silu(const Var& a);
Var square(const Var& a);

Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);
Var dot(std::span<const double> a, std::span<const Var> b);
Var logsumexp(std::span<const Var> xs);
/// Euclidean norm; the derivative at the origin is taken with a 1e-30
/// regularizer on the denominator, which makes it zero.
Var norm(std::span<const Var> xs);

/// Pass-through when lo <= a <= hi, otherwise the bound as a constant.
Var clamp(const Var& a, double lo, double hi);

}  // namespace ld3::ad

namespace ld3 {

// Double overloads with the same names so templated code can call them
// unqualified for either scalar type.
inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }
inline double silu(double a) { return a * sigmoid(a); }
inline double square(double a) { return a * a; }
double sum(std::span<const double> xs);
double dot(std::span<const double> a, std::span<const double> b);
double logsumexp(std::span<const double> xs);
double norm(std::span<const double> xs);
inline double clamp(double a, double lo, double hi) { return a < lo ? lo : (a > hi ? hi : a); }

using ad::clamp;
using ad::dot;
using ad::logsumexp;
using ad::norm;
using ad::sigmoid;
using ad::silu;
using ad::square;
using ad::sum;

}  // namespace ld3
