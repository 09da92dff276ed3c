#include "ld3/ad.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "ld3/error.hpp"

namespace ld3::ad {

namespace {

Tape* common_tape(std::span<const Var> xs) {
  Tape* tape = nullptr;
  for (const auto& x : xs) {
    if (x.is_constant()) continue;
    if (tape == nullptr) {
      tape = x.tape();
    } else if (tape != x.tape()) {
      throw InputError("operands recorded on different tapes");
    }
  }
  return tape;
}

}  // namespace

Var Tape::variable(double value) {
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(this, static_cast<std::uint32_t>(values_.size() - 1), value);
}

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

Var Tape::record(double value, std::span<const Var> parents, std::span<const double> partials) {
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i].is_constant()) continue;
    parents_.push_back(parents[i].index());
    partials_.push_back(partials[i]);
  }
  const auto first = begin_.back();
  if (parents_.size() == first) return Var(value);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(this, static_cast<std::uint32_t>(values_.size() - 1), value);
}

Var Tape::record(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  parents_.push_back(a.index());
  partials_.push_back(da);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(this, static_cast<std::uint32_t>(values_.size() - 1), value);
}

Var Tape::record(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant()) return record(value, b, db);
  if (b.is_constant()) return record(value, a, da);
  if (a.tape() != b.tape()) throw InputError("operands recorded on different tapes");
  parents_.push_back(a.index());
  partials_.push_back(da);
  parents_.push_back(b.index());
  partials_.push_back(db);
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(this, static_cast<std::uint32_t>(values_.size() - 1), value);
}

void Tape::backward(const Var& output, double seed) {
  const Var outputs[] = {output};
  const double seeds[] = {seed};
  backward(outputs, seeds);
}

void Tape::backward(std::span<const Var> outputs, std::span<const double> seeds) {
  adjoint_.assign(values_.size(), 0.0);
  std::size_t top = 0;
  bool any = false;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].is_constant()) continue;
    if (outputs[i].tape() != this) throw InputError("backward output is not on this tape");
    adjoint_[outputs[i].index()] += seeds[i];
    top = std::max<std::size_t>(top, outputs[i].index() + 1);
    any = true;
  }
  if (any) sweep(top);
}

void Tape::sweep(std::size_t top) {
  for (std::size_t k = top; k-- > 0;) {
    const double a = adjoint_[k];
    if (a == 0.0) continue;
    if (!std::isfinite(a) || !std::isfinite(values_[k])) {
      // report the earliest recorded operation that went non-finite
      std::size_t first = k;
      for (std::size_t j = 0; j < k; ++j) {
        if (!std::isfinite(values_[j])) {
          first = j;
          break;
        }
      }
      throw GradientError("non-finite value or adjoint", first);
    }
    for (auto j = begin_[k]; j < begin_[k + 1]; ++j) {
      if (!std::isfinite(partials_[j])) throw GradientError("non-finite local derivative", k);
      adjoint_[parents_[j]] += a * partials_[j];
    }
  }
}

double Tape::adjoint(const Var& v) const {
  if (v.is_constant() || v.tape() != this || v.index() >= adjoint_.size()) return 0.0;
  return adjoint_[v.index()];
}

std::vector<double> Tape::adjoints(std::span<const Var> vars) const {
  std::vector<double> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(adjoint(v));
  return out;
}

void Tape::clear() {
  values_.clear();
  begin_.assign(1, 0);
  parents_.clear();
  partials_.clear();
  adjoint_.clear();
}

std::vector<std::vector<double>> gradient(const Var& loss,
                                          std::initializer_list<std::span<const Var>> groups) {
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  if (loss.is_constant()) {
    for (const auto& g : groups) out.emplace_back(g.size(), 0.0);
    return out;
  }
  Tape& tape = *loss.tape();
  tape.backward(loss);
  for (const auto& g : groups) out.push_back(tape.adjoints(g));
  return out;
}

std::vector<double> values(std::span<const Var> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.value());
  return out;
}

std::vector<Var> constants(std::span<const double> xs) { return {xs.begin(), xs.end()}; }

namespace {

Var unary(const Var& a, double value, double da) {
  if (a.is_constant()) return Var(value);
  return a.tape()->record(value, a, da);
}

Var binary(const Var& a, const Var& b, double value, double da, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  Tape* tape = a.is_constant() ? b.tape() : a.tape();
  return tape->record(value, a, da, b, db);
}

}  // namespace

Var operator-(const Var& a) { return unary(a, -a.value(), -1.0); }

Var operator+(const Var& a, const Var& b) {
  return binary(a, b, a.value() + b.value(), 1.0, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  return binary(a, b, a.value() - b.value(), 1.0, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  return binary(a, b, a.value() * b.value(), b.value(), a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return binary(a, b, q, 1.0 / b.value(), -q / b.value());
}

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return unary(a, e, e);
}

Var expm1(const Var& a) { return unary(a, std::expm1(a.value()), std::exp(a.value())); }

Var log(const Var& a) { return unary(a, std::log(a.value()), 1.0 / a.value()); }

Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return unary(a, s, 0.5 / s);
}

Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return unary(a, t, 1.0 - t * t);
}

Var sin(const Var& a) { return unary(a, std::sin(a.value()), std::cos(a.value())); }

Var cos(const Var& a) { return unary(a, std::cos(a.value()), -std::sin(a.value())); }

Var pow(const Var& a, double p) {
  return unary(a, std::pow(a.value(), p), p * std::pow(a.value(), p - 1.0));
}

Var sigmoid(const Var& a) {
  const double s = ld3::sigmoid(a.value());
  return unary(a, s, s * (1.0 - s));
}

Var silu(const Var& a) {
  const double x = a.value();
  const double s = ld3::sigmoid(x);
  return unary(a, x * s, s * (1.0 + x * (1.0 - s)));
}

Var square(const Var& a) { return unary(a, a.value() * a.value(), 2.0 * a.value()); }

Var sum(std::span<const Var> xs) {
  Tape* tape = common_tape(xs);
  double s = 0.0;
  for (const auto& x : xs) s += x.value();
  if (tape == nullptr) return Var(s);
  std::vector<double> ones(xs.size(), 1.0);
  return tape->record(s, xs, ones);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw InputError("dot: size mismatch");
  std::vector<Var> parents;
  std::vector<double> partials;
  parents.reserve(2 * a.size());
  partials.reserve(2 * a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i].value() * b[i].value();
    parents.push_back(a[i]);
    partials.push_back(b[i].value());
    parents.push_back(b[i]);
    partials.push_back(a[i].value());
  }
  Tape* tape = common_tape(parents);
  if (tape == nullptr) return Var(s);
  return tape->record(s, parents, partials);
}

Var dot(std::span<const double> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw InputError("dot: size mismatch");
  Tape* tape = common_tape(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i].value();
  if (tape == nullptr) return Var(s);
  return tape->record(s, b, a);
}

Var logsumexp(std::span<const Var> xs) {
  if (xs.empty()) return Var(-std::numeric_limits<double>::infinity());
  double m = xs[0].value();
  for (const auto& x : xs) m = std::max(m, x.value());
  double z = 0.0;
  for (const auto& x : xs) z += std::exp(x.value() - m);
  const double out = m + std::log(z);
  Tape* tape = common_tape(xs);
  if (tape == nullptr) return Var(out);
  std::vector<double> partials;
  partials.reserve(xs.size());
  for (const auto& x : xs) partials.push_back(std::exp(x.value() - out));
  return tape->record(out, xs, partials);
}

Var norm(std::span<const Var> xs) {
  double s = 0.0;
  for (const auto& x : xs) s += x.value() * x.value();
  const double n = std::sqrt(s);
  Tape* tape = common_tape(xs);
  if (tape == nullptr) return Var(n);
  const double denom = n == 0.0 ? 1e-30 : n;
  std::vector<double> partials;
  partials.reserve(xs.size());
  for (const auto& x : xs) partials.push_back(x.value() / denom);
  return tape->record(n, xs, partials);
}

Var clamp(const Var& a, double lo, double hi) {
  if (a.value() < lo) return Var(lo);
  if (a.value() > hi) return Var(hi);
  return a;
}

}  // namespace ld3::ad

namespace ld3 {

double sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  double z = 0.0;
  for (double x : xs) z += std::exp(x - m);
  return m + std::log(z);
}

double norm(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

}  // namespace ld3
