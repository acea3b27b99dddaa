#pragma once

// Scalar reverse-mode differentiation. Every operation appends one node to a
// Tape holding the node value and the local partials towards its parents;
// `Tape::gradient` runs a single reverse sweep.
//
// A tape is single-threaded. Distinct tapes share nothing and may be used on
// different threads concurrently.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace smoothtraj::ad {

class Tape;

/// A scalar recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;
  double value = 0.0;
};

class Tape {
 public:
  Tape() { edge_begin_.push_back(0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent input.
  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);

  std::size_t size() const { return values_.size(); }

  /// Drops every node recorded after `mark` (a previous `size()`), so leaves
  /// registered before it can be reused across forward passes.
  void rewind(std::size_t mark);
  void clear() { rewind(0); }
  void reserve(std::size_t nodes, std::size_t edges);

  /// Reverse accumulation from `output`; returns d output / d w for each w.
  /// Throws std::invalid_argument if a node does not belong to this tape.
  std::vector<double> gradient(const Var& output, std::span<const Var> wrt);

  /// Adjoints of every node after the last `gradient` call.
  std::span<const double> adjoints() const { return adjoint_; }

  // Node construction used by the primitives below.
  Var push(double value, std::initializer_list<std::pair<std::uint32_t, double>> edges);
  Var push(double value, std::span<const std::uint32_t> parents, std::span<const double> partials);

 private:
  friend Var affine(std::span<const Var>, std::span<const Var>, const Var&);

  std::vector<double> values_;
  std::vector<std::uint32_t> edge_begin_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<double> adjoint_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);

Var tanh(const Var& a);
/// Subgradient 0 at a == 0.
Var relu(const Var& a);
/// Ties select the first operand.
Var min(const Var& a, const Var& b);
Var sqrt(const Var& a);
Var square(const Var& a);

/// Sum of `terms` as a single node.
Var sum(std::span<const Var> terms);
/// bias + sum_i weights[i] * inputs[i] as a single node.
Var affine(std::span<const Var> weights, std::span<const Var> inputs, const Var& bias);

}  // namespace smoothtraj::ad
