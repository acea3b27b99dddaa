#include "smoothtraj/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace smoothtraj::ad {

namespace {

Tape& common_tape(const Var& a, const Var& b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("autodiff: operands recorded on different tapes");
  }
  return *a.tape;
}

Tape& tape_of(const Var& a) {
  if (a.tape == nullptr) throw std::invalid_argument("autodiff: variable has no tape");
  return *a.tape;
}

}  // namespace

Var Tape::variable(double value) { return push(value, {}); }

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

void Tape::rewind(std::size_t mark) {
  if (mark > values_.size()) throw std::invalid_argument("Tape::rewind: mark beyond tape end");
  values_.resize(mark);
  edge_begin_.resize(mark + 1);
  parents_.resize(edge_begin_.back());
  partials_.resize(edge_begin_.back());
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  values_.reserve(nodes);
  edge_begin_.reserve(nodes + 1);
  parents_.reserve(edges);
  partials_.reserve(edges);
}

Var Tape::push(double value, std::initializer_list<std::pair<std::uint32_t, double>> edges) {
  for (const auto& [parent, partial] : edges) {
    parents_.push_back(parent);
    partials_.push_back(partial);
  }
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return {this, id, value};
}

Var Tape::push(double value, std::span<const std::uint32_t> parents, std::span<const double> partials) {
  parents_.insert(parents_.end(), parents.begin(), parents.end());
  partials_.insert(partials_.end(), partials.begin(), partials.end());
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return {this, id, value};
}

std::vector<double> Tape::gradient(const Var& output, std::span<const Var> wrt) {
  if (output.tape != this || output.id >= values_.size()) {
    throw std::invalid_argument("Tape::gradient: output is not on this tape");
  }
  adjoint_.assign(values_.size(), 0.0);
  adjoint_[output.id] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    const double a = adjoint_[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e) {
      adjoint_[parents_[e]] += a * partials_[e];
    }
  }
  std::vector<double> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.tape != this || w.id >= values_.size()) {
      throw std::invalid_argument("Tape::gradient: input is not on this tape");
    }
    out.push_back(adjoint_[w.id]);
  }
  return out;
}

Var operator+(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value + b.value, {{a.id, 1.0}, {b.id, 1.0}});
}

Var operator-(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value - b.value, {{a.id, 1.0}, {b.id, -1.0}});
}

Var operator*(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value * b.value, {{a.id, b.value}, {b.id, a.value}});
}

Var operator/(const Var& a, const Var& b) {
  if (b.value == 0.0) throw std::domain_error("autodiff: division by zero");
  const double q = a.value / b.value;
  return common_tape(a, b).push(q, {{a.id, 1.0 / b.value}, {b.id, -q / b.value}});
}

Var operator-(const Var& a) { return tape_of(a).push(-a.value, {{a.id, -1.0}}); }

Var operator+(const Var& a, double b) { return tape_of(a).push(a.value + b, {{a.id, 1.0}}); }
Var operator+(double a, const Var& b) { return b + a; }
Var operator-(const Var& a, double b) { return tape_of(a).push(a.value - b, {{a.id, 1.0}}); }
Var operator-(double a, const Var& b) { return tape_of(b).push(a - b.value, {{b.id, -1.0}}); }
Var operator*(const Var& a, double b) { return tape_of(a).push(a.value * b, {{a.id, b}}); }
Var operator*(double a, const Var& b) { return b * a; }

Var operator/(const Var& a, double b) {
  if (b == 0.0) throw std::domain_error("autodiff: division by zero");
  return tape_of(a).push(a.value / b, {{a.id, 1.0 / b}});
}

Var tanh(const Var& a) {
  const double t = std::tanh(a.value);
  return tape_of(a).push(t, {{a.id, 1.0 - t * t}});
}

Var relu(const Var& a) {
  return a.value > 0.0 ? tape_of(a).push(a.value, {{a.id, 1.0}}) : tape_of(a).push(0.0, {{a.id, 0.0}});
}

Var min(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.value <= b.value) return t.push(a.value, {{a.id, 1.0}, {b.id, 0.0}});
  return t.push(b.value, {{a.id, 0.0}, {b.id, 1.0}});
}

Var sqrt(const Var& a) {
  if (a.value < 0.0) throw std::domain_error("autodiff: sqrt of a negative value");
  const double r = std::sqrt(a.value);
  return tape_of(a).push(r, {{a.id, 0.5 / r}});
}

Var square(const Var& a) { return tape_of(a).push(a.value * a.value, {{a.id, 2.0 * a.value}}); }

Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("autodiff: sum of no terms");
  Tape& t = tape_of(terms.front());
  double total = 0.0;
  std::vector<std::uint32_t> parents;
  parents.reserve(terms.size());
  for (const auto& v : terms) {
    if (v.tape != &t) throw std::invalid_argument("autodiff: operands recorded on different tapes");
    total += v.value;
    parents.push_back(v.id);
  }
  const std::vector<double> ones(terms.size(), 1.0);
  return t.push(total, parents, ones);
}

Var affine(std::span<const Var> weights, std::span<const Var> inputs, const Var& bias) {
  if (weights.size() != inputs.size()) throw std::invalid_argument("autodiff: affine size mismatch");
  Tape& t = tape_of(bias);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].tape != &t || inputs[i].tape != &t) {
      throw std::invalid_argument("autodiff: operands recorded on different tapes");
    }
  }
  // Written straight into the edge arrays; this is the hot loop of training.
  double acc = bias.value;
  t.parents_.push_back(bias.id);
  t.partials_.push_back(1.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Var& w = weights[i];
    const Var& x = inputs[i];
    acc += w.value * x.value;
    t.parents_.push_back(w.id);
    t.partials_.push_back(x.value);
    t.parents_.push_back(x.id);
    t.partials_.push_back(w.value);
  }
  const auto id = static_cast<std::uint32_t>(t.values_.size());
  t.values_.push_back(acc);
  t.edge_begin_.push_back(static_cast<std::uint32_t>(t.parents_.size()));
  return {&t, id, acc};
}

}  // namespace smoothtraj::ad
