#pragma once

// Dense factors over graph variables. A factor's cells are either numbers
// (Factor<double>) or circuit node handles (Factor<NodeId>); the cell type
// keeps the two modes apart at compile time.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "causalac/circuit.hpp"
#include "causalac/error.hpp"
#include "causalac/model.hpp"

namespace causalac {

template <class Cell>
class Factor {
 public:
  Factor() : cells_{Cell{}} {}

  Factor(std::vector<std::size_t> vars, std::vector<int> cards, std::vector<Cell> cells)
      : vars_(std::move(vars)), cards_(std::move(cards)), cells_(std::move(cells)) {
    if (vars_.size() != cards_.size()) throw StructureError("factor: vars/cards length mismatch");
    std::size_t n = 1;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (cards_[i] < 1) throw StructureError("factor: cardinality must be positive");
      for (std::size_t j = 0; j < i; ++j) {
        if (vars_[i] == vars_[j]) throw StructureError("factor: duplicate variable");
      }
      n *= static_cast<std::size_t>(cards_[i]);
    }
    if (cells_.size() != n) throw StructureError("factor: cell count does not match cardinalities");
  }

  static Factor scalar(Cell c) { return Factor({}, {}, {std::move(c)}); }

  const std::vector<std::size_t>& vars() const { return vars_; }
  const std::vector<int>& cards() const { return cards_; }
  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  const Cell& operator[](std::size_t i) const { return cells_[i]; }

  bool contains(std::size_t v) const { return position(v).has_value(); }

  std::optional<std::size_t> position(std::size_t v) const {
    auto it = std::find(vars_.begin(), vars_.end(), v);
    if (it == vars_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - vars_.begin());
  }

  // Row-major strides, last variable fastest.
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars_.size(), 1);
    for (std::size_t i = vars_.size(); i-- > 1;) s[i - 1] = s[i] * cards_[i];
    return s;
  }

  friend bool operator==(const Factor&, const Factor&) = default;

 private:
  std::vector<std::size_t> vars_;
  std::vector<int> cards_;
  std::vector<Cell> cells_;
};

struct NumericOps {
  double mul(double a, double b) const { return a * b; }
  double sum(const std::vector<double>& xs) const {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
};

struct SymbolicOps {
  CircuitBuilder* builder;
  NodeId mul(NodeId a, NodeId b) const { return builder->mul(a, b); }
  NodeId sum(const std::vector<NodeId>& xs) const { return builder->add(xs); }
};

namespace detail {

// Odometer over a cardinality vector, last digit fastest.
inline bool advance(std::vector<int>& digits, const std::vector<int>& cards) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    if (++digits[i] < cards[i]) return true;
    digits[i] = 0;
  }
  return false;
}

}  // namespace detail

// Result variables: vars(f) followed by the variables of g not in f.
template <class Cell, class Ops>
Factor<Cell> multiply(const Factor<Cell>& f, const Factor<Cell>& g, const Ops& ops) {
  std::vector<std::size_t> vars = f.vars();
  std::vector<int> cards = f.cards();
  for (std::size_t i = 0; i < g.vars().size(); ++i) {
    if (auto p = f.position(g.vars()[i])) {
      if (f.cards()[*p] != g.cards()[i]) throw StructureError("factor: cardinality mismatch");
    } else {
      vars.push_back(g.vars()[i]);
      cards.push_back(g.cards()[i]);
    }
  }
  const std::vector<std::size_t> fs = f.strides();
  const std::vector<std::size_t> gs = g.strides();
  std::vector<std::size_t> f_step(vars.size(), 0), g_step(vars.size(), 0);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (auto p = f.position(vars[i])) f_step[i] = fs[*p];
    if (auto p = g.position(vars[i])) g_step[i] = gs[*p];
  }
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  std::vector<Cell> cells;
  cells.reserve(n);
  std::vector<int> digits(vars.size(), 0);
  std::size_t fi = 0, gi = 0;
  for (std::size_t k = 0; k < n; ++k) {
    cells.push_back(ops.mul(f[fi], g[gi]));
    for (std::size_t i = vars.size(); i-- > 0;) {
      if (++digits[i] < cards[i]) {
        fi += f_step[i];
        gi += g_step[i];
        break;
      }
      fi -= f_step[i] * (cards[i] - 1);
      gi -= g_step[i] * (cards[i] - 1);
      digits[i] = 0;
    }
  }
  return Factor<Cell>(std::move(vars), std::move(cards), std::move(cells));
}

inline Factor<double> multiply(const Factor<double>& f, const Factor<double>& g) {
  return multiply(f, g, NumericOps{});
}

// Variables of `ys` absent from f are ignored. Each result cell combines its
// group of summed cells in a single ops.sum call, in row-major order.
template <class Cell, class Ops>
Factor<Cell> sum_out(const Factor<Cell>& f, const std::vector<std::size_t>& ys, const Ops& ops) {
  std::vector<char> drop(f.vars().size(), 0);
  bool any = false;
  for (std::size_t y : ys) {
    if (auto p = f.position(y)) {
      drop[*p] = 1;
      any = true;
    }
  }
  if (!any) return f;
  std::vector<std::size_t> vars;
  std::vector<int> cards;
  for (std::size_t i = 0; i < f.vars().size(); ++i) {
    if (!drop[i]) {
      vars.push_back(f.vars()[i]);
      cards.push_back(f.cards()[i]);
    }
  }
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  std::vector<std::vector<Cell>> groups(n);
  std::vector<int> digits(f.vars().size(), 0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (!drop[i]) out = out * f.cards()[i] + digits[i];
    }
    groups[out].push_back(f[k]);
    detail::advance(digits, f.cards());
  }
  std::vector<Cell> cells;
  cells.reserve(n);
  for (auto& g : groups) cells.push_back(ops.sum(g));
  return Factor<Cell>(std::move(vars), std::move(cards), std::move(cells));
}

inline Factor<double> sum_out(const Factor<double>& f, const std::vector<std::size_t>& ys) {
  return sum_out(f, ys, NumericOps{});
}

// One-hot on `observed`, all ones when absent.
inline Factor<double> evidence_factor(std::size_t var, int card, std::optional<int> observed) {
  if (observed && (*observed < 0 || *observed >= card)) {
    throw Error("evidence value " + std::to_string(*observed) + " out of range");
  }
  std::vector<double> cells(card, observed ? 0.0 : 1.0);
  if (observed) cells[*observed] = 1.0;
  return Factor<double>({var}, {card}, std::move(cells));
}

// Indicator leaves lambda_{X=i}; `circuit_var` indexes the builder's names.
inline Factor<NodeId> evidence_factor(CircuitBuilder& b, std::size_t var, int card,
                                      std::uint32_t circuit_var) {
  std::vector<NodeId> cells;
  for (int i = 0; i < card; ++i) cells.push_back(b.lambda(circuit_var, static_cast<std::uint32_t>(i)));
  return Factor<NodeId>({var}, {card}, std::move(cells));
}

// Exact test: every cell is 0 or 1 and each instantiation of the other
// variables has exactly one 1 over x.
inline bool is_mechanism(const Factor<double>& f, std::size_t x) {
  auto p = f.position(x);
  if (!p) throw StructureError("is_mechanism: variable not in factor");
  for (double c : f.cells()) {
    if (c != 0.0 && c != 1.0) return false;
  }
  Factor<double> s = sum_out(f, {x});
  return std::all_of(s.cells().begin(), s.cells().end(), [](double c) { return c == 1.0; });
}

// Numeric family factors of an SCM: prior f_U(U) or mechanism f_V(parents, V).
inline Factor<double> family_factor(const Scm& scm, std::size_t v) {
  const CausalGraph& g = scm.graph();
  if (g.exogenous(v)) return Factor<double>({v}, {g.card(v)}, scm.prior(v));
  std::vector<std::size_t> vars = g.family(v);
  std::vector<int> cards;
  for (std::size_t u : vars) cards.push_back(g.card(u));
  const std::vector<int>& mech = scm.mechanism(v);
  std::vector<double> cells;
  cells.reserve(mech.size() * g.card(v));
  for (int out : mech) {
    for (int x = 0; x < g.card(v); ++x) cells.push_back(x == out ? 1.0 : 0.0);
  }
  return Factor<double>(std::move(vars), std::move(cards), std::move(cells));
}

}  // namespace causalac
