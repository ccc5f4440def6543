#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "causalac/causalac.hpp"

namespace causalac::testing {

inline const char* kHypertensionDocument = R"({"variables":[
  {"name":"U_r","kind":"exogenous","card":2,"prior":[0.75,0.25]},
  {"name":"U_x","kind":"exogenous","card":2,"prior":[0.1,0.9]},
  {"name":"U_y","kind":"exogenous","card":2,"prior":[0.3,0.7]},
  {"name":"U_z","kind":"exogenous","card":2,"prior":[0.05,0.95]},
  {"name":"X","kind":"endogenous","card":2,"parents":["Z","U_x"],"mechanism":[1,0,0,1]},
  {"name":"Y","kind":"endogenous","card":2,"parents":["X","U_y","U_r"],"mechanism":[1,0,0,1,0,1,0,1]},
  {"name":"Z","kind":"endogenous","card":2,"parents":["U_z","U_r"],"mechanism":[0,0,0,1]}
]})";

inline Assignment at(const CausalGraph& g, const std::string& text) { return parse_assignment(g, text); }

// Every instantiation of the given variables.
inline std::vector<Assignment> instantiations(const CausalGraph& g, const std::vector<std::size_t>& vars) {
  std::vector<Assignment> out;
  std::vector<int> digits(vars.size(), 0);
  std::vector<int> cards;
  for (std::size_t v : vars) cards.push_back(g.card(v));
  do {
    Assignment a;
    for (std::size_t i = 0; i < vars.size(); ++i) a[vars[i]] = digits[i];
    out.push_back(a);
  } while (detail::advance(digits, cards));
  return out;
}

// Direct numeric VE: product of every family table and evidence factor,
// summed over all variables.
inline double brute_force_probability(const Parameterization& p, const Assignment& e) {
  const CausalGraph& g = p.graph();
  Factor<double> prod = Factor<double>::scalar(1.0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    std::vector<std::size_t> vars = g.exogenous(v) ? std::vector<std::size_t>{v} : g.family(v);
    std::vector<int> cards;
    for (std::size_t u : vars) cards.push_back(g.card(u));
    prod = multiply(prod, Factor<double>(vars, cards, p.table(v)));
    if (g.endogenous(v)) {
      auto it = e.find(v);
      prod = multiply(prod, evidence_factor(v, g.card(v),
                                            it == e.end() ? std::nullopt : std::optional<int>(it->second)));
    }
  }
  std::vector<std::size_t> all(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) all[v] = v;
  return sum_out(prod, all)[0];
}

// Random parameterization whose endogenous tables are arbitrary
// distributions (deterministic = false) or mechanisms.
inline Parameterization random_params(const CausalGraph& g, std::uint64_t seed, bool deterministic) {
  std::mt19937_64 rng(seed);
  return random_parameterization(g, rng, deterministic);
}

}  // namespace causalac::testing

namespace causalac::testing {

// Evaluates the circuit with arbitrary leaf values, for polynomial identity
// checks that do not go through a normalized parameterization.
template <class LeafFn>
double evaluate_leaves(const Circuit& c, LeafFn&& leaf) {
  std::vector<double> val(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    switch (n.kind) {
      case NodeKind::kConst: val[i] = n.constant; break;
      case NodeKind::kTheta:
      case NodeKind::kLambda: val[i] = leaf(n); break;
      case NodeKind::kAdd:
        val[i] = 0;
        for (NodeId ch : n.children) val[i] += val[ch];
        break;
      case NodeKind::kMul:
        val[i] = 1;
        for (NodeId ch : n.children) val[i] *= val[ch];
        break;
    }
  }
  return val[c.root()];
}

}  // namespace causalac::testing
