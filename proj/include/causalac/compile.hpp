#pragma once

// Symbolic variable elimination scheduled by a binary jointree.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "causalac/circuit.hpp"
#include "causalac/elimination_order.hpp"
#include "causalac/error.hpp"
#include "causalac/factor.hpp"
#include "causalac/jointree.hpp"
#include "causalac/model.hpp"

namespace causalac {

struct CircuitStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t adds = 0;
  std::size_t muls = 0;
  std::size_t thetas = 0;
  std::size_t lambdas = 0;
  std::size_t constants = 0;
  int depth = 0;
  int width = -1;  // jointree width; -1 when unknown
  std::vector<std::string> thinned;
};

inline CircuitStats circuit_stats(const Circuit& c, int width = -1) {
  CircuitStats s;
  s.nodes = c.size();
  s.edges = c.edge_count();
  s.width = width;
  s.thinned = c.thinned_variables();
  std::vector<int> depth(c.size(), 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    switch (n.kind) {
      case NodeKind::kConst: ++s.constants; break;
      case NodeKind::kTheta: ++s.thetas; break;
      case NodeKind::kLambda: ++s.lambdas; break;
      case NodeKind::kAdd: ++s.adds; break;
      case NodeKind::kMul: ++s.muls; break;
    }
    for (NodeId ch : n.children) depth[i] = std::max(depth[i], depth[ch] + 1);
  }
  s.depth = depth[c.root()];
  return s;
}

struct CompilationResult {
  Circuit circuit;
  Jointree jointree;
  CircuitStats stats;
};

namespace detail {

inline Factor<NodeId> symbolic_family(CircuitBuilder& b, const CausalGraph& g, std::size_t v) {
  const auto var = static_cast<std::uint32_t>(v);
  std::vector<std::size_t> vars = g.exogenous(v) ? std::vector<std::size_t>{v} : g.family(v);
  std::vector<int> cards;
  for (std::size_t u : vars) cards.push_back(g.card(u));
  const std::size_t rows = g.exogenous(v) ? 1 : g.parent_instantiations(v);
  std::vector<NodeId> cells;
  for (std::size_t p = 0; p < rows; ++p) {
    for (int x = 0; x < g.card(v); ++x) {
      cells.push_back(b.theta(var, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(p)));
    }
  }
  return Factor<NodeId>(std::move(vars), std::move(cards), std::move(cells));
}

// Multiplies `factors`, sums out everything outside `keep` except the
// indicator's variable, then folds the indicator in, summing its variable
// last if it is not kept.
inline Factor<NodeId> project(const std::vector<const Factor<NodeId>*>& factors,
                              const Factor<NodeId>* lambda, const VarSet& keep,
                              const SymbolicOps& ops) {
  Factor<NodeId> prod = *factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) prod = multiply(prod, *factors[k], ops);
  const std::optional<std::size_t> lv =
      lambda ? std::optional<std::size_t>(lambda->vars().front()) : std::nullopt;
  std::vector<std::size_t> drop;
  for (std::size_t v : prod.vars()) {
    if (!contains(keep, v) && v != lv) drop.push_back(v);
  }
  prod = sum_out(prod, drop, ops);
  if (lambda) {
    prod = multiply(prod, *lambda, ops);
    if (!contains(keep, *lv)) prod = sum_out(prod, {*lv}, ops);
  }
  return prod;
}

}  // namespace detail

// Compiles `g` along `jt`. Each leaf projects its factor onto its separator,
// each internal node projects the product of its children's messages, and the
// top leaf sums everything out. The indicators of an endogenous variable are
// multiplied in at the first copy of its mechanism in each of its scopes.
inline CompilationResult compile(const CausalGraph& g, const Jointree& jt) {
  if (jt.variable_count() != g.size()) throw StructureError("jointree does not match the graph");
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (jt.name(v) != g.name(v)) throw StructureError("jointree does not match the graph");
  }
  std::vector<std::string> names;
  for (const auto& var : g.variables()) names.push_back(var.name);
  CircuitBuilder b(names);
  SymbolicOps ops{&b};

  if (jt.empty()) {
    Circuit c = b.finish(b.constant(1.0));
    return {c, jt, circuit_stats(c, 0)};
  }

  const int n = static_cast<int>(jt.size());
  std::vector<int> lambda_at(n, 0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.exogenous(v)) continue;
    for (const auto& scope : scopes(jt, v)) {
      auto it = std::find_if(scope.begin(), scope.end(), [&](int i) {
        return jt.is_leaf(i) && jt.node(i).factor->var == v;
      });
      if (it == scope.end()) {
        throw StructureError("a scope of " + g.name(v) + " holds no copy of its mechanism");
      }
      lambda_at[*it] = 1;
    }
  }

  std::vector<Factor<NodeId>> family(g.size());
  std::vector<Factor<NodeId>> indicators(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    family[v] = detail::symbolic_family(b, g, v);
    if (g.endogenous(v)) {
      indicators[v] = evidence_factor(b, v, g.card(v), static_cast<std::uint32_t>(v));
    }
  }

  std::vector<Factor<NodeId>> msg(n);
  for (int i = n - 1; i >= 0; --i) {
    const JointreeNode& nd = jt.node(i);
    std::vector<const Factor<NodeId>*> parts;
    const Factor<NodeId>* lambda = nullptr;
    if (nd.factor) {
      parts.push_back(&family[nd.factor->var]);
      if (lambda_at[i]) lambda = &indicators[nd.factor->var];
    }
    for (int c : nd.children) parts.push_back(&msg[c]);
    msg[i] = detail::project(parts, lambda, i == 0 ? VarSet{} : jt.sep(i), ops);
    for (int c : nd.children) msg[c] = Factor<NodeId>();
  }

  Circuit c = b.finish(msg[0][0]);
  std::vector<std::string> thinned;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (jt.replicas(v) > 1) thinned.push_back(g.name(v));
  }
  c.set_thinned_variables(thinned);
  return {c, jt, circuit_stats(c, jt.width())};
}

struct CompileOptions {
  OrderHeuristic heuristic = OrderHeuristic::kMinFill;
  std::vector<std::size_t> order;  // used with OrderHeuristic::kGiven
  int replica_cap = 8;
  bool thin = true;
};

// The plain jointree (one copy per factor, no thinning) and, when thinning is
// on, the thinned bundled jointree; the one with the smaller width, then the
// smaller total cluster size, is compiled. Ties keep the plain tree.
inline Jointree select_jointree(const CausalGraph& g, const CompileOptions& opts) {
  EliminationOrder order = elimination_order(g, opts.heuristic, opts.order);
  Jointree plain = build_jointree(g, order, std::vector<int>(g.size(), 1), Placement::kStandalone);
  if (!opts.thin) return plain;
  Jointree bundled = build_jointree(g, order, default_replicas(g, opts.replica_cap), Placement::kBundle);
  Jointree thinned = thin(bundled, g.endogenous_variables()).tree;
  if (thinned.width() < plain.width() ||
      (thinned.width() == plain.width() && thinned.cluster_mass(g) < plain.cluster_mass(g))) {
    return thinned;
  }
  return plain;
}

inline CompilationResult compile_graph(const CausalGraph& g, const CompileOptions& opts = {}) {
  return compile(g, select_jointree(g, opts));
}

}  // namespace causalac
