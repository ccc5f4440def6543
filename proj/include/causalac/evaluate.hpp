#pragma once

// Numeric evaluation of compiled circuits: probabilities of evidence, causal
// effects by parameter overriding, and partial derivatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "causalac/circuit.hpp"
#include "causalac/error.hpp"
#include "causalac/model.hpp"

namespace causalac {

// Numeric values of every parameter leaf. Table of v is indexed by
// pinst * card(v) + value (priors have a single parent instantiation).
class Parameterization {
 public:
  Parameterization() = default;

  Parameterization(const CausalGraph& g, std::vector<std::vector<double>> tables)
      : graph_(std::make_shared<const CausalGraph>(g)), tables_(std::move(tables)) {
    std::vector<Diagnostic> d = check();
    if (!d.empty()) throw ModelError(to_string(d));
  }

  Parameterization(std::shared_ptr<const CausalGraph> g, std::vector<std::vector<double>> tables)
      : graph_(std::move(g)), tables_(std::move(tables)) {
    std::vector<Diagnostic> d = check();
    if (!d.empty()) throw ModelError(to_string(d));
  }

  static Parameterization from_scm(const Scm& scm) {
    const CausalGraph& g = scm.graph();
    std::vector<std::vector<double>> t(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g.exogenous(v)) {
        t[v] = scm.prior(v);
      } else {
        t[v].assign(g.parent_instantiations(v) * g.card(v), 0.0);
        const auto& mech = scm.mechanism(v);
        for (std::size_t p = 0; p < mech.size(); ++p) t[v][p * g.card(v) + mech[p]] = 1.0;
      }
    }
    return Parameterization(g, std::move(t));
  }

  const CausalGraph& graph() const { return *graph_; }
  std::shared_ptr<const CausalGraph> graph_ptr() const { return graph_; }
  const std::vector<std::vector<double>>& tables() const { return tables_; }
  const std::vector<double>& table(std::size_t v) const { return tables_.at(v); }

  double theta(std::size_t v, std::size_t pinst, int value) const {
    return tables_[v][pinst * graph_->card(v) + value];
  }

  // Every row is a 0/1 table with a single 1.
  bool deterministic(std::size_t v) const {
    return std::all_of(tables_[v].begin(), tables_[v].end(),
                       [](double x) { return x == 0.0 || x == 1.0; });
  }

  // Deterministic endogenous tables as an SCM.
  Scm to_scm() const {
    const CausalGraph& g = *graph_;
    std::vector<std::vector<double>> priors(g.size());
    std::vector<std::vector<int>> mechs(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g.exogenous(v)) {
        priors[v] = tables_[v];
        continue;
      }
      if (!deterministic(v)) throw ModelError(g.name(v) + ": table is not a mechanism");
      const int card = g.card(v);
      for (std::size_t p = 0; p < g.parent_instantiations(v); ++p) {
        auto row = tables_[v].begin() + p * card;
        mechs[v].push_back(static_cast<int>(std::max_element(row, row + card) - row));
      }
    }
    return Scm(g, std::move(priors), std::move(mechs));
  }

  std::vector<Diagnostic> check() const {
    std::vector<Diagnostic> out;
    const CausalGraph& g = *graph_;
    if (tables_.size() != g.size()) {
      out.push_back({"", "parameterization must hold one table per variable"});
      return out;
    }
    for (std::size_t v = 0; v < g.size(); ++v) {
      const std::size_t rows = g.exogenous(v) ? 1 : g.parent_instantiations(v);
      const int card = g.card(v);
      if (tables_[v].size() != rows * card) {
        out.push_back({g.name(v), "table has length " + std::to_string(tables_[v].size()) +
                                      ", expected " + std::to_string(rows * card)});
        continue;
      }
      for (std::size_t p = 0; p < rows; ++p) {
        double s = 0;
        for (int x = 0; x < card; ++x) {
          double t = tables_[v][p * card + x];
          if (!(t >= 0.0) || !std::isfinite(t)) {
            out.push_back({g.name(v), "negative or non-finite entry"});
          }
          s += t;
        }
        if (std::abs(s - 1.0) > 1e-9) {
          out.push_back({g.name(v), g.exogenous(v) ? "prior does not sum to 1"
                                                   : "row " + std::to_string(p) + " does not sum to 1"});
        }
      }
    }
    return out;
  }

 private:
  std::shared_ptr<const CausalGraph> graph_;
  std::vector<std::vector<double>> tables_;
};

struct EvalOptions {
  bool strict = false;     // reject tables that are not 0/1 for thinned variables
  bool log_space = false;  // propagate logarithms
};

// Partial derivatives of the circuit output with respect to each leaf,
// accumulated per parameter (table layout) and per indicator.
struct Gradient {
  double value = 0.0;
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<double>> lambda;
};

namespace detail {

struct Binding {
  std::vector<std::size_t> var;  // circuit variable -> graph variable
};

inline Binding bind(const Circuit& c, const Parameterization& p) {
  Binding b;
  for (const std::string& name : c.variables()) b.var.push_back(p.graph().index_of(name));
  return b;
}

inline void check_evidence(const CausalGraph& g, const Assignment& e) {
  for (const auto& [v, x] : e) {
    if (v >= g.size()) throw Error("evidence on an unknown variable");
    if (g.exogenous(v)) throw Error("evidence on exogenous variable " + g.name(v));
    if (x < 0 || x >= g.card(v)) {
      throw Error("value " + std::to_string(x) + " out of range for " + g.name(v));
    }
  }
}

inline void check_strict(const Circuit& c, const Parameterization& p, const Assignment& overridden) {
  for (const std::string& name : c.thinned_variables()) {
    std::size_t v = p.graph().index_of(name);
    if (overridden.count(v)) continue;
    if (!p.deterministic(v)) {
      throw Error("table of " + name + " must be a mechanism for this thinned circuit");
    }
  }
}

// Leaf values: parameters (overridden to 1 for variables in `override`) and
// indicators from the evidence.
inline std::vector<double> leaf_values(const Circuit& c, const Parameterization& p,
                                       const Binding& b, const Assignment& e,
                                       const Assignment& overridden) {
  const CausalGraph& g = p.graph();
  std::vector<double> val(c.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    switch (n.kind) {
      case NodeKind::kConst:
        val[i] = n.constant;
        break;
      case NodeKind::kTheta: {
        const std::size_t v = b.var[n.var];
        const std::size_t rows = g.exogenous(v) ? 1 : g.parent_instantiations(v);
        if (n.pinst >= rows || static_cast<int>(n.value) >= g.card(v)) {
          throw StructureError("parameter leaf out of range for " + g.name(v));
        }
        val[i] = overridden.count(v) ? 1.0 : p.theta(v, n.pinst, static_cast<int>(n.value));
        break;
      }
      case NodeKind::kLambda: {
        const std::size_t v = b.var[n.var];
        if (static_cast<int>(n.value) >= g.card(v)) {
          throw StructureError("indicator leaf out of range for " + g.name(v));
        }
        auto it = e.find(v);
        val[i] = (it == e.end() || it->second == static_cast<int>(n.value)) ? 1.0 : 0.0;
        break;
      }
      default:
        break;
    }
  }
  return val;
}

inline void forward(const Circuit& c, std::vector<double>& val) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    if (n.kind == NodeKind::kAdd) {
      double s = 0.0;
      for (NodeId ch : n.children) s += val[ch];
      val[i] = s;
    } else if (n.kind == NodeKind::kMul) {
      double s = 1.0;
      for (NodeId ch : n.children) s *= val[ch];
      val[i] = s;
    }
  }
}

inline double forward_log(const Circuit& c, const std::vector<double>& leaves) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> lv(c.size(), kNegInf);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    if (n.leaf()) {
      lv[i] = leaves[i] > 0.0 ? std::log(leaves[i]) : kNegInf;
    } else if (n.kind == NodeKind::kMul) {
      double s = 0.0;
      for (NodeId ch : n.children) s += lv[ch];
      lv[i] = std::isnan(s) ? kNegInf : s;
    } else {
      double m = kNegInf;
      for (NodeId ch : n.children) m = std::max(m, lv[ch]);
      if (m == kNegInf) continue;
      double s = 0.0;
      for (NodeId ch : n.children) s += std::exp(lv[ch] - m);
      lv[i] = m + std::log(s);
    }
  }
  return lv[c.root()];
}

inline double run(const Circuit& c, const Parameterization& p, const Assignment& e,
                  const Assignment& overridden, EvalOptions opts, bool want_log) {
  check_evidence(p.graph(), e);
  if (opts.strict) check_strict(c, p, overridden);
  Binding b = bind(c, p);
  std::vector<double> val = leaf_values(c, p, b, e, overridden);
  if (opts.log_space) {
    double l = forward_log(c, val);
    return want_log ? l : std::exp(l);
  }
  forward(c, val);
  return want_log ? std::log(val[c.root()]) : val[c.root()];
}

}  // namespace detail

// Pr(e): indicators of each variable set in e are 1 only at its value.
inline double evaluate(const Circuit& c, const Parameterization& p, const Assignment& e,
                       EvalOptions opts = {}) {
  return detail::run(c, p, e, {}, opts, false);
}

// ln Pr(e); -inf when Pr(e) = 0.
inline double log_evaluate(const Circuit& c, const Parameterization& p, const Assignment& e,
                           EvalOptions opts = {}) {
  return detail::run(c, p, e, {}, opts, true);
}

// Pr(y_x): parameters of the variables in x are overridden to 1 and the
// circuit is evaluated at x together with y. Conflicting values give 0.
inline double causal_effect(const Circuit& c, const Parameterization& p, const Assignment& x,
                            const Assignment& y, EvalOptions opts = {}) {
  Assignment e = y;
  for (const auto& [v, val] : x) {
    auto it = e.find(v);
    if (it != e.end() && it->second != val) {
      detail::check_evidence(p.graph(), x);
      detail::check_evidence(p.graph(), y);
      return 0.0;
    }
    e[v] = val;
  }
  return detail::run(c, p, e, x, opts, false);
}

// One upward and one downward pass. Products skip the differentiated child
// through prefix/suffix products, so zeros are handled exactly.
inline Gradient backprop(const Circuit& c, const Parameterization& p, const Assignment& e,
                         EvalOptions opts = {}) {
  const CausalGraph& g = p.graph();
  detail::check_evidence(g, e);
  if (opts.strict) detail::check_strict(c, p, {});
  detail::Binding b = detail::bind(c, p);
  std::vector<double> val = detail::leaf_values(c, p, b, e, {});
  detail::forward(c, val);

  std::vector<double> d(c.size(), 0.0);
  d[c.root()] = 1.0;
  std::vector<double> prefix;
  for (std::size_t i = c.root() + 1; i-- > 0;) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    if (d[i] == 0.0 || n.leaf()) continue;
    if (n.kind == NodeKind::kAdd) {
      for (NodeId ch : n.children) d[ch] += d[i];
      continue;
    }
    const std::size_t k = n.children.size();
    prefix.assign(k + 1, 1.0);
    for (std::size_t j = 0; j < k; ++j) prefix[j + 1] = prefix[j] * val[n.children[j]];
    double suffix = 1.0;
    for (std::size_t j = k; j-- > 0;) {
      d[n.children[j]] += d[i] * prefix[j] * suffix;
      suffix *= val[n.children[j]];
    }
  }

  Gradient out;
  out.value = val[c.root()];
  out.theta.resize(g.size());
  out.lambda.resize(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    out.theta[v].assign(p.table(v).size(), 0.0);
    out.lambda[v].assign(g.card(v), 0.0);
  }
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    if (n.kind == NodeKind::kTheta) {
      const std::size_t v = b.var[n.var];
      out.theta[v][n.pinst * g.card(v) + n.value] += d[i];
    } else if (n.kind == NodeKind::kLambda) {
      out.lambda[b.var[n.var]][n.value] += d[i];
    }
  }
  return out;
}

}  // namespace causalac
