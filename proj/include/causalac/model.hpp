#pragma once

// Variables, causal graphs, structural causal models and events.
//
// Value-index convention: values of a variable with cardinality k are
// 0..k-1. For binary variables, index 1 is the positive literal x and index 0
// its negation.
//
// Mechanism tables and parameter tables are indexed by parent instantiation,
// row-major over the parents in declaration order with the LAST parent
// varying fastest.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "causalac/error.hpp"
#include "json.hpp"

namespace causalac {

enum class VarKind { kExogenous, kEndogenous };

struct Variable {
  std::string name;
  int card = 2;
  VarKind kind = VarKind::kEndogenous;

  bool exogenous() const { return kind == VarKind::kExogenous; }
  bool endogenous() const { return kind == VarKind::kEndogenous; }
};

// Sparse instantiation: variable index -> value index.
using Assignment = std::map<std::size_t, int>;

class CausalGraph {
 public:
  CausalGraph() = default;

  // Throws ModelError on duplicate names, bad cardinalities, unresolved or
  // duplicate parents, parents on exogenous variables, or cycles.
  CausalGraph(std::vector<Variable> variables,
              std::vector<std::vector<std::size_t>> parents)
      : vars_(std::move(variables)), parents_(std::move(parents)) {
    if (parents_.size() != vars_.size()) {
      throw ModelError("parent lists do not match the variable list");
    }
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const Variable& var = vars_[v];
      if (var.name.empty()) throw ModelError("variable with empty name");
      if (var.card < 2) {
        throw ModelError("variable '" + var.name + "' has cardinality " +
                         std::to_string(var.card) + " (must be >= 2)");
      }
      if (!index_.emplace(var.name, v).second) {
        throw ModelError("duplicate variable '" + var.name + "'");
      }
    }
    children_.assign(vars_.size(), {});
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      if (vars_[v].exogenous() && !parents_[v].empty()) {
        throw ModelError("exogenous variable '" + vars_[v].name +
                         "' cannot have parents");
      }
      std::set<std::size_t> seen;
      for (std::size_t p : parents_[v]) {
        if (p >= vars_.size()) {
          throw ModelError("variable '" + vars_[v].name +
                           "' has an unknown parent");
        }
        if (p == v) throw ModelError("cycle: '" + vars_[v].name + "' -> itself");
        if (!seen.insert(p).second) {
          throw ModelError("variable '" + vars_[v].name + "' lists parent '" +
                           vars_[p].name + "' twice");
        }
        children_[p].push_back(v);
      }
    }
    compute_topological_order();
  }

  std::size_t size() const { return vars_.size(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& variable(std::size_t v) const { return vars_.at(v); }
  const std::string& name(std::size_t v) const { return vars_.at(v).name; }
  int card(std::size_t v) const { return vars_.at(v).card; }
  bool exogenous(std::size_t v) const { return vars_.at(v).exogenous(); }
  bool endogenous(std::size_t v) const { return vars_.at(v).endogenous(); }
  const std::vector<std::size_t>& parents(std::size_t v) const {
    return parents_.at(v);
  }
  const std::vector<std::size_t>& children(std::size_t v) const {
    return children_.at(v);
  }
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view name) const {
    auto v = find(name);
    if (!v) throw ModelError("unknown variable '" + std::string(name) + "'");
    return *v;
  }

  std::vector<std::size_t> exogenous_variables() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < size(); ++v) {
      if (exogenous(v)) out.push_back(v);
    }
    return out;
  }

  std::vector<std::size_t> endogenous_variables() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < size(); ++v) {
      if (endogenous(v)) out.push_back(v);
    }
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& ps : parents_) n += ps.size();
    return n;
  }

  // Number of parent instantiations (1 for roots).
  std::size_t parent_instantiations(std::size_t v) const {
    std::size_t n = 1;
    for (std::size_t p : parents_.at(v)) n *= static_cast<std::size_t>(card(p));
    return n;
  }

  // Row-major index of the parents' values in a dense full instantiation.
  std::size_t parent_index(std::size_t v, const std::vector<int>& full) const {
    std::size_t idx = 0;
    for (std::size_t p : parents_.at(v)) {
      idx = idx * static_cast<std::size_t>(card(p)) +
            static_cast<std::size_t>(full[p]);
    }
    return idx;
  }

  // Variables of the family factor of v: parents in declaration order, then v.
  std::vector<std::size_t> family(std::size_t v) const {
    std::vector<std::size_t> f = parents_.at(v);
    f.push_back(v);
    return f;
  }

  // Markovian: every exogenous variable feeds at most one mechanism.
  bool markovian() const {
    for (std::size_t v = 0; v < size(); ++v) {
      if (exogenous(v) && children_[v].size() > 1) return false;
    }
    return true;
  }

 private:
  void compute_topological_order() {
    std::vector<std::size_t> indegree(size());
    for (std::size_t v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
    std::vector<std::size_t> ready;
    for (std::size_t v = size(); v-- > 0;) {
      if (indegree[v] == 0) ready.push_back(v);
    }
    topo_.clear();
    while (!ready.empty()) {
      std::size_t v = ready.back();
      ready.pop_back();
      topo_.push_back(v);
      // Keep declaration order among ready nodes for determinism.
      std::vector<std::size_t> released;
      for (std::size_t c : children_[v]) {
        if (--indegree[c] == 0) released.push_back(c);
      }
      std::sort(released.rbegin(), released.rend());
      for (std::size_t c : released) ready.push_back(c);
    }
    if (topo_.size() != size()) {
      for (std::size_t v = 0; v < size(); ++v) {
        if (indegree[v] > 0) {
          throw ModelError("cycle through variable '" + vars_[v].name + "'");
        }
      }
    }
  }

  std::vector<Variable> vars_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Diagnostic {
  std::string variable;
  std::string message;
};

inline std::string to_string(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "; ";
    out += d.variable + ": " + d.message;
  }
  return out;
}

namespace detail {

inline void check_tables(const CausalGraph& g,
                         const std::vector<std::optional<std::vector<double>>>& priors,
                         const std::vector<std::optional<std::vector<int>>>& mechs,
                         std::vector<Diagnostic>& out) {
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::string& name = g.name(v);
    if (v < priors.size() && priors[v]) {
      const auto& p = *priors[v];
      if (!g.exogenous(v)) {
        out.push_back({name, "prior given for an endogenous variable"});
      } else if (p.size() != static_cast<std::size_t>(g.card(v))) {
        out.push_back({name, "prior has " + std::to_string(p.size()) +
                                 " entries, expected " +
                                 std::to_string(g.card(v))});
      } else {
        double sum = 0.0;
        bool negative = false;
        for (double x : p) {
          if (!(x >= 0.0)) negative = true;
          sum += x;
        }
        if (negative) out.push_back({name, "prior has a negative entry"});
        if (std::abs(sum - 1.0) > 1e-9) {
          out.push_back({name, "prior does not sum to 1"});
        }
      }
    }
    if (v < mechs.size() && mechs[v]) {
      const auto& m = *mechs[v];
      if (!g.endogenous(v)) {
        out.push_back({name, "mechanism given for an exogenous variable"});
      } else if (m.size() != g.parent_instantiations(v)) {
        out.push_back({name, "mechanism table has " + std::to_string(m.size()) +
                                 " entries, expected " +
                                 std::to_string(g.parent_instantiations(v))});
      } else {
        for (int x : m) {
          if (x < 0 || x >= g.card(v)) {
            out.push_back({name, "mechanism entry " + std::to_string(x) +
                                     " out of range"});
            break;
          }
        }
      }
    }
  }
}

}  // namespace detail

// A fully specified structural causal model: graph, one prior per exogenous
// variable, one deterministic mechanism per endogenous variable.
class Scm {
 public:
  Scm() = default;

  // Throws ModelError listing every diagnostic if the tables are invalid.
  Scm(CausalGraph graph, std::vector<std::vector<double>> priors,
      std::vector<std::vector<int>> mechanisms)
      : graph_(std::move(graph)),
        priors_(std::move(priors)),
        mechanisms_(std::move(mechanisms)) {
    priors_.resize(graph_.size());
    mechanisms_.resize(graph_.size());
    std::vector<std::optional<std::vector<double>>> p(graph_.size());
    std::vector<std::optional<std::vector<int>>> m(graph_.size());
    std::vector<Diagnostic> diags;
    for (std::size_t v = 0; v < graph_.size(); ++v) {
      if (graph_.exogenous(v)) {
        p[v] = priors_[v];
        if (!mechanisms_[v].empty()) {
          diags.push_back({graph_.name(v), "mechanism given for an exogenous variable"});
        }
      } else {
        m[v] = mechanisms_[v];
        if (!priors_[v].empty()) {
          diags.push_back({graph_.name(v), "prior given for an endogenous variable"});
        }
      }
    }
    detail::check_tables(graph_, p, m, diags);
    if (!diags.empty()) throw ModelError(to_string(diags));
  }

  const CausalGraph& graph() const { return graph_; }
  const std::vector<double>& prior(std::size_t v) const { return priors_.at(v); }
  const std::vector<int>& mechanism(std::size_t v) const {
    return mechanisms_.at(v);
  }
  const std::vector<std::vector<double>>& priors() const { return priors_; }
  const std::vector<std::vector<int>>& mechanisms() const { return mechanisms_; }

  // Completes a dense instantiation whose exogenous entries are set by
  // evaluating mechanisms in topological order.
  void forward(std::vector<int>& full) const {
    for (std::size_t v : graph_.topological_order()) {
      if (graph_.endogenous(v)) {
        full[v] = mechanisms_[v][graph_.parent_index(v, full)];
      }
    }
  }

 private:
  CausalGraph graph_;
  std::vector<std::vector<double>> priors_;
  std::vector<std::vector<int>> mechanisms_;
};

// A parsed model document. Tables may be partially present; `complete()`
// tells whether it describes a full SCM.
struct ModelDocument {
  CausalGraph graph;
  std::vector<std::optional<std::vector<double>>> priors;
  std::vector<std::optional<std::vector<int>>> mechanisms;

  bool complete() const {
    for (std::size_t v = 0; v < graph.size(); ++v) {
      if (graph.exogenous(v) ? !priors[v] : !mechanisms[v]) return false;
    }
    return true;
  }

  // Endogenous variables whose mechanism is known.
  std::vector<std::size_t> known_mechanisms() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < graph.size(); ++v) {
      if (graph.endogenous(v) && mechanisms[v]) out.push_back(v);
    }
    return out;
  }

  Scm to_scm() const {
    if (!complete()) throw ModelError("model document is missing priors or mechanisms");
    std::vector<std::vector<double>> p(graph.size());
    std::vector<std::vector<int>> m(graph.size());
    for (std::size_t v = 0; v < graph.size(); ++v) {
      if (priors[v]) p[v] = *priors[v];
      if (mechanisms[v]) m[v] = *mechanisms[v];
    }
    return Scm(graph, std::move(p), std::move(m));
  }

  static ModelDocument from_graph(CausalGraph g) {
    ModelDocument doc;
    doc.priors.resize(g.size());
    doc.mechanisms.resize(g.size());
    doc.graph = std::move(g);
    return doc;
  }

  static ModelDocument from_scm(const Scm& scm) {
    ModelDocument doc = from_graph(scm.graph());
    for (std::size_t v = 0; v < scm.graph().size(); ++v) {
      if (scm.graph().exogenous(v)) {
        doc.priors[v] = scm.prior(v);
      } else {
        doc.mechanisms[v] = scm.mechanism(v);
      }
    }
    return doc;
  }
};

inline std::vector<Diagnostic> validate(const ModelDocument& doc) {
  std::vector<Diagnostic> out;
  detail::check_tables(doc.graph, doc.priors, doc.mechanisms, out);
  return out;
}

namespace detail {

inline int line_of_offset(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace detail

// Parses a model document:
//   {"variables":[{"name":..,"kind":"exogenous"|"endogenous","card":..,
//                  "parents":[..]?,"prior":[..]?,"mechanism":[..]?}, ...]}
// Structural problems throw ModelError (syntax errors carry a line number);
// table contents are checked by validate().
inline ModelDocument parse_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError("syntax error at line " +
                     std::to_string(detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                     ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("variables") || !doc["variables"].is_array()) {
    throw ModelError("model document must be an object with a 'variables' array");
  }
  const auto& entries = doc["variables"];

  std::vector<Variable> vars;
  std::vector<std::vector<std::string>> parent_names;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : entries) {
    if (!e.is_object()) throw ModelError("variable entry must be an object");
    if (!e.contains("name") || !e["name"].is_string()) {
      throw ModelError("variable entry without a string 'name'");
    }
    Variable var;
    var.name = e["name"].get<std::string>();
    if (!e.contains("kind") || !e["kind"].is_string()) {
      throw ModelError("variable '" + var.name + "' has no 'kind'");
    }
    const std::string kind = e["kind"].get<std::string>();
    if (kind == "exogenous") {
      var.kind = VarKind::kExogenous;
    } else if (kind == "endogenous") {
      var.kind = VarKind::kEndogenous;
    } else {
      throw ModelError("variable '" + var.name + "' has unknown kind '" + kind + "'");
    }
    if (!e.contains("card") || !e["card"].is_number_integer()) {
      throw ModelError("variable '" + var.name + "' has a non-integer cardinality");
    }
    var.card = e["card"].get<int>();
    if (!index.emplace(var.name, vars.size()).second) {
      throw ModelError("duplicate variable '" + var.name + "'");
    }
    std::vector<std::string> ps;
    if (e.contains("parents")) {
      if (var.exogenous()) {
        throw ModelError("exogenous variable '" + var.name + "' cannot have parents");
      }
      for (const auto& p : e["parents"]) {
        if (!p.is_string()) throw ModelError("parent of '" + var.name + "' is not a string");
        ps.push_back(p.get<std::string>());
      }
    }
    if (e.contains("prior") && var.endogenous()) {
      throw ModelError("endogenous variable '" + var.name + "' cannot have a prior");
    }
    if (e.contains("mechanism") && var.exogenous()) {
      throw ModelError("exogenous variable '" + var.name + "' cannot have a mechanism");
    }
    vars.push_back(var);
    parent_names.push_back(std::move(ps));
  }

  std::vector<std::vector<std::size_t>> parents(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    for (const auto& p : parent_names[v]) {
      auto it = index.find(p);
      if (it == index.end()) {
        throw ModelError("variable '" + vars[v].name + "' references unknown variable '" +
                         p + "'");
      }
      parents[v].push_back(it->second);
    }
  }

  ModelDocument out = ModelDocument::from_graph(CausalGraph(vars, parents));
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const auto& e = entries[v];
    try {
      if (e.contains("prior")) out.priors[v] = e["prior"].get<std::vector<double>>();
      if (e.contains("mechanism")) {
        out.mechanisms[v] = e["mechanism"].get<std::vector<int>>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ModelError("variable '" + vars[v].name + "' has a malformed table");
    }
  }
  return out;
}

inline std::string to_json(const ModelDocument& doc) {
  // Hand-formatted so each variable sits on one line and the output is stable.
  std::ostringstream os;
  os.precision(17);
  os << "{\"variables\":[\n";
  const CausalGraph& g = doc.graph;
  for (std::size_t v = 0; v < g.size(); ++v) {
    os << "  {\"name\":" << nlohmann::json(g.name(v)).dump() << ",\"kind\":\""
       << (g.exogenous(v) ? "exogenous" : "endogenous") << "\",\"card\":" << g.card(v);
    if (g.endogenous(v)) {
      os << ",\"parents\":[";
      for (std::size_t i = 0; i < g.parents(v).size(); ++i) {
        if (i) os << ",";
        os << nlohmann::json(g.name(g.parents(v)[i])).dump();
      }
      os << "]";
    }
    if (v < doc.priors.size() && doc.priors[v]) {
      os << ",\"prior\":[";
      for (std::size_t i = 0; i < doc.priors[v]->size(); ++i) {
        if (i) os << ",";
        os << (*doc.priors[v])[i];
      }
      os << "]";
    }
    if (v < doc.mechanisms.size() && doc.mechanisms[v]) {
      os << ",\"mechanism\":[";
      for (std::size_t i = 0; i < doc.mechanisms[v]->size(); ++i) {
        if (i) os << ",";
        os << (*doc.mechanisms[v])[i];
      }
      os << "]";
    }
    os << "}" << (v + 1 < g.size() ? "," : "") << "\n";
  }
  os << "]}\n";
  return os.str();
}

// "X=0,Y=1" -> assignment; names must resolve.
inline Assignment parse_assignment(const CausalGraph& g, std::string_view text) {
  Assignment out;
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ModelError("expected NAME=VALUE, got '" + item + "'");
    }
    std::size_t v = g.index_of(item.substr(0, eq));
    int value = 0;
    try {
      std::size_t used = 0;
      value = std::stoi(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ModelError("bad value in '" + item + "'");
    }
    if (value < 0 || value >= g.card(v)) {
      throw ModelError("value out of range in '" + item + "'");
    }
    if (!out.emplace(v, value).second) {
      throw ModelError("variable assigned twice in '" + std::string(text) + "'");
    }
  }
  return out;
}

// Events over endogenous variables.
struct Observational {
  Assignment values;
};

// outcome_{intervention}: outcome observed after do(intervention).
struct Interventional {
  Assignment outcome;
  Assignment intervention;
};

struct Counterfactual {
  std::vector<std::variant<Observational, Interventional>> parts;
};

using Event = std::variant<Observational, Interventional, Counterfactual>;

namespace detail {

inline void check_endogenous(const CausalGraph& g, const Assignment& a) {
  for (const auto& [v, x] : a) {
    if (v >= g.size()) throw ModelError("event references an unknown variable");
    if (!g.endogenous(v)) {
      throw ModelError("event names exogenous variable '" + g.name(v) + "'");
    }
    if (x < 0 || x >= g.card(v)) {
      throw ModelError("event value out of range for '" + g.name(v) + "'");
    }
  }
}

}  // namespace detail

inline void check_event(const CausalGraph& g, const Observational& e) {
  detail::check_endogenous(g, e.values);
}

inline void check_event(const CausalGraph& g, const Interventional& e) {
  detail::check_endogenous(g, e.outcome);
  detail::check_endogenous(g, e.intervention);
}

inline void check_event(const CausalGraph& g, const Counterfactual& e) {
  for (const auto& part : e.parts) {
    std::visit([&](const auto& p) { check_event(g, p); }, part);
  }
}

inline void check_event(const CausalGraph& g, const Event& ev) {
  std::visit([&](const auto& e) { check_event(g, e); }, ev);
}

// Sub-model M_z: each intervened variable loses its parents and gets the
// constant mechanism z.
inline Scm mutilate(const Scm& scm, const Assignment& z) {
  const CausalGraph& g = scm.graph();
  detail::check_endogenous(g, z);
  if (z.empty()) return scm;
  std::vector<std::vector<std::size_t>> parents(g.size());
  std::vector<std::vector<int>> mechs = scm.mechanisms();
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto it = z.find(v);
    if (it == z.end()) {
      parents[v] = g.parents(v);
    } else {
      mechs[v] = {it->second};
    }
  }
  return Scm(CausalGraph(g.variables(), std::move(parents)), scm.priors(),
             std::move(mechs));
}

}  // namespace causalac
