#pragma once

// Arithmetic circuits over parameter leaves (theta), indicator leaves
// (lambda) and constants, with n-ary add/multiply nodes.
//
// Node arrays are topologically ordered: children always precede parents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "causalac/error.hpp"

namespace causalac {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { kConst, kTheta, kLambda, kAdd, kMul };

struct CircuitNode {
  NodeKind kind = NodeKind::kConst;
  std::uint32_t var = 0;    // theta/lambda: index into Circuit::variables()
  std::uint32_t value = 0;  // theta/lambda: value index
  std::uint32_t pinst = 0;  // theta: parent instantiation index (0 for priors)
  double constant = 0.0;    // const
  std::vector<NodeId> children;

  bool leaf() const { return kind != NodeKind::kAdd && kind != NodeKind::kMul; }

  friend bool operator==(const CircuitNode&, const CircuitNode&) = default;
};

class Circuit {
 public:
  Circuit() = default;

  Circuit(std::vector<std::string> variables, std::vector<CircuitNode> nodes, NodeId root)
      : vars_(std::move(variables)), nodes_(std::move(nodes)), root_(root) {
    if (nodes_.empty()) throw StructureError("circuit has no nodes");
    if (root_ >= nodes_.size()) throw StructureError("circuit root out of range");
    for (NodeId i = 0; i < nodes_.size(); ++i) {
      const CircuitNode& n = nodes_[i];
      if (n.leaf()) {
        if (!n.children.empty()) throw StructureError("leaf node with children");
        if (n.kind != NodeKind::kConst && n.var >= vars_.size()) {
          throw StructureError("leaf references an undeclared variable");
        }
      } else {
        if (n.children.empty()) throw StructureError("operation node without children");
        for (NodeId c : n.children) {
          if (c >= i) throw StructureError("node " + std::to_string(i) +
                                           " references a later node");
        }
      }
    }
  }

  const std::vector<std::string>& variables() const { return vars_; }
  const std::vector<CircuitNode>& nodes() const { return nodes_; }
  const CircuitNode& node(NodeId i) const { return nodes_.at(i); }
  NodeId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_) n += node.children.size();
    return n;
  }

  // Variables whose separators were thinned when this circuit was compiled.
  // Such circuits are only guaranteed correct for parameterizations whose
  // tables for these variables are deterministic.
  const std::vector<std::string>& thinned_variables() const { return thinned_; }
  void set_thinned_variables(std::vector<std::string> names) { thinned_ = std::move(names); }

  // Structural equality (node array, variable names, root).
  friend bool operator==(const Circuit& a, const Circuit& b) {
    if (a.root_ != b.root_ || a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto& x = a.nodes_[i];
      const auto& y = b.nodes_[i];
      if (x.kind != y.kind || x.children != y.children) return false;
      switch (x.kind) {
        case NodeKind::kConst:
          if (x.constant != y.constant) return false;
          break;
        case NodeKind::kTheta:
          if (x.pinst != y.pinst) return false;
          [[fallthrough]];
        case NodeKind::kLambda:
          if (x.value != y.value || a.vars_[x.var] != b.vars_[y.var]) return false;
          break;
        default:
          break;
      }
    }
    return true;
  }

 private:
  std::vector<std::string> vars_;
  std::vector<CircuitNode> nodes_;
  NodeId root_ = 0;
  std::vector<std::string> thinned_;
};

// Hash-consing circuit builder. Identical (op, sorted children) nodes are
// shared and the constants 0 and 1 are folded away.
class CircuitBuilder {
 public:
  explicit CircuitBuilder(std::vector<std::string> variables) : vars_(std::move(variables)) {}

  const std::vector<std::string>& variables() const { return vars_; }
  std::size_t size() const { return nodes_.size(); }

  NodeId constant(double c) {
    CircuitNode n;
    n.kind = NodeKind::kConst;
    n.constant = c;
    return intern(std::move(n));
  }

  NodeId theta(std::uint32_t var, std::uint32_t value, std::uint32_t pinst) {
    CircuitNode n;
    n.kind = NodeKind::kTheta;
    n.var = var;
    n.value = value;
    n.pinst = pinst;
    return intern(std::move(n));
  }

  NodeId lambda(std::uint32_t var, std::uint32_t value) {
    CircuitNode n;
    n.kind = NodeKind::kLambda;
    n.var = var;
    n.value = value;
    return intern(std::move(n));
  }

  NodeId add(std::vector<NodeId> children) {
    double folded = 0.0;
    bool has_const = false;
    std::vector<NodeId> kept;
    kept.reserve(children.size());
    for (NodeId c : children) {
      const CircuitNode& n = nodes_[c];
      if (n.kind == NodeKind::kConst) {
        folded += n.constant;
        has_const = true;
      } else {
        kept.push_back(c);
      }
    }
    if (has_const && folded != 0.0) kept.push_back(constant(folded));
    if (kept.empty()) return constant(0.0);
    if (kept.size() == 1) return kept.front();
    return op(NodeKind::kAdd, std::move(kept));
  }

  NodeId mul(std::vector<NodeId> children) {
    double folded = 1.0;
    std::vector<NodeId> kept;
    kept.reserve(children.size());
    for (NodeId c : children) {
      const CircuitNode& n = nodes_[c];
      if (n.kind == NodeKind::kConst) {
        folded *= n.constant;
      } else {
        kept.push_back(c);
      }
    }
    if (folded == 0.0) return constant(0.0);
    if (folded != 1.0) kept.push_back(constant(folded));
    if (kept.empty()) return constant(1.0);
    if (kept.size() == 1) return kept.front();
    return op(NodeKind::kMul, std::move(kept));
  }

  NodeId mul(NodeId a, NodeId b) { return mul(std::vector<NodeId>{a, b}); }

  // Extracts the sub-circuit below `root`. Add/multiply children that have a
  // single parent of the same kind are spliced into that parent; unreachable
  // nodes are dropped and ids renumbered densely in topological order.
  Circuit finish(NodeId root) const {
    const std::size_t n = nodes_.size();
    std::vector<char> reach = reachable(nodes_, root);
    std::vector<std::uint32_t> parents(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i]) continue;
      for (NodeId c : nodes_[i].children) ++parents[c];
    }

    std::vector<CircuitNode> flat = nodes_;
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i] || flat[i].leaf()) continue;
      std::vector<NodeId> merged;
      for (NodeId c : flat[i].children) {
        if (flat[c].kind == flat[i].kind && parents[c] == 1) {
          merged.insert(merged.end(), flat[c].children.begin(), flat[c].children.end());
        } else {
          merged.push_back(c);
        }
      }
      flat[i].children = std::move(merged);
    }

    reach = reachable(flat, root);
    std::vector<NodeId> remap(n, 0);
    std::vector<CircuitNode> out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i]) continue;
      remap[i] = static_cast<NodeId>(out.size());
      CircuitNode node = flat[i];
      for (NodeId& c : node.children) c = remap[c];
      std::sort(node.children.begin(), node.children.end());
      out.push_back(std::move(node));
    }
    return Circuit(vars_, std::move(out), remap[root]);
  }

 private:
  struct Key {
    NodeKind kind;
    std::uint32_t var, value, pinst;
    double constant;
    std::vector<NodeId> children;
    bool operator==(const Key&) const = default;
  };

  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = static_cast<std::size_t>(k.kind);
      auto mix = [&h](std::size_t x) { h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
      mix(k.var);
      mix(k.value);
      mix(k.pinst);
      mix(std::hash<double>{}(k.constant));
      for (NodeId c : k.children) mix(c);
      return h;
    }
  };

  static std::vector<char> reachable(const std::vector<CircuitNode>& nodes, NodeId root) {
    std::vector<char> reach(nodes.size(), 0);
    reach[root] = 1;
    for (std::size_t i = root + 1; i-- > 0;) {
      if (!reach[i]) continue;
      for (NodeId c : nodes[i].children) reach[c] = 1;
    }
    return reach;
  }

  NodeId op(NodeKind kind, std::vector<NodeId> children) {
    std::sort(children.begin(), children.end());
    CircuitNode n;
    n.kind = kind;
    n.children = std::move(children);
    return intern(std::move(n));
  }

  NodeId intern(CircuitNode n) {
    Key key{n.kind, n.var, n.value, n.pinst, n.constant, n.children};
    auto [it, inserted] = index_.try_emplace(std::move(key), static_cast<NodeId>(nodes_.size()));
    if (inserted) nodes_.push_back(std::move(n));
    return it->second;
  }

  std::vector<std::string> vars_;
  std::vector<CircuitNode> nodes_;
  std::unordered_map<Key, NodeId, KeyHash> index_;
};

// Circuit document:
//   acir 1
//   node <id> const <decimal> | theta <var> <val> <pinst> | lambda <var> <val>
//        | add <id>... | mul <id>...
//   root <id>
inline std::string serialize(const Circuit& c) {
  std::ostringstream os;
  os.precision(17);
  os << "acir 1\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.node(static_cast<NodeId>(i));
    os << "node " << i << ' ';
    switch (n.kind) {
      case NodeKind::kConst:
        os << "const " << n.constant;
        break;
      case NodeKind::kTheta:
        os << "theta " << c.variables()[n.var] << ' ' << n.value << ' ' << n.pinst;
        break;
      case NodeKind::kLambda:
        os << "lambda " << c.variables()[n.var] << ' ' << n.value;
        break;
      case NodeKind::kAdd:
      case NodeKind::kMul:
        os << (n.kind == NodeKind::kAdd ? "add" : "mul");
        for (NodeId ch : n.children) os << ' ' << ch;
        break;
    }
    os << '\n';
  }
  os << "root " << c.root() << '\n';
  return os.str();
}

inline Circuit deserialize(std::string_view text) {
  std::vector<std::string> vars;
  std::unordered_map<std::string, std::uint32_t> var_index;
  std::vector<CircuitNode> nodes;
  std::optional<NodeId> root;

  auto intern_var = [&](const std::string& name) {
    auto [it, inserted] = var_index.try_emplace(name, static_cast<std::uint32_t>(vars.size()));
    if (inserted) vars.push_back(name);
    return it->second;
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (!header) {
      int version = 0;
      if (word != "acir" || !(ls >> version) || version != 1) {
        throw FormatError("expected header 'acir 1'", lineno);
      }
      header = true;
      continue;
    }
    if (root) throw FormatError("content after the root line", lineno);
    auto read_uint = [&](const char* what) -> std::uint64_t {
      std::string tok;
      if (!(ls >> tok)) throw FormatError(std::string("missing ") + what, lineno);
      if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
        throw FormatError(std::string("bad ") + what + " '" + tok + "'", lineno);
      }
      try {
        return std::stoull(tok);
      } catch (const std::exception&) {
        throw FormatError(std::string("bad ") + what + " '" + tok + "'", lineno);
      }
    };
    if (word == "root") {
      std::uint64_t r = read_uint("root id");
      if (r >= nodes.size()) throw FormatError("root references an undefined node", lineno);
      root = static_cast<NodeId>(r);
      continue;
    }
    if (word != "node") throw FormatError("unexpected '" + word + "'", lineno);
    std::uint64_t id = read_uint("node id");
    if (id != nodes.size()) throw FormatError("node ids must be contiguous from 0", lineno);
    std::string kind;
    if (!(ls >> kind)) throw FormatError("missing node kind", lineno);
    CircuitNode n;
    if (kind == "const") {
      n.kind = NodeKind::kConst;
      std::string tok;
      if (!(ls >> tok)) throw FormatError("missing constant", lineno);
      try {
        std::size_t used = 0;
        n.constant = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError("bad constant '" + tok + "'", lineno);
      }
    } else if (kind == "theta" || kind == "lambda") {
      std::string name;
      if (!(ls >> name)) throw FormatError("missing variable name", lineno);
      n.kind = kind == "theta" ? NodeKind::kTheta : NodeKind::kLambda;
      n.var = intern_var(name);
      n.value = static_cast<std::uint32_t>(read_uint("value index"));
      if (n.kind == NodeKind::kTheta) {
        n.pinst = static_cast<std::uint32_t>(read_uint("parent instantiation"));
      }
    } else if (kind == "add" || kind == "mul") {
      n.kind = kind == "add" ? NodeKind::kAdd : NodeKind::kMul;
      std::string tok;
      while (ls >> tok) {
        if (tok.find_first_not_of("0123456789") != std::string::npos) {
          throw FormatError("bad child id '" + tok + "'", lineno);
        }
        std::uint64_t c = std::stoull(tok);
        if (c >= id) throw FormatError("forward reference to node " + tok, lineno);
        n.children.push_back(static_cast<NodeId>(c));
      }
      if (n.children.empty()) throw FormatError("operation without children", lineno);
    } else {
      throw FormatError("unknown node kind '" + kind + "'", lineno);
    }
    std::string extra;
    if (n.kind != NodeKind::kAdd && n.kind != NodeKind::kMul && (ls >> extra)) {
      throw FormatError("trailing token '" + extra + "'", lineno);
    }
    nodes.push_back(std::move(n));
  }
  if (!header) throw FormatError("empty circuit document", lineno);
  if (!root) throw FormatError("missing root line", lineno);
  return Circuit(std::move(vars), std::move(nodes), *root);
}

}  // namespace causalac
