#pragma once

// Binary jointrees over (replicated) family factors, separator thinning, and
// jointree construction from elimination orders.
//
// Layout: the tree is rooted at a designated top leaf with one child; every
// internal node has two children. Node ids are preorder from the top leaf.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "causalac/elimination_order.hpp"
#include "causalac/error.hpp"
#include "causalac/model.hpp"

namespace causalac {

using VarSet = std::vector<std::size_t>;  // sorted ascending

// Leaf factor: the prior of an exogenous variable (copy 0) or copy `copy` of
// the mechanism of an endogenous variable.
struct FactorLabel {
  std::size_t var = 0;
  int copy = 0;
  friend auto operator<=>(const FactorLabel&, const FactorLabel&) = default;
};

struct JointreeNode {
  int parent = -1;
  std::vector<int> children;
  std::optional<FactorLabel> factor;  // present iff leaf
};

namespace detail {

inline VarSet set_union(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool contains(const VarSet& s, std::size_t v) {
  return std::binary_search(s.begin(), s.end(), v);
}

inline VarSet sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

class Jointree {
 public:
  Jointree() = default;

  // Validates the shape and the factor multiset against `g`, renumbers nodes
  // in preorder from `top` and computes unthinned separators and clusters.
  Jointree(const CausalGraph& g, const std::vector<JointreeNode>& nodes, int top) {
    for (std::size_t v = 0; v < g.size(); ++v) {
      names_.push_back(g.name(v));
      exogenous_.push_back(g.exogenous(v) ? 1 : 0);
      families_.push_back(detail::sorted(g.family(v)));
    }
    if (nodes.empty()) {
      if (g.size() != 0) throw StructureError("jointree has no nodes but the graph has factors");
      return;
    }
    renumber(nodes, top);
    check_factors();
    compute_unthinned();
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<JointreeNode>& nodes() const { return nodes_; }
  const JointreeNode& node(int i) const { return nodes_.at(i); }
  int top() const { return nodes_.empty() ? -1 : 0; }
  bool is_leaf(int i) const { return nodes_.at(i).factor.has_value(); }
  std::size_t variable_count() const { return names_.size(); }
  const std::string& name(std::size_t v) const { return names_.at(v); }
  bool exogenous(std::size_t v) const { return exogenous_.at(v) != 0; }
  int replicas(std::size_t v) const { return replicas_.at(v); }

  // Variables of the factor at leaf i.
  const VarSet& factor_vars(int i) const { return families_.at(nodes_.at(i).factor->var); }

  // Separator of the edge between i and its parent (empty for the top leaf).
  const VarSet& sep(int i) const { return sep_.at(i); }
  const VarSet& cls(int i) const { return cls_.at(i); }

  // Number of nodes in the subtree of i; the subtree is ids [i, i + n).
  int subtree_size(int i) const { return subtree_.at(i); }

  // Variables removed from separators by thinning.
  const VarSet& functional() const { return functional_; }
  bool thinned() const { return !functional_.empty(); }

  int width() const {
    std::size_t w = 0;
    for (const auto& c : cls_) w = std::max(w, c.size());
    return nodes_.empty() ? 0 : static_cast<int>(w) - 1;
  }

  // Sum over nodes of the number of cluster instantiations.
  double cluster_mass(const CausalGraph& g) const {
    double total = 0;
    for (const auto& c : cls_) {
      double m = 1;
      for (std::size_t v : c) m *= g.card(v);
      total += m;
    }
    return total;
  }

  std::string label(int i) const {
    const auto& f = nodes_.at(i).factor;
    if (!f) return "-";
    std::string s = "f_" + names_[f->var];
    if (!exogenous_[f->var]) s += "#" + std::to_string(f->copy);
    return s;
  }

  std::string dump() const {
    std::ostringstream os;
    auto set = [&](const VarSet& s) {
      std::string out = "{";
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ",";
        out += names_[s[k]];
      }
      return out + "}";
    };
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      os << "node " << i << " parent=";
      if (nodes_[i].parent < 0) {
        os << '-';
      } else {
        os << nodes_[i].parent;
      }
      os << " sep=" << set(sep_[i]) << " cls=" << set(cls_[i]) << " leaf=" << label(int(i)) << '\n';
    }
    return os.str();
  }

  // Same topology with the given separators; each must be a subset of the
  // current separator. Clusters are recomputed.
  Jointree with_separators(std::vector<VarSet> seps, VarSet functional) const {
    if (seps.size() != nodes_.size()) throw StructureError("separator count mismatch");
    for (std::size_t i = 0; i < seps.size(); ++i) {
      seps[i] = detail::sorted(std::move(seps[i]));
      if (!std::includes(sep_[i].begin(), sep_[i].end(), seps[i].begin(), seps[i].end())) {
        throw StructureError("thinned separator is not a subset of the original");
      }
    }
    Jointree out = *this;
    out.sep_ = std::move(seps);
    out.functional_ = detail::set_union(functional_, detail::sorted(std::move(functional)));
    out.compute_clusters();
    return out;
  }

 private:
  void renumber(const std::vector<JointreeNode>& in, int top) {
    const int n = static_cast<int>(in.size());
    if (top < 0 || top >= n) throw StructureError("top node out of range");
    if (in[top].parent != -1) throw StructureError("top node must not have a parent");
    if (!in[top].factor) throw StructureError("top node must be a leaf");
    for (int i = 0; i < n; ++i) {
      const JointreeNode& nd = in[i];
      if (nd.factor) {
        std::size_t expected = i == top ? (n == 1 ? 0 : 1) : 0;
        if (nd.children.size() != expected) {
          throw StructureError(i == top ? "top leaf must have exactly one child"
                                        : "leaf nodes must not have children");
        }
      } else if (nd.children.size() != 2) {
        throw StructureError("internal nodes must have exactly two children");
      }
      for (int c : nd.children) {
        if (c < 0 || c >= n || in[c].parent != i) {
          throw StructureError("inconsistent parent/child links");
        }
      }
      if (i != top && (nd.parent < 0 || nd.parent >= n)) {
        throw StructureError("non-top node without a parent");
      }
    }
    std::vector<int> old_to_new(n, -1);
    std::vector<int> order;
    std::vector<int> stack{top};
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      if (old_to_new[i] >= 0) throw StructureError("jointree contains a cycle");
      old_to_new[i] = static_cast<int>(order.size());
      order.push_back(i);
      const auto& ch = in[i].children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    if (static_cast<int>(order.size()) != n) throw StructureError("jointree is not connected");
    nodes_.resize(n);
    for (int k = 0; k < n; ++k) {
      const JointreeNode& src = in[order[k]];
      JointreeNode& dst = nodes_[k];
      dst.parent = src.parent < 0 ? -1 : old_to_new[src.parent];
      dst.factor = src.factor;
      dst.children.clear();
      for (int c : src.children) dst.children.push_back(old_to_new[c]);
    }
    subtree_.assign(n, 1);
    for (int i = n - 1; i > 0; --i) subtree_[nodes_[i].parent] += subtree_[i];
  }

  void check_factors() {
    const std::size_t m = names_.size();
    std::vector<std::vector<int>> copies(m);
    for (const auto& nd : nodes_) {
      if (!nd.factor) continue;
      if (nd.factor->var >= m) throw StructureError("leaf references an unknown variable");
      copies[nd.factor->var].push_back(nd.factor->copy);
    }
    replicas_.assign(m, 0);
    for (std::size_t v = 0; v < m; ++v) {
      std::vector<int>& c = copies[v];
      std::sort(c.begin(), c.end());
      if (c.empty()) throw StructureError("no leaf holds the factor of " + names_[v]);
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] != static_cast<int>(k)) {
          throw StructureError("copies of the factor of " + names_[v] + " must be numbered 0..r-1");
        }
      }
      if (exogenous_[v] && c.size() != 1) {
        throw StructureError("prior of " + names_[v] + " may not be replicated");
      }
      replicas_[v] = static_cast<int>(c.size());
    }
  }

  void compute_unthinned() {
    const std::size_t n = nodes_.size();
    const std::size_t m = names_.size();
    std::vector<int> total(m, 0);
    std::vector<std::vector<int>> below(n, std::vector<int>(m, 0));
    for (std::size_t i = n; i-- > 0;) {
      if (nodes_[i].factor) {
        for (std::size_t v : families_[nodes_[i].factor->var]) {
          ++below[i][v];
          ++total[v];
        }
      }
      for (int c : nodes_[i].children) {
        for (std::size_t v = 0; v < m; ++v) below[i][v] += below[c][v];
      }
    }
    sep_.assign(n, {});
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t v = 0; v < m; ++v) {
        if (below[i][v] > 0 && below[i][v] < total[v]) sep_[i].push_back(v);
      }
    }
    compute_clusters();
  }

  void compute_clusters() {
    cls_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].factor) {
        cls_[i] = families_[nodes_[i].factor->var];
      } else {
        for (int c : nodes_[i].children) cls_[i] = detail::set_union(cls_[i], sep_[c]);
      }
    }
  }

  std::vector<std::string> names_;
  std::vector<char> exogenous_;
  std::vector<VarSet> families_;
  std::vector<JointreeNode> nodes_;
  std::vector<int> subtree_;
  std::vector<int> replicas_;
  std::vector<VarSet> sep_;
  std::vector<VarSet> cls_;
  VarSet functional_;
};

// Connected components of the nodes whose cluster contains v, linked by
// edges whose separator contains v. Components are listed by smallest id.
inline std::vector<std::vector<int>> scopes(const Jointree& jt, std::size_t v) {
  const int n = static_cast<int>(jt.size());
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    if (!detail::contains(jt.cls(i), v)) continue;
    int p = jt.node(i).parent;
    if (p >= 0 && detail::contains(jt.sep(i), v)) {
      comp[i] = comp[p];
    } else {
      comp[i] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[comp[i]].push_back(i);
  }
  return out;
}

struct ThinningRemoval {
  int node;         // edge between `node` and its parent
  std::size_t var;
  int witness_below;  // leaf holding a copy of f_var inside the subtree of node
  int witness_above;  // leaf holding a copy of f_var outside it
};

struct ThinningCertificate {
  std::vector<ThinningRemoval> removals;
};

struct ThinResult {
  Jointree tree;
  ThinningCertificate certificate;
};

namespace detail {

// Minimal-cost scope layout for one functional variable x. Every scope of x
// (component of nodes mentioning x linked by edges keeping x) must contain a
// leaf holding a copy of f_x. Cost is (internal nodes covered, edges kept),
// compared lexicographically. Returns, per node, whether x stays in sep(i).
class ScopeLayout {
 public:
  enum State { kNone = 0, kUpOk = 1, kUpNeed = 2 };

  ScopeLayout(const Jointree& jt, std::size_t x) : jt_(jt), x_(x) {}

  std::vector<char> solve() {
    const int n = static_cast<int>(jt_.size());
    cost_.assign(n, {kInf, kInf, kInf});
    choice_.assign(n, {std::pair{-1, -1}, std::pair{-1, -1}, std::pair{-1, -1}});
    for (int i = n - 1; i >= 1; --i) {
      if (jt_.is_leaf(i)) {
        leaf(i);
      } else {
        internal(i);
      }
    }
    std::vector<char> keep(n, 0);
    if (n <= 1) return keep;
    const int c = jt_.node(0).children.front();
    const bool top_mentions = mentions(0);
    const bool top_replica = replica(0);
    Cost best = kInf;
    int best_state = -1;
    for (int s = 0; s < 3; ++s) {
      bool ok = (s == kNone && (!top_mentions || top_replica)) ||
                (s == kUpOk && top_mentions) || (s == kUpNeed && top_replica);
      if (ok && cost_[c][s] < best) {
        best = cost_[c][s];
        best_state = s;
      }
    }
    if (best_state < 0) throw StructureError("no sound scope layout for " + jt_.name(x_));
    assign(c, best_state, keep);
    return keep;
  }

 private:
  using Cost = std::pair<long, long>;
  static constexpr Cost kInf{std::numeric_limits<long>::max() / 4, 0};

  bool mentions(int i) const { return jt_.is_leaf(i) && contains(jt_.factor_vars(i), x_); }
  bool replica(int i) const { return jt_.is_leaf(i) && jt_.node(i).factor->var == x_; }

  void leaf(int i) {
    if (!mentions(i)) {
      cost_[i][kNone] = {0, 0};
    } else if (replica(i)) {
      cost_[i][kNone] = {0, 0};
      cost_[i][kUpOk] = {0, 1};
    } else {
      cost_[i][kUpNeed] = {0, 1};
    }
  }

  void internal(int i) {
    const int a = jt_.node(i).children[0];
    const int b = jt_.node(i).children[1];
    for (int sa = 0; sa < 3; ++sa) {
      if (cost_[a][sa] == kInf) continue;
      for (int sb = 0; sb < 3; ++sb) {
        if (cost_[b][sb] == kInf) continue;
        Cost base{cost_[a][sa].first + cost_[b][sb].first,
                  cost_[a][sa].second + cost_[b][sb].second};
        if (sa == kNone && sb == kNone) {
          offer(i, kNone, base, sa, sb);
          continue;
        }
        const bool has = sa == kUpOk || sb == kUpOk;
        if (has) offer(i, kNone, {base.first + 1, base.second}, sa, sb);
        offer(i, has ? kUpOk : kUpNeed, {base.first + 1, base.second + 1}, sa, sb);
      }
    }
  }

  void offer(int i, int s, Cost c, int sa, int sb) {
    if (c < cost_[i][s]) {
      cost_[i][s] = c;
      choice_[i][s] = {sa, sb};
    }
  }

  void assign(int root, int state, std::vector<char>& keep) const {
    std::vector<std::pair<int, int>> stack{{root, state}};
    while (!stack.empty()) {
      auto [i, s] = stack.back();
      stack.pop_back();
      keep[i] = s != kNone ? 1 : 0;
      if (jt_.is_leaf(i)) continue;
      auto [sa, sb] = choice_[i][s];
      stack.push_back({jt_.node(i).children[0], sa});
      stack.push_back({jt_.node(i).children[1], sb});
    }
  }

  const Jointree& jt_;
  std::size_t x_;
  std::vector<std::array<Cost, 3>> cost_;
  std::vector<std::array<std::pair<int, int>, 3>> choice_;
};

}  // namespace detail

// Removes each functional variable from as many separators as its mechanism
// copies allow: afterwards every scope of a functional variable contains a
// copy of its mechanism, which keeps the compiled circuit exact for 0/1
// mechanism tables. Exogenous variables may not be listed.
inline ThinResult thin(const Jointree& jt, const std::vector<std::size_t>& functional) {
  VarSet fx = detail::sorted(functional);
  for (std::size_t x : fx) {
    if (x >= jt.variable_count()) throw StructureError("thin: unknown variable");
    if (jt.exogenous(x)) throw StructureError("thin: " + jt.name(x) + " is exogenous");
  }
  const int n = static_cast<int>(jt.size());
  std::vector<VarSet> seps(n);
  for (int i = 0; i < n; ++i) seps[i] = jt.sep(i);
  ThinningCertificate cert;
  for (std::size_t x : fx) {
    std::vector<char> keep = detail::ScopeLayout(jt, x).solve();
    std::vector<int> copies;
    for (int i = 0; i < n; ++i) {
      if (jt.is_leaf(i) && jt.node(i).factor->var == x) copies.push_back(i);
    }
    for (int i = 1; i < n; ++i) {
      const bool had = detail::contains(jt.sep(i), x);
      if (keep[i] && !had) throw StructureError("thin: scope layout widened a separator");
      if (!had || keep[i]) continue;
      auto it = std::find(seps[i].begin(), seps[i].end(), x);
      seps[i].erase(it);
      const int lo = i;
      const int hi = i + jt.subtree_size(i);
      int below = -1, above = -1;
      for (int leaf : copies) {
        if (leaf >= lo && leaf < hi) {
          if (below < 0) below = leaf;
        } else if (above < 0) {
          above = leaf;
        }
      }
      cert.removals.push_back({i, x, below, above});
    }
  }
  return {jt.with_separators(std::move(seps), fx), std::move(cert)};
}

// Replica count per variable: 1 for priors and for mechanisms of variables
// with at most one child, otherwise min(#children, cap).
inline std::vector<int> default_replicas(const CausalGraph& g, int cap = 8) {
  std::vector<int> r(g.size(), 1);
  for (std::size_t v = 0; v < g.size(); ++v) {
    const int k = static_cast<int>(g.children(v).size());
    if (g.endogenous(v) && k > 1) r[v] = std::max(1, std::min(k, cap));
  }
  return r;
}

enum class Placement {
  kStandalone,  // every factor copy is its own unit
  kBundle,      // copies are grouped with the mechanisms of their children
};

namespace detail {

// Rooted binary tree used during construction (a dtree).
class DtreeBuilder {
 public:
  int leaf(FactorLabel f) {
    nodes_.push_back({-1, -1, f, created_++});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int join(int a, int b) {
    nodes_.push_back({a, b, std::nullopt, -1});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int balanced(std::vector<int> trees) {
    while (trees.size() > 1) {
      std::vector<int> next;
      for (std::size_t k = 0; k + 1 < trees.size(); k += 2) next.push_back(join(trees[k], trees[k + 1]));
      if (trees.size() % 2) next.push_back(trees.back());
      trees = std::move(next);
    }
    return trees.front();
  }

  // Re-roots the dtree under `root` at its shallowest leaf (latest created
  // on ties), splicing out the dtree root.
  Jointree finish(const CausalGraph& g, int root) const {
    if (nodes_[root].factor) {
      JointreeNode only;
      only.factor = nodes_[root].factor;
      return Jointree(g, {only}, 0);
    }
    const int n = static_cast<int>(nodes_.size());
    std::vector<std::vector<int>> adj(n);
    std::vector<int> depth(n, -1);
    std::vector<int> stack{root};
    depth[root] = 0;
    int top = -1;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      const Node& nd = nodes_[i];
      if (nd.factor) {
        if (top < 0 || depth[i] < depth[top] ||
            (depth[i] == depth[top] && nd.created > nodes_[top].created)) {
          top = i;
        }
        continue;
      }
      for (int c : {nd.left, nd.right}) {
        depth[c] = depth[i] + 1;
        stack.push_back(c);
        if (i != root) {
          adj[i].push_back(c);
          adj[c].push_back(i);
        }
      }
    }
    adj[nodes_[root].left].push_back(nodes_[root].right);
    adj[nodes_[root].right].push_back(nodes_[root].left);

    std::vector<int> id(n, -1);
    std::vector<JointreeNode> out;
    std::vector<std::pair<int, int>> work{{top, -1}};
    while (!work.empty()) {
      auto [i, parent] = work.back();
      work.pop_back();
      id[i] = static_cast<int>(out.size());
      JointreeNode jn;
      jn.parent = parent < 0 ? -1 : id[parent];
      jn.factor = nodes_[i].factor;
      out.push_back(jn);
      if (parent >= 0) out[id[parent]].children.push_back(id[i]);
      for (auto it = adj[i].rbegin(); it != adj[i].rend(); ++it) {
        if (*it != parent) work.push_back({*it, i});
      }
    }
    return Jointree(g, out, 0);
  }

 private:
  struct Node {
    int left, right;
    std::optional<FactorLabel> factor;
    int created;
  };
  std::vector<Node> nodes_;
  int created_ = 0;
};

}  // namespace detail

// Builds a binary jointree whose leaves are the priors and replicas[v] copies
// of each mechanism. Units (single leaves, or bundles under kBundle) are
// merged in elimination order: eliminating v joins every unit that still
// exposes v with balanced binary joins.
//
// Under kBundle the children of v are split into min(#children, replicas[v])
// contiguous groups; copy k of f_v is hosted by the copy-0 mechanism of the
// first child of group k. A host is joined with its plain hosted copies and
// then with hosted copies that are hosts themselves. A bundle hides v when it
// holds a copy of f_v together with every child of that copy's group.
inline Jointree build_jointree(const CausalGraph& g, const EliminationOrder& order,
                               const std::vector<int>& replicas, Placement placement) {
  const std::size_t m = g.size();
  if (replicas.size() != m) throw StructureError("replica counts must cover every variable");
  for (std::size_t v = 0; v < m; ++v) {
    if (g.exogenous(v) && replicas[v] != 1) {
      throw StructureError("prior of " + g.name(v) + " may not be replicated");
    }
    if (replicas[v] < 1) throw StructureError("replica count of " + g.name(v) + " must be >= 1");
  }
  if (m == 0) return Jointree(g, {}, -1);

  detail::DtreeBuilder dt;
  // leaf_of[v][k]: dtree leaf of copy k of the factor of v.
  std::vector<std::vector<int>> leaf_of(m);
  for (std::size_t v = 0; v < m; ++v) {
    if (g.exogenous(v)) leaf_of[v].push_back(dt.leaf({v, 0}));
  }
  for (std::size_t v = 0; v < m; ++v) {
    if (g.endogenous(v)) {
      for (int k = 0; k < replicas[v]; ++k) leaf_of[v].push_back(dt.leaf({v, k}));
    }
  }

  struct Unit {
    int tree;
    VarSet visible;
  };
  std::vector<Unit> units;

  if (placement == Placement::kStandalone) {
    for (std::size_t v = 0; v < m; ++v) {
      for (int leaf : leaf_of[v]) units.push_back({leaf, detail::sorted(g.family(v))});
    }
  } else {
    // groups[v][k]: children of v in group k.
    std::vector<std::vector<std::vector<std::size_t>>> groups(m);
    // hosted[c]: copies (v, k) hosted by the copy-0 mechanism of c.
    std::vector<std::vector<FactorLabel>> hosted(m);
    std::vector<std::vector<char>> is_hosted(m);
    for (std::size_t v = 0; v < m; ++v) {
      is_hosted[v].assign(leaf_of[v].size(), 0);
      if (g.exogenous(v)) continue;
      std::vector<std::size_t> ch = g.children(v);
      std::sort(ch.begin(), ch.end());
      const std::size_t k_groups = std::min<std::size_t>(ch.size(), replicas[v]);
      for (std::size_t k = 0; k < k_groups; ++k) {
        std::vector<std::size_t> grp(ch.begin() + k * ch.size() / k_groups,
                                     ch.begin() + (k + 1) * ch.size() / k_groups);
        hosted[grp.front()].push_back({v, static_cast<int>(k)});
        is_hosted[v][k] = 1;
        groups[v].push_back(std::move(grp));
      }
    }

    // Builds the bundle anchored at the copy-0 mechanism of c; records the
    // leaves it contains.
    std::vector<FactorLabel> members;
    auto build = [&](auto&& self, std::size_t c) -> int {
      int tree = leaf_of[c][0];
      members.push_back({c, 0});
      std::vector<FactorLabel> plain, nested;
      for (const FactorLabel& f : hosted[c]) {
        (f.copy == 0 && !hosted[f.var].empty() ? nested : plain).push_back(f);
      }
      for (const FactorLabel& f : plain) {
        tree = dt.join(tree, leaf_of[f.var][f.copy]);
        members.push_back(f);
      }
      for (const FactorLabel& f : nested) tree = dt.join(tree, self(self, f.var));
      return tree;
    };

    for (std::size_t v = 0; v < m; ++v) {
      for (std::size_t k = 0; k < leaf_of[v].size(); ++k) {
        if (is_hosted[v][k]) continue;
        if (g.exogenous(v) || k > 0 || hosted[v].empty()) {
          units.push_back({leaf_of[v][k], detail::sorted(g.family(v))});
          continue;
        }
        members.clear();
        int tree = build(build, v);
        std::vector<std::size_t> vars;
        std::vector<char> inside(m, 0);
        for (const FactorLabel& f : members) {
          if (f.copy == 0 && g.endogenous(f.var)) inside[f.var] = 1;
          for (std::size_t u : g.family(f.var)) vars.push_back(u);
        }
        VarSet visible;
        for (std::size_t u : detail::sorted(vars)) {
          bool hidden = false;
          for (const FactorLabel& f : members) {
            if (f.var != u || g.exogenous(u) || f.copy >= static_cast<int>(groups[u].size())) continue;
            const auto& grp = groups[u][f.copy];
            if (std::all_of(grp.begin(), grp.end(), [&](std::size_t c) { return inside[c] != 0; })) {
              hidden = true;
            }
          }
          if (!hidden) visible.push_back(u);
        }
        units.push_back({tree, std::move(visible)});
      }
    }
  }

  std::vector<char> alive(units.size(), 1);
  for (std::size_t v : order.order) {
    std::vector<int> trees;
    std::vector<std::size_t> idx;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (alive[u] && detail::contains(units[u].visible, v)) {
        trees.push_back(units[u].tree);
        idx.push_back(u);
      }
    }
    if (idx.empty()) continue;
    VarSet vis;
    for (std::size_t u : idx) {
      vis = detail::set_union(vis, units[u].visible);
      alive[u] = 0;
    }
    vis.erase(std::find(vis.begin(), vis.end(), v));
    alive[idx.front()] = 1;
    units[idx.front()] = {dt.balanced(trees), std::move(vis)};
  }
  std::vector<int> rest;
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (alive[u]) rest.push_back(units[u].tree);
  }
  return dt.finish(g, dt.balanced(rest));
}

// Cascade of fragments T(i,j) = ((f_Zij, f_Xi copy), f_Yj copy) for the grid
// family (variables U_X, U_Y, X_i, Y_j, Z_i_j): the first spine node joins
// f_U_Y with T(1,1), each next spine node adds one fragment, and f_U_X is
// the top leaf. X_i and Y_j get n copies each.
inline Jointree grid_cascade_jointree(const CausalGraph& g, int n) {
  if (n < 1) throw StructureError("grid size must be positive");
  std::vector<JointreeNode> nodes;
  auto add = [&](std::optional<FactorLabel> f) {
    JointreeNode jn;
    jn.factor = f;
    nodes.push_back(jn);
    return static_cast<int>(nodes.size()) - 1;
  };
  auto join = [&](int a, int b) {
    int p = add(std::nullopt);
    nodes[p].children = {a, b};
    nodes[a].parent = p;
    nodes[b].parent = p;
    return p;
  };
  auto var = [&](const std::string& name) { return g.index_of(name); };
  const int top = add(FactorLabel{var("U_X"), 0});
  int spine = add(FactorLabel{var("U_Y"), 0});
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const std::string si = std::to_string(i), sj = std::to_string(j);
      int z = add(FactorLabel{var("Z_" + si + "_" + sj), 0});
      int x = add(FactorLabel{var("X_" + si), j - 1});
      int y = add(FactorLabel{var("Y_" + sj), i - 1});
      int frag = join(join(z, x), y);
      spine = join(spine, frag);
    }
  }
  nodes[top].children = {spine};
  nodes[spine].parent = top;
  return Jointree(g, nodes, top);
}

}  // namespace causalac
