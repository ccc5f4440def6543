#pragma once

// Variable elimination orders over the moral graph of a causal graph.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "causalac/error.hpp"
#include "causalac/model.hpp"

namespace causalac {

enum class OrderHeuristic { kMinFill, kMinDegree, kGiven };

struct EliminationOrder {
  std::vector<std::size_t> order;
  int width = 0;  // largest number of neighbours of an eliminated variable
};

// Adjacency matrix of the moral graph: every family is a clique.
inline std::vector<std::vector<char>> moral_graph(const CausalGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<std::size_t> fam = g.family(v);
    for (std::size_t a : fam) {
      for (std::size_t b : fam) {
        if (a != b) adj[a][b] = 1;
      }
    }
  }
  return adj;
}

namespace detail {

class EliminationGraph {
 public:
  explicit EliminationGraph(std::vector<std::vector<char>> adj)
      : adj_(std::move(adj)), alive_(adj_.size(), 1) {}

  std::vector<std::size_t> neighbours(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < adj_.size(); ++u) {
      if (alive_[u] && adj_[v][u]) out.push_back(u);
    }
    return out;
  }

  std::size_t fill(std::size_t v) const {
    std::vector<std::size_t> nb = neighbours(v);
    std::size_t f = 0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        if (!adj_[nb[i]][nb[j]]) ++f;
      }
    }
    return f;
  }

  // Returns the number of neighbours at elimination time.
  std::size_t eliminate(std::size_t v) {
    std::vector<std::size_t> nb = neighbours(v);
    for (std::size_t a : nb) {
      for (std::size_t b : nb) {
        if (a != b) adj_[a][b] = 1;
      }
    }
    alive_[v] = 0;
    return nb.size();
  }

  bool alive(std::size_t v) const { return alive_[v] != 0; }

 private:
  std::vector<std::vector<char>> adj_;
  std::vector<char> alive_;
};

}  // namespace detail

inline int order_width(const CausalGraph& g, const std::vector<std::size_t>& order) {
  if (order.size() != g.size()) throw Error("elimination order must list every variable once");
  std::vector<char> seen(g.size(), 0);
  for (std::size_t v : order) {
    if (v >= g.size() || seen[v]) throw Error("elimination order must list every variable once");
    seen[v] = 1;
  }
  detail::EliminationGraph eg(moral_graph(g));
  std::size_t w = 0;
  for (std::size_t v : order) w = std::max(w, eg.eliminate(v));
  return static_cast<int>(w);
}

// Min-fill ties: fewest fill edges, then smallest clique, then name.
// Min-degree ties: smallest clique, then name.
inline EliminationOrder elimination_order(const CausalGraph& g, OrderHeuristic h,
                                          const std::vector<std::size_t>& given = {}) {
  EliminationOrder out;
  if (h == OrderHeuristic::kGiven) {
    out.order = given;
    out.width = order_width(g, given);
    return out;
  }
  detail::EliminationGraph eg(moral_graph(g));
  std::size_t width = 0;
  for (std::size_t step = 0; step < g.size(); ++step) {
    std::size_t best = g.size();
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    std::size_t best_deg = std::numeric_limits<std::size_t>::max();
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (!eg.alive(v)) continue;
      std::size_t deg = eg.neighbours(v).size();
      std::size_t fill = h == OrderHeuristic::kMinFill ? eg.fill(v) : 0;
      bool better = best == g.size() || fill < best_fill ||
                    (fill == best_fill && deg < best_deg) ||
                    (fill == best_fill && deg == best_deg && g.name(v) < g.name(best));
      if (better) {
        best = v;
        best_fill = fill;
        best_deg = deg;
      }
    }
    width = std::max(width, eg.eliminate(best));
    out.order.push_back(best);
  }
  out.width = static_cast<int>(width);
  return out;
}

inline std::vector<std::size_t> parse_order(const CausalGraph& g, const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string name = text.substr(start, end - start);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (!name.empty()) out.push_back(g.index_of(name));
    start = end + 1;
  }
  return out;
}

}  // namespace causalac
