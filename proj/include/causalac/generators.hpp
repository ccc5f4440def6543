#pragma once

// Model families and seeded random SCMs.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "causalac/error.hpp"
#include "causalac/model.hpp"

namespace causalac {

enum class Family { kHypertension, kChain, kCollider, kSemiMarkov, kGrid, kGridPlus, kRandom };
enum class Fill { kNone, kRandom, kPaper };

struct GenSpec {
  Family family = Family::kHypertension;
  Fill fill = Fill::kNone;
  int n = 3;             // grid size
  int vars = 5;          // endogenous variables of the random family
  int max_parents = 2;   // random family
  int exo_card = 2;      // cardinality of U_X and U_Y in the grid families
  std::uint64_t seed = 0;
};

namespace detail {

struct GraphSketch {
  std::vector<Variable> vars;
  std::vector<std::vector<std::size_t>> parents;

  std::size_t add(std::string name, int card, VarKind kind, std::vector<std::size_t> ps = {}) {
    vars.push_back({std::move(name), card, kind});
    parents.push_back(std::move(ps));
    return vars.size() - 1;
  }
  CausalGraph build() const { return CausalGraph(vars, parents); }
};

inline std::vector<double> dirichlet(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(k);
  double s = 0;
  for (double& x : p) s += x = expo(rng);
  for (double& x : p) x /= s;
  return p;
}

}  // namespace detail

// Exogenous U_r, U_x, U_y, U_z and endogenous X (treatment), Y (outcome),
// Z (hypertension).
inline CausalGraph hypertension_graph() {
  detail::GraphSketch s;
  auto ur = s.add("U_r", 2, VarKind::kExogenous);
  auto ux = s.add("U_x", 2, VarKind::kExogenous);
  auto uy = s.add("U_y", 2, VarKind::kExogenous);
  auto uz = s.add("U_z", 2, VarKind::kExogenous);
  auto z = s.vars.size() + 2;
  auto x = s.add("X", 2, VarKind::kEndogenous, {z, ux});
  s.add("Y", 2, VarKind::kEndogenous, {x, uy, ur});
  s.add("Z", 2, VarKind::kEndogenous, {uz, ur});
  return s.build();
}

// X = z u_x + !z !u_x, Y = x u_r + !x u_y u_r + !x !u_y !u_r, Z = u_z u_r.
inline Scm hypertension_scm() {
  CausalGraph g = hypertension_graph();
  std::vector<std::vector<double>> priors(g.size());
  std::vector<std::vector<int>> mechs(g.size());
  priors[g.index_of("U_r")] = {0.75, 0.25};
  priors[g.index_of("U_x")] = {0.1, 0.9};
  priors[g.index_of("U_y")] = {0.3, 0.7};
  priors[g.index_of("U_z")] = {0.05, 0.95};
  mechs[g.index_of("X")] = {1, 0, 0, 1};
  mechs[g.index_of("Y")] = {1, 0, 0, 1, 0, 1, 0, 1};
  mechs[g.index_of("Z")] = {0, 0, 0, 1};
  return Scm(g, std::move(priors), std::move(mechs));
}

inline CausalGraph chain_graph() {
  detail::GraphSketch s;
  auto u = s.add("U", 2, VarKind::kExogenous);
  s.add("V", 2, VarKind::kEndogenous, {u});
  return s.build();
}

// X <- U -> Y.
inline CausalGraph collider_graph() {
  detail::GraphSketch s;
  auto u = s.add("U", 2, VarKind::kExogenous);
  s.add("X", 2, VarKind::kEndogenous, {u});
  s.add("Y", 2, VarKind::kEndogenous, {u});
  return s.build();
}

// U confounds Z and X; Z -> X -> Y; private noise U_z, U_x, U_y.
inline CausalGraph semi_markov_graph() {
  detail::GraphSketch s;
  auto u = s.add("U", 2, VarKind::kExogenous);
  auto ux = s.add("U_x", 2, VarKind::kExogenous);
  auto uy = s.add("U_y", 2, VarKind::kExogenous);
  auto uz = s.add("U_z", 2, VarKind::kExogenous);
  auto z = s.add("Z", 2, VarKind::kEndogenous, {uz, u});
  auto x = s.add("X", 2, VarKind::kEndogenous, {z, u, ux});
  s.add("Y", 2, VarKind::kEndogenous, {x, uy});
  return s.build();
}

// U_X -> X_i, U_Y -> Y_j, X_i -> Z_i_j <- Y_j for i, j in 1..n. With `chain`,
// also Z_i_j -> Z_i_(j+1) and Z_i_n -> Z_(i+1)_1.
inline CausalGraph grid_graph(int n, bool chain, int exo_card = 2) {
  if (n < 1) throw ModelError("grid size must be positive");
  if (exo_card < 2) throw ModelError("exogenous cardinality must be at least 2");
  detail::GraphSketch s;
  auto ux = s.add("U_X", exo_card, VarKind::kExogenous);
  auto uy = s.add("U_Y", exo_card, VarKind::kExogenous);
  std::vector<std::size_t> xs, ys;
  for (int i = 1; i <= n; ++i) xs.push_back(s.add("X_" + std::to_string(i), 2, VarKind::kEndogenous, {ux}));
  for (int j = 1; j <= n; ++j) ys.push_back(s.add("Y_" + std::to_string(j), 2, VarKind::kEndogenous, {uy}));
  std::size_t prev = 0;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      std::vector<std::size_t> ps{xs[i - 1], ys[j - 1]};
      if (chain && (i > 1 || j > 1)) ps.push_back(prev);
      prev = s.add("Z_" + std::to_string(i) + "_" + std::to_string(j), 2, VarKind::kEndogenous, ps);
    }
  }
  return s.build();
}

// Priors from Dirichlet(1), mechanisms uniform over deterministic tables.
inline Scm random_fill(const CausalGraph& g, std::mt19937_64& rng) {
  std::vector<std::vector<double>> priors(g.size());
  std::vector<std::vector<int>> mechs(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.exogenous(v)) {
      priors[v] = detail::dirichlet(rng, g.card(v));
    } else {
      std::uniform_int_distribution<int> pick(0, g.card(v) - 1);
      for (std::size_t p = 0; p < g.parent_instantiations(v); ++p) mechs[v].push_back(pick(rng));
    }
  }
  return Scm(g, std::move(priors), std::move(mechs));
}

struct RandomScmOptions {
  int min_endogenous = 1;
  int max_endogenous = 6;
  int min_exogenous = 1;
  int max_exogenous = 4;
  int max_card = 3;
  int max_parents = 3;
};

// Exogenous U1.. then endogenous V1.. in topological order; each endogenous
// variable draws up to max_parents parents among all earlier variables.
inline CausalGraph random_graph(std::mt19937_64& rng, const RandomScmOptions& o) {
  std::uniform_int_distribution<int> n_endo(o.min_endogenous, o.max_endogenous);
  std::uniform_int_distribution<int> n_exo(o.min_exogenous, o.max_exogenous);
  std::uniform_int_distribution<int> card(2, std::max(2, o.max_card));
  const int ne = n_endo(rng);
  const int nu = n_exo(rng);
  detail::GraphSketch s;
  for (int k = 1; k <= nu; ++k) s.add("U" + std::to_string(k), card(rng), VarKind::kExogenous);
  for (int k = 1; k <= ne; ++k) {
    std::vector<std::size_t> pool(s.vars.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<int> np(0, std::min<int>(o.max_parents, static_cast<int>(pool.size())));
    pool.resize(np(rng));
    std::sort(pool.begin(), pool.end());
    s.add("V" + std::to_string(k), card(rng), VarKind::kEndogenous, pool);
  }
  return s.build();
}

inline Scm random_scm(std::mt19937_64& rng, const RandomScmOptions& o = {}) {
  return random_fill(random_graph(rng, o), rng);
}

// Markovian SCM: endogenous V1..Vn, each with a private exogenous U_Vk of
// cardinality card(Vk) + 1 and up to max_parents endogenous parents. For
// every parent row the map from U_Vk to Vk is onto, so every conditional
// Pr(v | parents) is positive.
inline Scm random_markovian_scm(std::mt19937_64& rng, int n_endo, int max_parents, int max_card = 2) {
  std::uniform_int_distribution<int> card(2, std::max(2, max_card));
  std::vector<int> cards(n_endo);
  for (int& c : cards) c = card(rng);
  detail::GraphSketch s;
  for (int k = 0; k < n_endo; ++k) {
    s.add("U_V" + std::to_string(k + 1), cards[k] + 1, VarKind::kExogenous);
  }
  std::vector<std::size_t> endo;
  for (int k = 0; k < n_endo; ++k) {
    std::vector<std::size_t> pool = endo;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<int> np(0, std::min<int>(max_parents, static_cast<int>(pool.size())));
    pool.resize(np(rng));
    std::sort(pool.begin(), pool.end());
    pool.push_back(static_cast<std::size_t>(k));
    endo.push_back(s.add("V" + std::to_string(k + 1), cards[k], VarKind::kEndogenous, pool));
  }
  CausalGraph g = s.build();
  std::vector<std::vector<double>> priors(g.size());
  std::vector<std::vector<int>> mechs(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.exogenous(v)) {
      priors[v] = detail::dirichlet(rng, g.card(v));
      continue;
    }
    // The private exogenous parent is last, so it varies fastest in a row.
    const int cu = g.card(g.parents(v).back());
    const int cv = g.card(v);
    for (std::size_t row = 0; row < g.parent_instantiations(v) / cu; ++row) {
      std::vector<int> out(cu);
      for (int u = 0; u < cu; ++u) out[u] = u < cv ? u : std::uniform_int_distribution<int>(0, cv - 1)(rng);
      std::shuffle(out.begin(), out.end(), rng);
      mechs[v].insert(mechs[v].end(), out.begin(), out.end());
    }
  }
  return Scm(g, std::move(priors), std::move(mechs));
}

// Grid family with exo_card = 2^n where X_i and Y_j read bit i-1 / j-1 of
// U_X / U_Y and the Z mechanisms are random deterministic tables.
inline Scm grid_bits_scm(int n, bool chain, std::mt19937_64& rng) {
  CausalGraph g = grid_graph(n, chain, 1 << n);
  std::vector<std::vector<double>> priors(g.size());
  std::vector<std::vector<int>> mechs(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::string& name = g.name(v);
    if (g.exogenous(v)) {
      priors[v] = detail::dirichlet(rng, g.card(v));
    } else if (name[0] == 'X' || name[0] == 'Y') {
      const int bit = std::stoi(name.substr(2)) - 1;
      for (int u = 0; u < (1 << n); ++u) mechs[v].push_back((u >> bit) & 1);
    } else {
      std::uniform_int_distribution<int> pick(0, 1);
      for (std::size_t p = 0; p < g.parent_instantiations(v); ++p) mechs[v].push_back(pick(rng));
    }
  }
  return Scm(g, std::move(priors), std::move(mechs));
}

inline ModelDocument generate(const GenSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  if (spec.fill == Fill::kPaper && spec.family != Family::kHypertension) {
    throw ModelError("--fill paper is defined only for the hypertension family");
  }
  CausalGraph g;
  switch (spec.family) {
    case Family::kHypertension:
      if (spec.fill == Fill::kPaper) return ModelDocument::from_scm(hypertension_scm());
      g = hypertension_graph();
      break;
    case Family::kChain: g = chain_graph(); break;
    case Family::kCollider: g = collider_graph(); break;
    case Family::kSemiMarkov: g = semi_markov_graph(); break;
    case Family::kGrid: g = grid_graph(spec.n, false, spec.exo_card); break;
    case Family::kGridPlus: g = grid_graph(spec.n, true, spec.exo_card); break;
    case Family::kRandom: {
      if (spec.vars < 1) throw ModelError("--vars must be positive");
      if (spec.max_parents < 0) throw ModelError("--max-parents must be non-negative");
      RandomScmOptions o;
      o.min_endogenous = o.max_endogenous = spec.vars;
      o.max_parents = spec.max_parents;
      g = random_graph(rng, o);
      break;
    }
  }
  if (spec.fill == Fill::kRandom) return ModelDocument::from_scm(random_fill(g, rng));
  return ModelDocument::from_graph(g);
}

}  // namespace causalac
