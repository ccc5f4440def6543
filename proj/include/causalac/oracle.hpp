#pragma once

// Brute-force semantics of SCMs by enumerating exogenous instantiations.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include "causalac/error.hpp"
#include "causalac/factor.hpp"
#include "causalac/model.hpp"

namespace causalac {

inline constexpr std::size_t kDefaultWorldCap = std::size_t{1} << 24;

// `state` is a full instantiation: exogenous values are the world, endogenous
// values are induced by the mechanisms.
struct World {
  std::size_t index = 0;
  double probability = 1.0;
  std::vector<int> state;
};

namespace detail {

inline std::size_t world_count(const Scm& scm, std::size_t cap) {
  const CausalGraph& g = scm.graph();
  std::size_t n = 1;
  for (std::size_t u : g.exogenous_variables()) {
    n *= static_cast<std::size_t>(g.card(u));
    if (n > cap) {
      throw Error("world enumeration exceeds the cap of " + std::to_string(cap) + " worlds");
    }
  }
  return n;
}

// Visits worlds row-major over exogenous variables in declaration order
// (last exogenous variable fastest).
template <class Fn>
void for_each_world(const Scm& scm, std::size_t cap, Fn&& fn) {
  const CausalGraph& g = scm.graph();
  const std::size_t n = world_count(scm, cap);
  const std::vector<std::size_t> exo = g.exogenous_variables();
  std::vector<int> state(g.size(), 0);
  for (std::size_t w = 0; w < n; ++w) {
    std::size_t rest = w;
    double pr = 1.0;
    for (std::size_t k = exo.size(); k-- > 0;) {
      const int card = g.card(exo[k]);
      state[exo[k]] = static_cast<int>(rest % card);
      rest /= card;
      pr *= scm.prior(exo[k])[state[exo[k]]];
    }
    scm.forward(state);
    fn(w, pr, state);
  }
}

inline bool extends(const std::vector<int>& state, const Assignment& a) {
  return std::all_of(a.begin(), a.end(), [&](const auto& kv) { return state[kv.first] == kv.second; });
}

// Each conjunct as (sub-model, outcome); worlds are shared across sub-models
// because they index exogenous instantiations only.
inline std::vector<std::pair<Scm, Assignment>> conjuncts(const Scm& scm, const Event& ev) {
  check_event(scm.graph(), ev);
  std::vector<std::pair<Scm, Assignment>> out;
  auto add = [&](const auto& part) {
    using T = std::decay_t<decltype(part)>;
    if constexpr (std::is_same_v<T, Observational>) {
      out.emplace_back(scm, part.values);
    } else {
      out.emplace_back(mutilate(scm, part.intervention), part.outcome);
    }
  };
  if (const auto* cf = std::get_if<Counterfactual>(&ev)) {
    for (const auto& part : cf->parts) std::visit(add, part);
  } else if (const auto* ob = std::get_if<Observational>(&ev)) {
    add(*ob);
  } else {
    add(std::get<Interventional>(ev));
  }
  return out;
}

}  // namespace detail

inline std::vector<World> enumerate_worlds(const Scm& scm, std::size_t cap = kDefaultWorldCap) {
  std::vector<World> out;
  detail::for_each_world(scm, cap, [&](std::size_t w, double pr, const std::vector<int>& s) {
    out.push_back({w, pr, s});
  });
  return out;
}

// Indices of the worlds in which every conjunct of the event holds.
inline std::vector<std::size_t> worlds_of_event(const Scm& scm, const Event& ev,
                                                std::size_t cap = kDefaultWorldCap) {
  auto parts = detail::conjuncts(scm, ev);
  std::vector<char> in(detail::world_count(scm, cap), 1);
  for (const auto& [model, outcome] : parts) {
    detail::for_each_world(model, cap, [&](std::size_t w, double, const std::vector<int>& s) {
      if (!detail::extends(s, outcome)) in[w] = 0;
    });
  }
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < in.size(); ++w) {
    if (in[w]) out.push_back(w);
  }
  return out;
}

inline double event_probability(const Scm& scm, const Event& ev,
                                std::size_t cap = kDefaultWorldCap) {
  auto parts = detail::conjuncts(scm, ev);
  const std::size_t n = detail::world_count(scm, cap);
  std::vector<char> in(n, 1);
  std::vector<double> pr(n, 0.0);
  for (const auto& [model, outcome] : parts) {
    detail::for_each_world(model, cap, [&](std::size_t w, double p, const std::vector<int>& s) {
      pr[w] = p;
      if (!detail::extends(s, outcome)) in[w] = 0;
    });
  }
  if (parts.empty()) return 1.0;
  double total = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    if (in[w]) total += pr[w];
  }
  return total;
}

// Exact Pr(over) as a numeric factor with variables in the given order.
inline Factor<double> joint_distribution(const Scm& scm, const std::vector<std::size_t>& over,
                                         std::size_t cap = kDefaultWorldCap) {
  const CausalGraph& g = scm.graph();
  std::vector<int> cards;
  std::size_t n = 1;
  for (std::size_t v : over) {
    if (v >= g.size() || g.exogenous(v)) throw Error("joint distribution over a non-endogenous variable");
    cards.push_back(g.card(v));
    n *= static_cast<std::size_t>(g.card(v));
  }
  std::vector<double> cells(n, 0.0);
  detail::for_each_world(scm, cap, [&](std::size_t, double p, const std::vector<int>& s) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < over.size(); ++k) idx = idx * cards[k] + s[over[k]];
    cells[idx] += p;
  });
  return Factor<double>(over, cards, std::move(cells));
}

namespace detail {

// Probability of a partial instantiation under a joint factor.
inline double marginal(const Factor<double>& joint, const Assignment& a) {
  for (const auto& [v, x] : a) {
    if (!joint.contains(v)) throw Error("joint does not cover a queried variable");
  }
  double total = 0.0;
  std::vector<int> digits(joint.vars().size(), 0);
  for (std::size_t k = 0; k < joint.size(); ++k) {
    bool match = true;
    for (std::size_t i = 0; i < digits.size() && match; ++i) {
      auto it = a.find(joint.vars()[i]);
      if (it != a.end() && it->second != digits[i]) match = false;
    }
    if (match) total += joint[k];
    advance(digits, joint.cards());
  }
  return total;
}

// Every instantiation of `vars`.
inline std::vector<Assignment> instantiations(const Factor<double>& joint,
                                              const std::vector<std::size_t>& vars) {
  std::vector<int> cards;
  for (std::size_t v : vars) {
    auto p = joint.position(v);
    if (!p) throw Error("joint does not cover a queried variable");
    cards.push_back(joint.cards()[*p]);
  }
  std::vector<Assignment> out;
  std::vector<int> digits(vars.size(), 0);
  do {
    Assignment a;
    for (std::size_t i = 0; i < vars.size(); ++i) a[vars[i]] = digits[i];
    out.push_back(std::move(a));
  } while (advance(digits, cards));
  return out;
}

// Union of two instantiations; nullopt when they disagree.
inline std::optional<Assignment> merge(Assignment a, const Assignment& b) {
  for (const auto& [v, x] : b) {
    auto it = a.find(v);
    if (it != a.end() && it->second != x) return std::nullopt;
    a[v] = x;
  }
  return a;
}

inline Factor<double> restrict_to(const Factor<double>& joint, std::vector<std::size_t> keep) {
  std::vector<std::size_t> drop;
  for (std::size_t v : joint.vars()) {
    if (std::find(keep.begin(), keep.end(), v) == keep.end()) drop.push_back(v);
  }
  return sum_out(joint, drop);
}

inline std::vector<std::size_t> keys(const Assignment& a) {
  std::vector<std::size_t> out;
  for (const auto& kv : a) out.push_back(kv.first);
  return out;
}

}  // namespace detail

// sum_z Pr(y | x, z) Pr(z).
inline double backdoor_estimate(const Factor<double>& joint, const Assignment& x,
                                const Assignment& y, const std::vector<std::size_t>& z) {
  std::vector<std::size_t> vars = detail::keys(x);
  for (std::size_t v : detail::keys(y)) vars.push_back(v);
  vars.insert(vars.end(), z.begin(), z.end());
  for (std::size_t v : z) {
    if (x.count(v) || y.count(v)) throw Error("adjustment set overlaps the treatment or outcome");
  }
  Factor<double> j = detail::restrict_to(joint, vars);
  double total = 0.0;
  for (const Assignment& zi : detail::instantiations(j, z)) {
    const double pz = detail::marginal(j, zi);
    if (pz == 0.0) continue;
    const double pxz = detail::marginal(j, *detail::merge(x, zi));
    if (pxz == 0.0) throw UndefinedEstimand("Pr(x, z) = 0 for a z with Pr(z) > 0");
    const auto xy = detail::merge(x, y);
    if (!xy) continue;
    total += detail::marginal(j, *detail::merge(*xy, zi)) / pxz * pz;
  }
  return total;
}

// sum_z Pr(z | x) sum_x' Pr(y | x', z) Pr(x'). Z may not meet X or Y.
inline double frontdoor_estimate(const Factor<double>& joint, const Assignment& x,
                                 const Assignment& y, const std::vector<std::size_t>& z) {
  for (std::size_t v : z) {
    if (y.count(v)) throw Error("front-door set must not contain an outcome variable");
    if (x.count(v)) throw Error("front-door set must not contain a treatment variable");
  }
  std::vector<std::size_t> xv = detail::keys(x);
  std::vector<std::size_t> vars = xv;
  for (std::size_t v : detail::keys(y)) {
    if (!x.count(v)) vars.push_back(v);
  }
  vars.insert(vars.end(), z.begin(), z.end());
  Factor<double> j = detail::restrict_to(joint, vars);
  const double px = detail::marginal(j, x);
  if (px == 0.0) throw UndefinedEstimand("Pr(x) = 0");
  double total = 0.0;
  for (const Assignment& zi : detail::instantiations(j, z)) {
    const double pz_x = detail::marginal(j, *detail::merge(x, zi)) / px;
    if (pz_x == 0.0) continue;
    double inner = 0.0;
    for (const Assignment& xp : detail::instantiations(j, xv)) {
      const double pxp = detail::marginal(j, xp);
      if (pxp == 0.0) continue;
      const Assignment xpz = *detail::merge(xp, zi);
      const double pxpz = detail::marginal(j, xpz);
      if (pxpz == 0.0) throw UndefinedEstimand("Pr(x', z) = 0 for an x' with Pr(x') > 0");
      const auto full = detail::merge(xpz, y);
      if (!full) continue;
      inner += detail::marginal(j, *full) / pxpz * pxp;
    }
    total += pz_x * inner;
  }
  return total;
}

}  // namespace causalac
