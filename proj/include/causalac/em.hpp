#pragma once

// Weighted datasets, log-likelihood, and EM parameter fitting on circuits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "causalac/circuit.hpp"
#include "causalac/error.hpp"
#include "causalac/evaluate.hpp"
#include "causalac/model.hpp"

namespace causalac {

struct Record {
  Assignment values;  // unset variables are unobserved
  double weight = 1.0;
};

struct Dataset {
  std::vector<std::size_t> columns;
  std::vector<Record> records;
};

// CSV with a header of endogenous variable names and an optional `weight`
// column. Cells are value indices; `?` marks a missing value.
inline Dataset parse_csv(const CausalGraph& g, std::string_view text) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t") + 1);
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  Dataset data;
  int weight_col = -1;
  std::vector<std::size_t> col_var;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells = split(line);
    if (!header) {
      header = true;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k] == "weight") {
          if (weight_col >= 0) throw FormatError("duplicate weight column", lineno);
          weight_col = static_cast<int>(k);
          col_var.push_back(0);
          continue;
        }
        auto v = g.find(cells[k]);
        if (!v) throw FormatError("unknown variable '" + cells[k] + "'", lineno);
        if (g.exogenous(*v)) throw FormatError("column '" + cells[k] + "' is exogenous", lineno);
        if (std::find(data.columns.begin(), data.columns.end(), *v) != data.columns.end()) {
          throw FormatError("duplicate column '" + cells[k] + "'", lineno);
        }
        data.columns.push_back(*v);
        col_var.push_back(*v);
      }
      continue;
    }
    if (cells.size() != col_var.size()) {
      throw FormatError("expected " + std::to_string(col_var.size()) + " cells, got " +
                            std::to_string(cells.size()),
                        lineno);
    }
    Record r;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string& s = cells[k];
      if (static_cast<int>(k) == weight_col) {
        try {
          std::size_t used = 0;
          r.weight = std::stod(s, &used);
          if (used != s.size() || !(r.weight >= 0) || !std::isfinite(r.weight)) throw std::invalid_argument("");
        } catch (const std::exception&) {
          throw FormatError("bad weight '" + s + "'", lineno);
        }
        continue;
      }
      if (s == "?") continue;
      const std::size_t v = col_var[k];
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos ||
          s.size() > 9 || std::stoi(s) >= g.card(v)) {
        throw FormatError("bad value '" + s + "' for " + g.name(v), lineno);
      }
      r.values[v] = std::stoi(s);
    }
    data.records.push_back(std::move(r));
  }
  if (!header) throw FormatError("empty dataset");
  return data;
}

// Sum of weight * ln Pr(record); -inf if any weighted record has probability 0.
inline double log_likelihood(const Circuit& c, const Parameterization& p, const Dataset& data) {
  double ll = 0.0;
  for (const Record& r : data.records) {
    if (r.weight == 0.0) continue;
    double pr = evaluate(c, p, r.values);
    if (pr <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += r.weight * std::log(pr);
  }
  return ll;
}

struct EmOptions {
  int max_iters = 500;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic_projection = false;
};

struct EmResult {
  Parameterization params;
  std::vector<double> trace;  // log-likelihood before each update and at the end
  bool converged = false;
  std::vector<std::string> flags;  // rows left unchanged for a zero denominator
};

namespace detail {

// Per row: 1 at the largest entry (lowest index on ties), 0 elsewhere.
inline void project_rows(std::vector<double>& table, int card) {
  for (std::size_t p = 0; p * card < table.size(); ++p) {
    auto row = table.begin() + p * card;
    auto best = std::max_element(row, row + card);
    const auto k = best - row;
    for (int x = 0; x < card; ++x) row[x] = x == k ? 1.0 : 0.0;
  }
}

}  // namespace detail

// Expected counts N(x|p) = sum_r w_r theta_{x|p} dPr(r)/dtheta_{x|p} / Pr(r),
// then theta_{x|p} = N(x|p) / sum_x N(x|p). Stops after max_iters updates or
// when the log-likelihood improves by less than tol.
inline EmResult em_fit(const Circuit& c, const Parameterization& init, const Dataset& data,
                       const EmOptions& opts = {}) {
  const CausalGraph& g = init.graph();
  Parameterization params = init;
  if (opts.deterministic_projection) {
    auto t = params.tables();
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g.endogenous(v)) detail::project_rows(t[v], g.card(v));
    }
    params = Parameterization(init.graph_ptr(), std::move(t));
  }
  EmResult out;
  std::set<std::string> flags;
  for (int iter = 0;; ++iter) {
    std::vector<std::vector<double>> counts(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) counts[v].assign(params.table(v).size(), 0.0);
    double ll = 0.0;
    for (std::size_t r = 0; r < data.records.size(); ++r) {
      const Record& rec = data.records[r];
      if (rec.weight == 0.0) continue;
      Gradient grad = backprop(c, params, rec.values);
      if (!(grad.value > 0.0)) throw ZeroLikelihood(r);
      ll += rec.weight * std::log(grad.value);
      const double scale = rec.weight / grad.value;
      for (std::size_t v = 0; v < g.size(); ++v) {
        const auto& t = params.table(v);
        for (std::size_t k = 0; k < t.size(); ++k) counts[v][k] += scale * t[k] * grad.theta[v][k];
      }
    }
    out.trace.push_back(ll);
    if (iter > 0 && ll - out.trace[iter - 1] < opts.tol) {
      out.converged = true;
      break;
    }
    if (iter >= opts.max_iters) break;

    std::vector<std::vector<double>> next = params.tables();
    for (std::size_t v = 0; v < g.size(); ++v) {
      const int card = g.card(v);
      for (std::size_t p = 0; p * card < next[v].size(); ++p) {
        double denom = 0.0;
        for (int x = 0; x < card; ++x) denom += counts[v][p * card + x];
        if (denom <= 0.0) {
          flags.insert(g.name(v) + " row " + std::to_string(p));
          continue;
        }
        for (int x = 0; x < card; ++x) next[v][p * card + x] = counts[v][p * card + x] / denom;
      }
      if (opts.deterministic_projection && g.endogenous(v)) detail::project_rows(next[v], card);
    }
    params = Parameterization(params.graph_ptr(), std::move(next));
  }
  out.params = std::move(params);
  out.flags.assign(flags.begin(), flags.end());
  return out;
}

// Priors from a symmetric Dirichlet(1); endogenous rows uniform over 0/1
// tables when `deterministic`, otherwise Dirichlet(1) as well.
inline Parameterization random_parameterization(const CausalGraph& g, std::mt19937_64& rng,
                                                bool deterministic) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<std::vector<double>> t(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const int card = g.card(v);
    const std::size_t rows = g.exogenous(v) ? 1 : g.parent_instantiations(v);
    t[v].assign(rows * card, 0.0);
    for (std::size_t p = 0; p < rows; ++p) {
      if (g.endogenous(v) && deterministic) {
        std::uniform_int_distribution<int> pick(0, card - 1);
        t[v][p * card + pick(rng)] = 1.0;
        continue;
      }
      double s = 0;
      for (int x = 0; x < card; ++x) s += t[v][p * card + x] = expo(rng);
      for (int x = 0; x < card; ++x) t[v][p * card + x] /= s;
    }
  }
  return Parameterization(g, std::move(t));
}

// Runs em_fit from `restarts` random starting points drawn from opts.seed and
// keeps the run with the highest final log-likelihood (earliest on ties).
inline EmResult em_fit_restarts(const Circuit& c, const CausalGraph& g, const Dataset& data,
                                const EmOptions& opts, int restarts) {
  std::mt19937_64 rng(opts.seed);
  EmResult best;
  bool have = false;
  for (int k = 0; k < std::max(1, restarts); ++k) {
    Parameterization init = random_parameterization(g, rng, opts.deterministic_projection);
    EmResult r;
    try {
      r = em_fit(c, init, data, opts);
    } catch (const ZeroLikelihood&) {
      continue;
    }
    if (!have || r.trace.back() > best.trace.back()) {
      best = std::move(r);
      have = true;
    }
  }
  if (!have) throw Error("every EM restart hit a record with zero probability");
  return best;
}

}  // namespace causalac
