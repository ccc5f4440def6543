#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

namespace causalac {
namespace {

using testing::random_params;

// A -> B, A -> C, B -> C with no exogenous variables.
CausalGraph observed_graph() {
  std::vector<Variable> vars{{"A", 2, VarKind::kEndogenous}, {"B", 3, VarKind::kEndogenous},
                             {"C", 2, VarKind::kEndogenous}};
  return CausalGraph(vars, {{}, {0}, {0, 1}});
}

TEST(ParseCsv, WeightsAndMissingValues) {
  CausalGraph g = observed_graph();
  Dataset d = parse_csv(g, "A,weight,C\n1,2.5,?\n0,1,1\n\n");
  ASSERT_EQ(d.records.size(), 2u);
  EXPECT_EQ(d.columns, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(d.records[0].weight, 2.5);
  EXPECT_EQ(d.records[0].values, (Assignment{{0, 1}}));
  EXPECT_EQ(d.records[1].values, (Assignment{{0, 0}, {2, 1}}));
}

TEST(ParseCsv, ErrorsCarryLineNumbers) {
  CausalGraph g = observed_graph();
  auto line_of = [&](const std::string& text) {
    try {
      parse_csv(g, text);
    } catch (const FormatError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("A,Q\n"), 1);
  EXPECT_EQ(line_of("A,B\n0,1\n0,3\n"), 3);
  EXPECT_EQ(line_of("A,B\n0\n"), 2);
  EXPECT_EQ(line_of("A,weight\n0,-1\n"), 2);
  EXPECT_EQ(line_of("A,A\n"), 1);
  EXPECT_EQ(line_of("A,B\n0,x\n"), 2);
  EXPECT_THROW(parse_csv(hypertension_graph(), "U_r\n0\n"), FormatError);
}

TEST(Em, OneStepOnCompleteDataGivesRelativeFrequencies) {
  CausalGraph g = observed_graph();
  Circuit c = compile_graph(g).circuit;
  std::mt19937_64 rng(51);
  std::vector<std::vector<double>> counts{std::vector<double>(2, 0.0), std::vector<double>(6, 0.0),
                                          std::vector<double>(12, 0.0)};
  Dataset data;
  data.columns = {0, 1, 2};
  for (int r = 0; r < 200; ++r) {
    const int a = static_cast<int>(rng() % 2), b = static_cast<int>(rng() % 3), cc = static_cast<int>(rng() % 2);
    const double w = 0.5 + static_cast<double>(rng() % 4);
    data.records.push_back({{{0, a}, {1, b}, {2, cc}}, w});
    counts[0][a] += w;
    counts[1][a * 3 + b] += w;
    counts[2][(a * 3 + b) * 2 + cc] += w;
  }
  EmOptions opts;
  opts.max_iters = 1;
  EmResult r = em_fit(c, random_params(g, 7, false), data, opts);
  for (std::size_t v = 0; v < 3; ++v) {
    const int card = g.card(v);
    for (std::size_t p = 0; p * card < counts[v].size(); ++p) {
      double n = 0;
      for (int x = 0; x < card; ++x) n += counts[v][p * card + x];
      for (int x = 0; x < card; ++x) {
        EXPECT_NEAR(r.params.table(v)[p * card + x], counts[v][p * card + x] / n, 1e-12);
      }
    }
  }
  EXPECT_TRUE(r.flags.empty());
}

TEST(Em, ZeroDenominatorLeavesRowAndFlags) {
  CausalGraph g = observed_graph();
  Circuit c = compile_graph(g).circuit;
  Dataset data{{0, 1, 2}, {Record{{{0, 0}, {1, 0}, {2, 1}}, 1.0}}};
  Parameterization init = random_params(g, 8, false);
  EmOptions opts;
  opts.max_iters = 1;
  EmResult r = em_fit(c, init, data, opts);
  // Row A=1 of B never appears.
  for (int x = 0; x < 3; ++x) EXPECT_EQ(r.params.table(1)[3 + x], init.table(1)[3 + x]);
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "B row 1"), r.flags.end());
}

TEST(Em, ZeroProbabilityRecordIsReported) {
  Scm scm = hypertension_scm();
  const CausalGraph& g = scm.graph();
  Circuit c = compile_graph(g).circuit;
  Parameterization p = Parameterization::from_scm(scm);
  Assignment impossible;
  for (const Assignment& e : testing::instantiations(g, g.endogenous_variables())) {
    if (evaluate(c, p, e) == 0.0) impossible = e;
  }
  ASSERT_FALSE(impossible.empty());
  Dataset data{{}, {Record{parse_assignment(g, "X=1"), 1.0}, Record{impossible, 1.0}}};
  try {
    em_fit(c, p, data);
    FAIL();
  } catch (const ZeroLikelihood& e) {
    EXPECT_EQ(e.record(), 1u);
  }
}

TEST(Em, TraceIsNonDecreasing) {
  std::mt19937_64 rng(52);
  for (int run = 0; run < 100; ++run) {
    Scm truth = random_scm(rng, {1, 4, 1, 3, 3, 3});
    const CausalGraph& g = truth.graph();
    Circuit c = compile_graph(g, {OrderHeuristic::kMinFill, {}, 8, false}).circuit;
    Parameterization tp = Parameterization::from_scm(truth);
    auto endo = g.endogenous_variables();
    Dataset data;
    data.columns = endo;
    for (int k = 0; k < 20; ++k) {
      // Draw a world and hide some values.
      std::vector<int> state(g.size(), 0);
      for (std::size_t u : g.exogenous_variables()) {
        std::discrete_distribution<int> d(truth.prior(u).begin(), truth.prior(u).end());
        state[u] = d(rng);
      }
      truth.forward(state);
      Record r;
      for (std::size_t v : endo) {
        if (rng() % 3) r.values[v] = state[v];
      }
      r.weight = 1.0;
      data.records.push_back(r);
    }
    EmOptions opts;
    opts.max_iters = 60;
    opts.tol = 0;
    EmResult r = em_fit(c, random_params(g, rng(), false), data, opts);
    for (std::size_t k = 1; k < r.trace.size(); ++k) {
      EXPECT_GE(r.trace[k], r.trace[k - 1] - 1e-9) << "run " << run << " step " << k;
    }
    EXPECT_NEAR(r.trace.back(), log_likelihood(c, r.params, data), 1e-9);
  }
}

TEST(Em, ProjectionKeepsMechanisms) {
  Scm scm = hypertension_scm();
  const CausalGraph& g = scm.graph();
  CompileOptions thinned;
  Circuit c = compile_graph(g, thinned).circuit;
  Factor<double> joint = joint_distribution(scm, g.endogenous_variables());
  Dataset data;
  auto rows = testing::instantiations(g, g.endogenous_variables());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (joint[k] > 0) data.records.push_back({rows[k], joint[k]});
  }
  // True mechanisms, uniform priors.
  auto t = Parameterization::from_scm(scm).tables();
  for (std::size_t u : g.exogenous_variables()) t[u].assign(2, 0.5);
  Parameterization init(g, t);
  EmOptions opts;
  opts.deterministic_projection = true;
  opts.max_iters = 50;
  EmResult r = em_fit(c, init, data, opts);
  for (std::size_t v : g.endogenous_variables()) EXPECT_TRUE(r.params.deterministic(v));
  EXPECT_GE(r.trace.back(), r.trace.front());
}

TEST(Em, RestartsAreSeeded) {
  Scm scm = hypertension_scm();
  const CausalGraph& g = scm.graph();
  Circuit c = compile_graph(g).circuit;
  Dataset data{{}, {Record{parse_assignment(g, "X=0,Y=0"), 3.0}, Record{parse_assignment(g, "Z=1"), 1.0}}};
  EmOptions opts;
  opts.seed = 99;
  opts.max_iters = 20;
  EmResult a = em_fit_restarts(c, g, data, opts, 3);
  EmResult b = em_fit_restarts(c, g, data, opts, 3);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.params.tables(), b.params.tables());
}

}  // namespace
}  // namespace causalac
