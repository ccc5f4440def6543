#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"

namespace causalac {
namespace {

// A -> B, A -> C, B -> D, C -> D, C -> E with A a root carrying a prior.
CausalGraph diamond_graph() {
  std::vector<Variable> vars{{"A", 2, VarKind::kExogenous},  {"B", 2, VarKind::kEndogenous},
                             {"C", 2, VarKind::kEndogenous}, {"D", 2, VarKind::kEndogenous},
                             {"E", 2, VarKind::kEndogenous}};
  return CausalGraph(vars, {{}, {0}, {0}, {1, 2}, {2}});
}

// The twelve-node tree with f_B and f_C each held twice. Input ids are
// 1-based labels minus one; `preorder` maps each label to its id after
// renumbering.
struct Diamond {
  CausalGraph g = diamond_graph();
  Jointree jt;
  std::vector<int> id;  // id[label]

  Diamond() {
    std::vector<JointreeNode> n(12);
    auto leaf = [&](int label, std::size_t var, int copy) { n[label - 1].factor = FactorLabel{var, copy}; };
    auto link = [&](int parent, std::vector<int> kids) {
      for (int k : kids) {
        n[parent - 1].children.push_back(k - 1);
        n[k - 1].parent = parent - 1;
      }
    };
    leaf(1, 1, 0);
    leaf(6, 0, 0);
    leaf(9, 4, 0);
    leaf(10, 2, 1);
    leaf(8, 2, 0);
    leaf(11, 1, 1);
    leaf(12, 3, 0);
    link(1, {2});
    link(2, {3, 4});
    link(3, {6, 5});
    link(5, {9, 10});
    link(4, {8, 7});
    link(7, {11, 12});
    jt = Jointree(g, n, 0);
    const std::vector<int> pre{1, 2, 3, 6, 5, 9, 10, 4, 8, 7, 11, 12};
    id.assign(13, -1);
    for (int k = 0; k < 12; ++k) id[pre[k]] = k;
  }
};

VarSet vs(std::initializer_list<std::size_t> v) { return VarSet(v); }

TEST(Jointree, DiamondUnthinned) {
  Diamond d;
  EXPECT_EQ(d.jt.size(), 12u);
  EXPECT_EQ(d.jt.sep(d.id[3]), vs({0, 2}));
  EXPECT_EQ(d.jt.cls(d.id[7]), vs({0, 1, 2}));
  EXPECT_EQ(d.jt.replicas(1), 2);
  EXPECT_EQ(d.jt.replicas(2), 2);
  EXPECT_EQ(d.jt.label(d.id[10]), "f_C#1");
  EXPECT_EQ(d.jt.label(d.id[6]), "f_A");
}

TEST(Jointree, DiamondThinning) {
  Diamond d;
  ThinResult r = thin(d.jt, {1, 2});
  std::vector<std::pair<int, std::size_t>> got, want;
  for (const auto& rm : r.certificate.removals) got.push_back({rm.node, rm.var});
  for (int label : {3, 4, 5}) want.push_back({d.id[label], 2});
  for (int label : {7, 4, 2}) want.push_back({d.id[label], 1});
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
  EXPECT_EQ(r.tree.sep(d.id[3]), vs({0}));
  EXPECT_EQ(r.tree.sep(d.id[4]), vs({0}));
  EXPECT_FALSE(detail::contains(r.tree.sep(d.id[2]), 1));
  EXPECT_LE(r.tree.width(), d.jt.width());
}

TEST(Jointree, DumpFormat) {
  CausalGraph g = chain_graph();
  Jointree jt = build_jointree(g, elimination_order(g, OrderHeuristic::kMinFill), {1, 1},
                               Placement::kStandalone);
  EXPECT_EQ(jt.width(), 1);
  std::string dump = jt.dump();
  EXPECT_EQ(std::count(dump.begin(), dump.end(), '\n'), 2);
  EXPECT_EQ(dump.rfind("node 0 parent=- sep={} cls=", 0), 0u) << dump;
  EXPECT_NE(dump.find("node 1 parent=0 sep={U} cls="), std::string::npos) << dump;
}

TEST(Jointree, RejectsMalformedTrees) {
  CausalGraph g = chain_graph();
  std::vector<JointreeNode> n(2);
  n[0].factor = FactorLabel{0, 0};
  n[1].factor = FactorLabel{1, 0};
  EXPECT_THROW(Jointree(g, n, 0), StructureError);  // top leaf without its child
  n[0].children = {1};
  n[1].parent = 0;
  EXPECT_NO_THROW(Jointree(g, n, 0));
  n[1].factor = FactorLabel{1, 1};
  EXPECT_THROW(Jointree(g, n, 0), StructureError);  // copies not numbered from 0
  n[1].factor = FactorLabel{0, 0};
  EXPECT_THROW(Jointree(g, n, 0), StructureError);  // f_V missing, prior twice
}

TEST(BuildJointree, RejectsReplicatedPriors) {
  CausalGraph g = chain_graph();
  EXPECT_THROW(build_jointree(g, elimination_order(g, OrderHeuristic::kMinFill), {2, 1},
                              Placement::kStandalone),
               StructureError);
}

TEST(EliminationOrder, ChainHasWidthOne) {
  CausalGraph g = chain_graph();
  EXPECT_EQ(elimination_order(g, OrderHeuristic::kGiven, {0, 1}).width, 1);
  EXPECT_EQ(elimination_order(g, OrderHeuristic::kGiven, {1, 0}).width, 1);
  EXPECT_EQ(elimination_order(g, OrderHeuristic::kMinDegree).width, 1);
}

TEST(EliminationOrder, GivenOrderMustBeAPermutation) {
  CausalGraph g = hypertension_graph();
  EXPECT_THROW(elimination_order(g, OrderHeuristic::kGiven, {0, 1, 2}), Error);
  EXPECT_THROW(parse_order(g, "X,Y,Q"), Error);
}

TEST(EliminationOrder, MinFillMatchesExhaustiveTreewidthOnHypertension) {
  CausalGraph g = hypertension_graph();
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  int best = 1 << 20;
  int orders = 0;
  do {
    best = std::min(best, order_width(g, perm));
    ++orders;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(orders, 5040);
  EXPECT_EQ(elimination_order(g, OrderHeuristic::kMinFill).width, best);
}

// Z_11..Z_nn, U_X, Y_1..Y_n, U_Y, X_1..X_n.
std::string grid_user_order(int n) {
  std::string s;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) s += "Z_" + std::to_string(i) + "_" + std::to_string(j) + ",";
  }
  s += "U_X,";
  for (int j = 1; j <= n; ++j) s += "Y_" + std::to_string(j) + ",";
  s += "U_Y";
  for (int i = 1; i <= n; ++i) s += ",X_" + std::to_string(i);
  return s;
}

TEST(Grid, UserOrderWidthAndCascadeWidth) {
  for (int n = 2; n <= 10; ++n) {
    CausalGraph g = grid_graph(n, false);
    EXPECT_EQ(g.size(), static_cast<std::size_t>(n * n + 2 * n + 2));
    EXPECT_EQ(elimination_order(g, OrderHeuristic::kGiven, parse_order(g, grid_user_order(n))).width, n + 1)
        << n;
    Jointree jt = grid_cascade_jointree(g, n);
    EXPECT_EQ(jt.replicas(g.index_of("X_1")), n);
    Jointree thinned = thin(jt, g.endogenous_variables()).tree;
    EXPECT_EQ(thinned.width(), 2) << n;
    EXPECT_GT(jt.width(), 2) << n;
  }
}

TEST(Grid, PlusHasConstantThinnedWidth) {
  std::vector<int> widths;
  for (int n = 2; n <= 8; ++n) {
    CausalGraph g = grid_graph(n, true);
    widths.push_back(select_jointree(g, {}).width());
  }
  for (int w : widths) EXPECT_EQ(w, widths.front());
  EXPECT_LE(widths.front(), 6);
}

// Nodes whose cluster holds v form one connected subtree.
bool running_intersection(const Jointree& jt, std::size_t v) { return scopes(jt, v).size() <= 1; }

void check_certificate(const Jointree& before, const ThinResult& r) {
  for (const auto& rm : r.certificate.removals) {
    const int lo = rm.node, hi = rm.node + before.subtree_size(rm.node);
    ASSERT_GE(rm.witness_below, lo);
    ASSERT_LT(rm.witness_below, hi);
    ASSERT_TRUE(rm.witness_above < lo || rm.witness_above >= hi);
    for (int w : {rm.witness_below, rm.witness_above}) {
      ASSERT_TRUE(before.is_leaf(w));
      EXPECT_EQ(before.node(w).factor->var, rm.var);
    }
    EXPECT_TRUE(detail::contains(before.sep(rm.node), rm.var));
    EXPECT_FALSE(detail::contains(r.tree.sep(rm.node), rm.var));
  }
}

TEST(JointreeProperties, RandomGraphs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    CausalGraph g = random_graph(rng, {});
    for (Placement pl : {Placement::kStandalone, Placement::kBundle}) {
      EliminationOrder order = elimination_order(g, OrderHeuristic::kMinFill);
      std::vector<int> reps = pl == Placement::kBundle ? default_replicas(g, 1 + trial % 4)
                                                        : std::vector<int>(g.size(), 1);
      Jointree jt = build_jointree(g, order, reps, pl);
      std::size_t leaves = 0;
      for (std::size_t i = 0; i < jt.size(); ++i) leaves += jt.is_leaf(int(i));
      EXPECT_EQ(leaves, static_cast<std::size_t>(std::accumulate(reps.begin(), reps.end(), 0)));
      for (std::size_t v = 0; v < g.size(); ++v) {
        EXPECT_TRUE(running_intersection(jt, v)) << jt.dump();
      }
      if (pl == Placement::kStandalone) {
        EXPECT_GE(jt.width(), order.width);
      }
      ThinResult r = thin(jt, g.endogenous_variables());
      for (std::size_t i = 0; i < jt.size(); ++i) {
        const VarSet& a = r.tree.sep(int(i));
        const VarSet& b = jt.sep(int(i));
        EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
      }
      EXPECT_LE(r.tree.width(), jt.width());
      check_certificate(jt, r);
      if (pl == Placement::kStandalone) {
        EXPECT_TRUE(r.certificate.removals.empty());
      }
      // Every scope of a functional variable holds one of its copies.
      for (std::size_t x : g.endogenous_variables()) {
        for (const auto& scope : scopes(r.tree, x)) {
          EXPECT_TRUE(std::any_of(scope.begin(), scope.end(), [&](int i) {
            return r.tree.is_leaf(i) && r.tree.node(i).factor->var == x;
          }));
        }
      }
    }
  }
}

TEST(Thin, RejectsExogenous) {
  Diamond d;
  EXPECT_THROW(thin(d.jt, {0}), StructureError);
}

TEST(Thin, NonFunctionalVariablesStay) {
  Diamond d;
  ThinResult r = thin(d.jt, {2});
  for (const auto& rm : r.certificate.removals) EXPECT_EQ(rm.var, 2u);
  EXPECT_TRUE(detail::contains(r.tree.sep(d.id[7]), 1));
}

}  // namespace
}  // namespace causalac
