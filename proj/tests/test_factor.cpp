#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace causalac {
namespace {

// Value of f at a full assignment covering vars(f).
double at(const Factor<double>& f, const std::vector<int>& full) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < f.vars().size(); ++i) idx = idx * f.cards()[i] + full[f.vars()[i]];
  return f[idx];
}

// Cell-for-cell equality after aligning variable order.
void expect_same(const Factor<double>& a, const Factor<double>& b, std::size_t nvars, double tol = 0.0) {
  ASSERT_EQ(detail::sorted(a.vars()), detail::sorted(b.vars()));
  std::vector<int> full(nvars, 0), cards(nvars, 2);
  do {
    EXPECT_NEAR(at(a, full), at(b, full), tol);
  } while (detail::advance(full, cards));
}

Factor<double> binary(std::vector<std::size_t> vars, std::vector<double> cells) {
  std::vector<int> cards(vars.size(), 2);
  return Factor<double>(std::move(vars), std::move(cards), std::move(cells));
}

Factor<double> random_binary(std::mt19937_64& rng, std::vector<std::size_t> vars) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cells(std::size_t{1} << vars.size());
  for (double& c : cells) c = u(rng);
  return binary(std::move(vars), std::move(cells));
}

// Random mechanism for `x` given `parents`, with x last.
Factor<double> random_mechanism(std::mt19937_64& rng, std::vector<std::size_t> parents, std::size_t x) {
  std::vector<double> cells;
  for (std::size_t p = 0; p < (std::size_t{1} << parents.size()); ++p) {
    const int out = static_cast<int>(rng() % 2);
    cells.push_back(out == 0);
    cells.push_back(out == 1);
  }
  parents.push_back(x);
  return binary(std::move(parents), std::move(cells));
}

std::vector<std::size_t> random_subset(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n; ++v) {
    if (rng() % 2) out.push_back(v);
  }
  return out;
}

TEST(Factor, ValidatesShape) {
  EXPECT_THROW(Factor<double>({0}, {2}, {1.0}), Error);
  EXPECT_THROW(Factor<double>({0, 0}, {2, 2}, {1, 1, 1, 1}), Error);
  EXPECT_NO_THROW(Factor<double>::scalar(2.0));
}

TEST(Multiply, Pointwise) {
  Factor<double> h = multiply(binary({0}, {0.3, 0.7}), binary({0}, {1, 0}));
  EXPECT_EQ(h.cells(), (std::vector<double>{0.3, 0.0}));
}

TEST(Multiply, TwoByTwo) {
  Factor<double> f = binary({0}, {0.3, 0.7});
  Factor<double> g = binary({0, 1}, {0.1, 0.9, 0.6, 0.4});
  Factor<double> h = multiply(f, g);
  EXPECT_EQ(h.vars(), (std::vector<std::size_t>{0, 1}));
  ASSERT_EQ(h.size(), 4u);
  EXPECT_DOUBLE_EQ(h[0], 0.3 * 0.1);
  EXPECT_DOUBLE_EQ(h[1], 0.3 * 0.9);
  EXPECT_DOUBLE_EQ(h[2], 0.7 * 0.6);
  EXPECT_DOUBLE_EQ(h[3], 0.7 * 0.4);
}

TEST(Multiply, SymbolicBuildsAMultiplyNode) {
  CircuitBuilder b({"U", "V"});
  SymbolicOps ops{&b};
  const NodeId tu = b.theta(0, 1, 0);
  const NodeId tvu = b.theta(1, 1, 1);
  Factor<NodeId> f({0}, {2}, {b.theta(0, 0, 0), tu});
  Factor<NodeId> g({0, 1}, {2, 2}, {b.theta(1, 0, 0), b.theta(1, 1, 0), b.theta(1, 0, 1), tvu});
  Factor<NodeId> h = multiply(f, g, ops);
  Circuit c = b.finish(h[3]);
  ASSERT_EQ(c.node(c.root()).kind, NodeKind::kMul);
  ASSERT_EQ(c.node(c.root()).children.size(), 2u);
  for (NodeId ch : c.node(c.root()).children) EXPECT_EQ(c.node(ch).kind, NodeKind::kTheta);
}

TEST(SumOut, MechanismRowsSumToOne) {
  // g(XY) with Y = not X.
  Factor<double> g = binary({0, 1}, {0, 1, 1, 0});
  Factor<double> s = sum_out(g, {1});
  EXPECT_EQ(s.vars(), (std::vector<std::size_t>{0}));
  EXPECT_EQ(s.cells(), (std::vector<double>{1, 1}));
}

TEST(SumOut, EmptySetIsIdentity) {
  Factor<double> g = binary({0, 1}, {0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(sum_out(g, {}), g);
  EXPECT_EQ(sum_out(g, {7}), g);
}

TEST(SumOut, EverythingGivesOneCell) {
  Factor<double> g = binary({0, 1}, {0.1, 0.2, 0.3, 0.4});
  Factor<double> s = sum_out(g, {0, 1});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0], 1.0, 1e-15);
}

TEST(SumOut, SymbolicChainPolynomial) {
  CircuitBuilder b({"U", "V"});
  SymbolicOps ops{&b};
  Factor<NodeId> f({0}, {2}, {b.theta(0, 0, 0), b.theta(0, 1, 0)});
  Factor<NodeId> g({0, 1}, {2, 2},
                   {b.theta(1, 0, 0), b.theta(1, 1, 0), b.theta(1, 0, 1), b.theta(1, 1, 1)});
  Factor<NodeId> h = evidence_factor(b, 1, 2, 1);
  Factor<NodeId> all = sum_out(multiply(multiply(f, g, ops), h, ops), {0, 1}, ops);
  Circuit c = b.finish(all[0]);
  // One add over four monomials, each θ_u θ_{v|u} λ_v.
  const CircuitNode& root = c.node(c.root());
  ASSERT_EQ(root.kind, NodeKind::kAdd);
  ASSERT_EQ(root.children.size(), 4u);
  for (NodeId m : root.children) {
    const CircuitNode& mono = c.node(m);
    ASSERT_EQ(mono.kind, NodeKind::kMul);
    ASSERT_EQ(mono.children.size(), 3u);
    int thetas = 0, lambdas = 0;
    for (NodeId leaf : mono.children) {
      thetas += c.node(leaf).kind == NodeKind::kTheta;
      lambdas += c.node(leaf).kind == NodeKind::kLambda;
    }
    EXPECT_EQ(thetas, 2);
    EXPECT_EQ(lambdas, 1);
  }
  // 6 θ + 2 λ + 4 monomials + 1 sum, one line each plus header and root.
  EXPECT_EQ(c.size(), 13u);
  std::string doc = serialize(c);
  EXPECT_EQ(std::count(doc.begin(), doc.end(), '\n'), 15);
}

TEST(EvidenceFactor, Numeric) {
  EXPECT_EQ(evidence_factor(0, 2, 0).cells(), (std::vector<double>{1, 0}));
  EXPECT_EQ(evidence_factor(0, 2, std::nullopt).cells(), (std::vector<double>{1, 1}));
  EXPECT_EQ(evidence_factor(0, 3, 2).cells(), (std::vector<double>{0, 0, 1}));
  EXPECT_THROW(evidence_factor(0, 2, 2), Error);
  EXPECT_THROW(evidence_factor(0, 2, -1), Error);
}

TEST(EvidenceFactor, SymbolicLeaves) {
  CircuitBuilder b({"V"});
  Factor<NodeId> h = evidence_factor(b, 0, 2, 0);
  ASSERT_EQ(h.size(), 2u);
  Circuit c0 = b.finish(h[0]);
  Circuit c1 = b.finish(h[1]);
  EXPECT_EQ(c0.node(c0.root()).kind, NodeKind::kLambda);
  EXPECT_EQ(c0.node(c0.root()).value, 0u);
  EXPECT_EQ(c1.node(c1.root()).value, 1u);
}

TEST(IsMechanism, Cases) {
  EXPECT_TRUE(is_mechanism(binary({0, 1}, {0, 1, 1, 0}), 1));
  EXPECT_FALSE(is_mechanism(binary({0, 1}, {0.5, 0.5, 1, 0}), 1));
  EXPECT_FALSE(is_mechanism(binary({0, 1}, {1, 1, 1, 1}), 1));
  // Tested for the parent it is not a mechanism.
  EXPECT_FALSE(is_mechanism(binary({0, 1}, {1, 0, 1, 0}), 0));
  EXPECT_THROW(is_mechanism(binary({0}, {1, 0}), 3), Error);
}

TEST(FactorProperties, SumOutOrderCommutes) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    Factor<double> f = random_binary(rng, {0, 1, 2, 3});
    const std::size_t x = rng() % 4, y = (x + 1 + rng() % 3) % 4;
    expect_same(sum_out(sum_out(f, {x}), {y}), sum_out(f, {x, y}), 4, 1e-15);
  }
}

TEST(FactorProperties, PullOut) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> fv = random_subset(rng, 4), gv = random_subset(rng, 4);
    if (fv.empty()) continue;
    const std::size_t x = fv[rng() % fv.size()];
    gv.erase(std::remove(gv.begin(), gv.end(), x), gv.end());
    Factor<double> f = random_binary(rng, fv), g = random_binary(rng, gv);
    expect_same(sum_out(multiply(f, g), {x}), multiply(sum_out(f, {x}), g), 4, 1e-15);
  }
}

TEST(FactorProperties, MechanismReplicationIsIdempotent) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> parents = random_subset(rng, 3);
    Factor<double> f = random_mechanism(rng, parents, 3);
    ASSERT_TRUE(is_mechanism(f, 3));
    Factor<double> g = random_binary(rng, f.vars());
    Factor<double> fg = multiply(f, g);
    expect_same(multiply(f, fg), fg, 4);
  }
}

TEST(FactorProperties, MechanismInBothParts) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t x = rng() % 4;
    std::vector<std::size_t> parents;
    for (std::size_t v = 0; v < 4; ++v) {
      if (v != x && rng() % 2) parents.push_back(v);
    }
    Factor<double> f = random_mechanism(rng, parents, x);
    Factor<double> pg = f, ph = f;
    for (int k = static_cast<int>(rng() % 3); k > 0; --k) pg = multiply(pg, random_binary(rng, random_subset(rng, 4)));
    for (int k = static_cast<int>(rng() % 3); k > 0; --k) ph = multiply(ph, random_binary(rng, random_subset(rng, 4)));

    Factor<double> lhs = multiply(pg, ph);
    Factor<double> rhs = multiply(pg, sum_out(ph, {x}));
    std::vector<int> full(4, 0), cards(4, 2);
    do {
      EXPECT_NEAR(at(lhs, full), at(rhs, full), 1e-14);
    } while (detail::advance(full, cards));

    // Summing X out of the whole product splits across the two parts.
    Factor<double> joint = sum_out(lhs, {x});
    Factor<double> split = multiply(sum_out(pg, {x}), sum_out(ph, {x}));
    full.assign(4, 0);
    do {
      EXPECT_NEAR(at(joint, full), at(split, full), 1e-14);
    } while (detail::advance(full, cards));
  }
}

TEST(FamilyFactor, MatchesScmTables) {
  Scm scm = hypertension_scm();
  const CausalGraph& g = scm.graph();
  Factor<double> fy = family_factor(scm, g.index_of("Y"));
  EXPECT_TRUE(is_mechanism(fy, g.index_of("Y")));
  EXPECT_EQ(fy.vars(), g.family(g.index_of("Y")));
  Factor<double> fu = family_factor(scm, g.index_of("U_r"));
  EXPECT_EQ(fu.cells(), (std::vector<double>{0.75, 0.25}));
}

}  // namespace
}  // namespace causalac
