#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "test_support.hpp"

using namespace pcbound;
using pcbound::test::binary_graph;

namespace {

GraphDecl chain_decl() {
  GraphDecl d;
  d.variables = {{"S", {"s0", "s1"}}, {"W", {"w0", "w1"}}, {"Yhat", {"y0", "y1"}}};
  d.directed_edges = {{"S", "W"}, {"W", "Yhat"}};
  d.protected_attr = "S";
  d.decision = "Yhat";
  return d;
}

}  // namespace

TEST(ValidateGraph, AcceptsChain) { EXPECT_NO_THROW(validate_graph(chain_decl())); }

TEST(ValidateGraph, RejectsTwoCycle) {
  GraphDecl d = chain_decl();
  d.directed_edges = {{"S", "Yhat"}, {"Yhat", "S"}};
  EXPECT_THROW(validate_graph(d), CycleError);
}

TEST(ValidateGraph, RejectsSelfLoop) {
  GraphDecl d = chain_decl();
  d.directed_edges.push_back({"W", "W"});
  EXPECT_THROW(validate_graph(d), CycleError);
}

TEST(ValidateGraph, RejectsUndeclaredEndpoint) {
  GraphDecl d = chain_decl();
  d.directed_edges.push_back({"S", "Z"});
  EXPECT_THROW(validate_graph(d), NameError);
  d = chain_decl();
  d.bidirected_edges.push_back({"Z", "S"});
  EXPECT_THROW(validate_graph(d), NameError);
}

TEST(ValidateGraph, RejectsBadRoles) {
  GraphDecl d = chain_decl();
  d.decision = "S";
  EXPECT_THROW(validate_graph(d), RoleError);
  d = chain_decl();
  d.protected_attr = "";
  EXPECT_THROW(validate_graph(d), Error);
  d = chain_decl();
  d.protected_attr = "Q";
  EXPECT_THROW(validate_graph(d), Error);
}

TEST(ValidateGraph, RejectsDuplicatesAndDegenerateDomains) {
  GraphDecl d = chain_decl();
  d.variables.push_back({"W", {"a", "b"}});
  EXPECT_THROW(validate_graph(d), NameError);
  d = chain_decl();
  d.variables[0].domain = {"only"};
  EXPECT_THROW(validate_graph(d), DomainError);
  d = chain_decl();
  d.variables[1].domain = {"w", "w"};
  EXPECT_THROW(validate_graph(d), DomainError);
}

TEST(ValidateGraph, OrderIndependent) {
  std::mt19937 shuffle_rng(5);
  std::vector<GraphDecl> cases;
  cases.push_back(chain_decl());
  GraphDecl cyclic = chain_decl();
  cyclic.directed_edges.push_back({"Yhat", "S"});
  cases.push_back(cyclic);
  cases.push_back(topology_graph("fig6"));
  GraphDecl bad = topology_graph("kite");
  bad.directed_edges.push_back({"Y", "X"});
  cases.push_back(bad);
  for (const auto& base : cases) {
    bool ok_base = true;
    try {
      validate_graph(base);
    } catch (const Error&) {
      ok_base = false;
    }
    for (int trial = 0; trial < 20; ++trial) {
      GraphDecl d = base;
      std::shuffle(d.variables.begin(), d.variables.end(), shuffle_rng);
      std::shuffle(d.directed_edges.begin(), d.directed_edges.end(), shuffle_rng);
      bool ok = true;
      try {
        validate_graph(d);
      } catch (const Error&) {
        ok = false;
      }
      EXPECT_EQ(ok, ok_base);
    }
  }
}

TEST(CausalGraph, StructureQueries) {
  CausalGraph g = test::fig6_graph();
  EXPECT_EQ(g.size(), 5u);
  EXPECT_EQ(g.cell_count(), 32u);
  std::size_t y = g.index_of("Yhat");
  auto pa = g.parents(y);
  EXPECT_EQ(std::vector<std::size_t>(pa.begin(), pa.end()),
            (std::vector<std::size_t>{g.index_of("S"), g.index_of("A"), g.index_of("B")}));
  EXPECT_TRUE(g.is_ancestor(g.index_of("S"), y));
  EXPECT_FALSE(g.is_ancestor(y, g.index_of("S")));
  EXPECT_TRUE(g.confounded(g.index_of("W"), g.index_of("B")));
  auto topo = g.topological_order();
  std::vector<std::size_t> pos(g.size());
  for (std::size_t i = 0; i < topo.size(); ++i) pos[topo[i]] = i;
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::size_t c : g.children(v)) EXPECT_LT(pos[v], pos[c]);
}

TEST(CausalGraph, CellEncodingRoundTrips) {
  GraphDecl d;
  d.variables = {{"S", {"a", "b"}}, {"M", {"m0", "m1", "m2"}}, {"Y", {"y0", "y1"}}};
  d.directed_edges = {{"S", "M"}, {"M", "Y"}};
  d.protected_attr = "S";
  d.decision = "Y";
  CausalGraph g(d);
  EXPECT_EQ(g.cell_count(), 12u);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    Assignment a = g.decode(cell);
    EXPECT_EQ(g.encode(a), cell);
    for (std::size_t v = 0; v < g.size(); ++v) EXPECT_EQ(g.value_in_cell(cell, v), a[v]);
  }
  EXPECT_EQ(g.decode(1), (Assignment{0, 0, 1}));  // last variable least significant
}

TEST(Condition, DuplicateVariableRejected) {
  CausalGraph g = test::bow_graph();
  EXPECT_THROW(make_condition(g, {{"X", "x0"}, {"X", "x1"}}), ConditionError);
  EXPECT_THROW(make_condition(g, {{"X", "x7"}}), Error);
  auto c = make_condition(g, {{"Y", "y1"}, {"X", "x0"}});
  EXPECT_EQ(c, (PartialAssignment{{0, 0}, {1, 1}}));
}

TEST(ObservationalDistribution, RejectsBadTables) {
  EXPECT_THROW(ObservationalDistribution::from_dense({0.5, 0.4, 0.0, 0.0}), DistributionError);
  EXPECT_THROW(ObservationalDistribution::from_dense({0.5, 0.6, -0.1, 0.0}), DistributionError);
  EXPECT_NO_THROW(ObservationalDistribution::from_dense({0.25, 0.25, 0.25, 0.25 + 5e-10}));
}

TEST(ObservationalDistribution, Marginals) {
  CausalGraph g = test::bow_graph();
  auto obs = ObservationalDistribution::from_dense({0.3, 0.2, 0.1, 0.4});
  EXPECT_DOUBLE_EQ(obs.marginal(g, make_condition(g, {{"X", "x0"}})), 0.5);
  EXPECT_DOUBLE_EQ(obs.marginal(g, make_condition(g, {{"Y", "y1"}})), 0.6);
  EXPECT_DOUBLE_EQ(obs.marginal(g, {}), 1.0);
}

TEST(EmpiricalDistribution, Counting) {
  CausalGraph g = test::bow_graph();
  auto obs = empirical_distribution(
      std::vector<std::vector<std::string>>{{"x0", "y0"}, {"x0", "y0"}, {"x1", "y1"}, {"x1", "y0"}}, g);
  EXPECT_EQ(obs.prob(g.encode({0, 0})), 0.5);
  EXPECT_EQ(obs.prob(g.encode({1, 1})), 0.25);
  EXPECT_EQ(obs.prob(g.encode({1, 0})), 0.25);
  EXPECT_EQ(obs.prob(g.encode({0, 1})), 0.0);
  EXPECT_EQ(obs.sample_size(), 4u);
}

TEST(EmpiricalDistribution, PointMass) {
  CausalGraph g = test::bow_graph();
  auto obs = empirical_distribution(std::vector<std::vector<std::string>>{{"x0", "y0"}}, g);
  EXPECT_EQ(obs.prob(0), 1.0);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_EQ(obs.prob(c), 0.0);
}

TEST(EmpiricalDistribution, Errors) {
  CausalGraph g = test::bow_graph();
  EXPECT_THROW(empirical_distribution(std::vector<std::vector<std::string>>{}, g), EmptyDataError);
  try {
    empirical_distribution(std::vector<std::vector<std::string>>{{"x0", "y0"}, {"x2", "y0"}}, g);
    FAIL() << "expected UnknownLabelError";
  } catch (const UnknownLabelError& e) {
    EXPECT_EQ(e.record(), 1u);
  }
}

namespace {

OracleScm copy_chain(std::vector<double> x_probs, std::vector<std::size_t> x_table, bool shared) {
  auto g = binary_graph({"X", "Y"}, {{"X", "Y"}}, shared ? std::vector<std::pair<std::string, std::string>>{{"X", "Y"}}
                                                          : std::vector<std::pair<std::string, std::string>>{},
                        "X", "Y");
  std::size_t k = x_probs.size();
  std::vector<std::size_t> y_table;  // Y copies X for every block value
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t u = 0; u < k; ++u) y_table.push_back(x);
  if (shared)
    return OracleScm(g, {{"U", x_probs}}, {0, 0}, {x_table, y_table});
  std::vector<std::size_t> y_own = {0, 1};
  return OracleScm(g, {{"UX", x_probs}, {"UY", {1.0}}}, {0, 1}, {x_table, y_own});
}

}  // namespace

TEST(ModelToDistribution, DeterministicChain) {
  auto scm = copy_chain({1.0}, {1}, true);
  auto obs = model_to_distribution(scm);
  EXPECT_EQ(obs.prob(scm.graph().encode({1, 1})), 1.0);
}

TEST(ModelToDistribution, UniformCopy) {
  auto scm = copy_chain({0.5, 0.5}, {0, 1}, false);
  auto obs = model_to_distribution(scm);
  EXPECT_EQ(obs.prob(0), 0.5);
  EXPECT_EQ(obs.prob(3), 0.5);
}

TEST(ModelToDistribution, BowByEnumeration) {
  // Shared block of size 3 with hand-written tables.
  auto g = test::bow_graph();
  OracleScm scm(g, {{"U", {0.2, 0.3, 0.5}}}, {0, 0}, {{0, 1, 1}, {1, 0, 1, /*x1:*/ 0, 0, 1}});
  auto obs = model_to_distribution(scm);
  // u=0: x0, y=f(x0,0)=1; u=1: x1, y=f(x1,1)=0; u=2: x1, y=f(x1,2)=1.
  EXPECT_NEAR(obs.prob(g.encode({0, 1})), 0.2, 1e-15);
  EXPECT_NEAR(obs.prob(g.encode({1, 0})), 0.3, 1e-15);
  EXPECT_NEAR(obs.prob(g.encode({1, 1})), 0.5, 1e-15);
  double total = 0.0;
  for (const auto& [c, p] : obs.cells()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(OracleScm, BlockSharingMustMatchBidirectedEdges) {
  auto markovian = binary_graph({"X", "Y"}, {{"X", "Y"}}, {}, "X", "Y");
  EXPECT_THROW(OracleScm(markovian, {{"U", {1.0}}}, {0, 0}, {{0}, {0, 1}}), ConfoundingError);
  auto bow = test::bow_graph();
  EXPECT_THROW(OracleScm(bow, {{"U", {1.0}}, {"V", {1.0}}}, {0, 1}, {{0}, {0, 1}}), ConfoundingError);
  EXPECT_THROW(OracleScm(bow, {{"U", {0.5, 0.6}}}, {0, 0}, {{0, 1}, {0, 1, 0, 1}}), DistributionError);
  EXPECT_THROW(OracleScm(bow, {{"U", {1.0}}}, {0, 0}, {{0, 1}, {0, 1}}), DistributionError);
}

TEST(ModelToDistribution, FuzzedModelsAreDistributions) {
  const char* topologies[] = {"bow", "kite", "w", "fig6", "fig6-markovian"};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GeneratorSpec spec;
    spec.topology = topologies[seed % 5];
    spec.confounder_size = 10;
    spec.exogenous_size = 4;
    spec.seed = seed;
    auto obs = model_to_distribution(generate_model(spec));
    double total = 0.0;
    for (const auto& [c, p] : obs.cells()) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(EmpiricalDistribution, ConvergesToModel) {
  GeneratorSpec spec;
  spec.topology = "kite";
  spec.exogenous_size = 6;
  spec.seed = 11;
  auto scm = generate_model(spec);
  auto truth = model_to_distribution(scm);
  auto sample = empirical_distribution(sample_dataset(scm, 100000, 3), scm.graph());
  double l1 = 0.0;
  for (std::size_t c = 0; c < scm.graph().cell_count(); ++c) l1 += std::abs(truth.prob(c) - sample.prob(c));
  EXPECT_LE(l1, 0.05);
}
