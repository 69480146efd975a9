#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace pcbound;
using pcbound::test::binary_graph;

namespace {

CausalGraph example_chain() { return binary_graph({"X", "Y"}, {{"X", "Y"}}, {}, "X", "Y"); }

}  // namespace

TEST(ResponseCount, Definition) {
  CausalGraph g = example_chain();
  EXPECT_EQ(response_count(g, "Y"), 4u);
  EXPECT_EQ(response_count(g, "X"), 2u);
  GraphDecl d;
  d.variables = {{"P", {"p0", "p1"}}, {"V", {"a", "b", "c"}}};
  d.directed_edges = {{"P", "V"}};
  d.protected_attr = "P";
  d.decision = "V";
  EXPECT_EQ(response_count(CausalGraph(d), "V"), 9u);
  EXPECT_THROW(response_count(g, "Q"), NameError);
}

TEST(ResponseFunctionTable, BinaryChainOrdering) {
  CausalGraph g = example_chain();
  auto y = enumerate_response_functions(g, "Y");
  ASSERT_EQ(y.count(), 4u);
  EXPECT_EQ(y.function(0), (std::vector<std::size_t>{0, 0}));  // constant y0
  EXPECT_EQ(y.function(1), (std::vector<std::size_t>{0, 1}));  // identity
  EXPECT_EQ(y.function(2), (std::vector<std::size_t>{1, 0}));  // inverter
  EXPECT_EQ(y.function(3), (std::vector<std::size_t>{1, 1}));  // constant y1
  auto x = enumerate_response_functions(g, "X");
  EXPECT_EQ(x.value(0, 0), 0u);
  EXPECT_EQ(x.value(1, 0), 1u);
}

TEST(ResponseFunctionTable, TwoParentsGiveSixteenDistinctLexicographicMaps) {
  CausalGraph g = binary_graph({"A", "B", "V"}, {{"A", "V"}, {"B", "V"}}, {}, "A", "V");
  auto t = enumerate_response_functions(g, "V");
  ASSERT_EQ(t.count(), 16u);
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::size_t> previous;
  for (std::uint64_t r = 0; r < 16; ++r) {
    auto f = t.function(r);
    EXPECT_TRUE(seen.insert(f).second);
    if (r > 0) {
      EXPECT_LT(previous, f);
    }
    previous = f;
    EXPECT_EQ(t.classify(f), r);
  }
  // Parent assignments are ordered with the first parent most significant.
  EXPECT_EQ(t.parent_config(Assignment{1, 0, 0}), 2u);
  EXPECT_EQ(t.parent_config(Assignment{0, 1, 0}), 1u);
}

TEST(Indicator, ExampleValues) {
  CausalGraph g = example_chain();
  auto y = enumerate_response_functions(g, "Y");
  EXPECT_EQ(indicator(0, 0, 1, y), 1);
  EXPECT_EQ(indicator(1, 0, 1, y), 0);
  EXPECT_EQ(indicator(1, 1, 3, y), 1);
}

TEST(ResponseFunctionTable, UniformCodomainCoverageAndDistinctness) {
  GraphDecl d;
  d.variables = {{"S", {"s0", "s1"}}, {"M", {"m0", "m1", "m2"}}, {"Y", {"y0", "y1"}}, {"Z", {"z0", "z1", "z2"}}};
  d.directed_edges = {{"S", "M"}, {"M", "Y"}, {"S", "Y"}, {"S", "Z"}, {"Y", "Z"}};
  d.protected_attr = "S";
  d.decision = "Y";
  CausalGraph g(d);
  for (std::size_t v = 0; v < g.size(); ++v) {
    ResponseFunctionTable t(g, v);
    EXPECT_EQ(t.count(), response_count(g, v));
    if (t.count() > 4096) continue;
    std::set<std::vector<std::size_t>> seen;
    for (std::uint64_t r = 0; r < t.count(); ++r) EXPECT_TRUE(seen.insert(t.function(r)).second);
    for (std::size_t cfg = 0; cfg < t.parent_config_count(); ++cfg)
      for (std::size_t x = 0; x < g.domain_size(v); ++x) {
        std::uint64_t hits = 0;
        for (std::uint64_t r = 0; r < t.count(); ++r) hits += indicator(x, cfg, r, t);
        EXPECT_EQ(hits, t.count() / g.domain_size(v));
      }
  }
}

TEST(ResponseFunctionTable, Deterministic) {
  CausalGraph g = test::fig6_graph();
  ResponseFunctionTable a(g, g.index_of("Yhat")), b(g, g.index_of("Yhat"));
  ASSERT_EQ(a.count(), b.count());
  for (std::uint64_t r = 0; r < a.count(); ++r) EXPECT_EQ(a.function(r), b.function(r));
}

TEST(ResponseFunctionTable, CapExceededNamesVariable) {
  GraphDecl d;
  d.variables = {{"S", {"s0", "s1"}}};
  for (int i = 0; i < 5; ++i) d.variables.push_back({"P" + std::to_string(i), {"a", "b"}});
  d.variables.push_back({"Y", {"y0", "y1"}});
  for (int i = 0; i < 5; ++i) d.directed_edges.push_back({"P" + std::to_string(i), "Y"});
  d.directed_edges.push_back({"S", "Y"});
  d.protected_attr = "S";
  d.decision = "Y";
  CausalGraph g(d);
  try {
    ResponseFunctionTable t(g, g.index_of("Y"));
    FAIL() << "expected CapExceededError";
  } catch (const CapExceededError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("'Y'"), std::string::npos);
    EXPECT_NE(msg.find("in-degree 6"), std::string::npos);
  }
}

TEST(ConfoundedComponents, Examples) {
  auto markovian = CausalGraph(topology_graph("fig6-markovian"));
  EXPECT_EQ(confounded_components(markovian).components.size(), 5u);
  auto fig6 = test::fig6_graph();
  auto blocks = confounded_components(fig6);
  ASSERT_EQ(blocks.components.size(), 1u);
  EXPECT_EQ(blocks.components[0].size(), 5u);
  auto bow = test::bow_graph();
  EXPECT_EQ(confounded_components(bow).components, (std::vector<std::vector<std::size_t>>{{0, 1}}));
}

TEST(ProfileSpace, EncodeDecodeAndCap) {
  CausalGraph g = test::fig6_graph();
  ResponseModel tables(g);
  ProfileSpace space = full_profile_space(g, tables);
  std::uint64_t product = 1;
  for (std::size_t v = 0; v < g.size(); ++v) product *= response_count(g, v);
  EXPECT_EQ(space.size(), product);
  EXPECT_EQ(space.size(), 32768u);
  ResponseProfile r(g.size());
  for (std::uint64_t i = 0; i < space.size(); i += 97) {
    space.decode(i, r);
    EXPECT_EQ(space.encode(r), i);
  }
  EXPECT_THROW(ProfileSpace(space.variables(), tables, 1000), CapExceededError);
}
