#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "pcbound/cli.hpp"
#include "test_support.hpp"

using namespace pcbound;
using pcbound::test::fixture;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pcbound");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  set_worker_threads(0);
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pcbound_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Json report_of(const CliResult& r) { return Json::parse(r.out); }

}  // namespace

TEST(Io, CsvErrorsCarryLineNumbers) {
  auto g = test::bow_graph();
  try {
    parse_csv("X,Y\nx0,y1\nx2,y0\n", g, "data.csv");
    FAIL();
  } catch (const UnknownLabelError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_csv("X,Z\nx0,y1\n", g, "d.csv"), ParseError);
  EXPECT_THROW(parse_csv("X,Y,Y\nx0,y1,y1\n", g, "d.csv"), ParseError);
  EXPECT_THROW(parse_csv("X,Y\n", g, "d.csv"), EmptyDataError);
  auto rows = parse_csv("Y, X\ny1, x0\ny0,x1\n", g, "d.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x0", "y1"}));
}

TEST(Io, JsonErrorsNameTheSource) {
  try {
    parse_json("{\"variables\": [", "g.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("g.json"), std::string::npos);
  }
  EXPECT_THROW(load_graph(fixture("missing.json")), ParseError);
}

TEST(Io, GraphAndOracleRoundTrip) {
  GeneratorSpec spec;
  spec.topology = "kite";
  spec.exogenous_size = 3;
  spec.seed = 4;
  auto scm = generate_model(spec);
  Json j = oracle_to_json(scm);
  auto decl = graph_decl_from_json(j, "mem");
  CausalGraph g(decl);
  auto back = oracle_from_json(j, g, "mem");
  ASSERT_TRUE(back);
  EXPECT_EQ(back->functions(), scm.functions());
  EXPECT_EQ(back->wiring(), scm.wiring());
  EXPECT_EQ(oracle_to_json(*back).dump(), j.dump());
  EXPECT_EQ(graph_decl_to_json(decl).dump(), graph_decl_to_json(graph_decl_from_json(graph_decl_to_json(decl), "m")).dump());
}

TEST(Io, DistributionFormats) {
  auto g = test::bow_graph();
  auto dense = distribution_from_json(Json::parse(R"({"probabilities": [0.3, 0.2, 0.1, 0.4]})"), g, "d");
  auto cells = distribution_from_json(
      Json::parse(R"({"cells": [{"assignment": {"X": "x0", "Y": "y0"}, "p": 0.3},
                                {"assignment": {"X": "x0", "Y": "y1"}, "p": 0.2},
                                {"assignment": {"X": "x1", "Y": "y0"}, "p": 0.1},
                                {"assignment": {"X": "x1", "Y": "y1"}, "p": 0.4}]})"),
      g, "d");
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(dense.prob(c), cells.prob(c));
  auto again = distribution_from_json(distribution_to_json(dense, g), g, "d");
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(dense.prob(c), again.prob(c));
  EXPECT_THROW(distribution_from_json(Json::parse(R"({"probabilities": [0.5, 0.5]})"), g, "d"), ParseError);
}

TEST(Io, PathSetForms) {
  auto g = test::fig6_graph();
  EXPECT_TRUE(parse_path_set("[]", g).empty());
  EXPECT_EQ(parse_path_set("all", g), enumerate_causal_paths(g));
  EXPECT_EQ(parse_path_set("direct", g), direct_paths(g));
  EXPECT_EQ(parse_path_set(R"({"through": ["A"]})", g), redlining_paths(g, {"A"}));
  auto explicit_set = parse_path_set(R"([["S","Yhat"], "S->W->A->Yhat"])", g);
  EXPECT_EQ(explicit_set.size(), 2u);
  EXPECT_EQ(parse_path_set(path_set_to_json(g, explicit_set).dump(), g), explicit_set);
  EXPECT_THROW(parse_path_set(R"([["S","A","Yhat"]])", g), InvalidPathError);
  EXPECT_EQ(parse_key_values("S=s+, W=w1"), (std::vector<std::pair<std::string, std::string>>{{"S", "s+"}, {"W", "w1"}}));
}

TEST(Cli, BoundBowDistribution) {
  auto r = run_cli({"bound", "--graph", fixture("bow.json"), "--dist", fixture("bow_dist.json"), "--notion",
                    "total-effect", "--y", "y1"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = report_of(r);
  EXPECT_NEAR(j["full"]["lb"].get<double>(), -0.3, 1e-9);
  EXPECT_NEAR(j["full"]["ub"].get<double>(), 0.7, 1e-9);
  EXPECT_EQ(j["verdict"]["result"], "uncertain");
  EXPECT_EQ(j["schema"], 1);
  EXPECT_TRUE(j["factored"].is_null());
  EXPECT_EQ(j["inputs"]["graph"]["sha256"].get<std::string>().size(), 64u);
  auto strict = run_cli({"bound", "--graph", fixture("bow.json"), "--dist", fixture("bow_dist.json"), "--notion",
                         "total-effect", "--strict"});
  EXPECT_EQ(strict.code, 2);
}

TEST(Cli, BoundFig6EndToEnd) {
  auto r = run_cli({"bound", "--graph", fixture("fig6_scm.json"), "--data", fixture("fig6_data.csv"), "--pi",
                    R"([["S","Yhat"],["S","W","A","Yhat"]])", "--condition", "S=s+,W=w1,A=a1", "--mode", "both",
                    "--restarts", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = report_of(r);
  double lb = j["full"]["lb"], ub = j["full"]["ub"];
  EXPECT_LE(lb, ub);
  EXPECT_GE(lb, -1.0 - 1e-9);
  EXPECT_LE(ub, 1.0 + 1e-9);
  EXPECT_EQ(j["full"]["columns"], 32768);
  EXPECT_FALSE(j["factored"].is_null());
  EXPECT_GE(j["factored"]["lb"].get<double>(), lb - 1e-7);
  EXPECT_LE(j["factored"]["ub"].get<double>(), ub + 1e-7);
}

TEST(Cli, EmptyPathSetIsFair) {
  auto r = run_cli({"bound", "--graph", fixture("fig6_scm.json"), "--data", fixture("fig6_data.csv"), "--pi", "[]"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = report_of(r);
  EXPECT_EQ(j["full"]["lb"].get<double>(), 0.0);
  EXPECT_EQ(j["full"]["ub"].get<double>(), 0.0);
  EXPECT_EQ(j["verdict"]["result"], "fair");
}

TEST(Cli, BoundErrors) {
  auto base = std::vector<std::string>{"bound", "--graph", fixture("fig6_scm.json"), "--data", fixture("fig6_data.csv")};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  };
  auto r = with({"--notion", "indirect"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("redlining"), std::string::npos) << r.err;
  EXPECT_EQ(with({"--notion", "total-effect", "--pi", "all"}).code, 1);
  EXPECT_EQ(with({"--notion", "bogus"}).code, 1);
  EXPECT_EQ(with({"--pi", "all", "--condition", "S=s+,S=s-"}).code, 1);
  EXPECT_EQ(run_cli({"bound", "--graph", fixture("fig6_scm.json")}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
}

TEST(Cli, InvalidDistributionExitsWithError) {
  auto dir = scratch("bad_dist");
  write_file((dir / "d.json").string(), R"({"probabilities": [0.5, 0.5, 0.5, 0.5]})");
  auto r = run_cli({"bound", "--graph", fixture("bow.json"), "--dist", (dir / "d.json").string(), "--notion",
                    "total-effect"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, AuditReportsEverySupportedCell) {
  auto r = run_cli({"audit", "--graph", fixture("fig6_scm.json"), "--data", fixture("fig6_data.csv"), "--notion",
                    "counterfactual", "--tau", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = report_of(r);
  std::size_t total = j["summary"]["total"];
  EXPECT_EQ(j["reports"].size(), total);
  EXPECT_LE(total, 16u);
  EXPECT_GT(total, 0u);
  std::size_t sum = j["summary"]["fair"].get<std::size_t>() + j["summary"]["unfair"].get<std::size_t>() +
                    j["summary"]["uncertain"].get<std::size_t>() + j["summary"]["infeasible"].get<std::size_t>();
  EXPECT_EQ(sum, total);
  for (const auto& rep : j["reports"]) EXPECT_GE(rep["condition_mass"].get<double>(), 0.02);

  auto none = run_cli({"audit", "--graph", fixture("fig6_scm.json"), "--data", fixture("fig6_data.csv"), "--notion",
                       "counterfactual", "--min-support", "0.9"});
  EXPECT_EQ(none.code, 0);
  EXPECT_EQ(report_of(none)["summary"]["total"], 0);
  EXPECT_EQ(report_of(none)["warnings"].size(), 1u);
  EXPECT_NE(none.err.find("warning"), std::string::npos);
}

TEST(Cli, AuditGroupsByNamedVariables) {
  auto r = run_cli({"audit", "--graph", fixture("hiring_scm.json"), "--data", fixture("hiring.csv"), "--notion",
                    "counterfactual-error-rate", "--error-rate-paths", "direct", "--condition", "S,Y"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = report_of(r);
  EXPECT_EQ(j["condition_variables"], Json::parse(R"(["S","Y"])"));
  EXPECT_LE(j["summary"]["total"].get<std::size_t>(), 4u);
}

TEST(Cli, PathsListing) {
  auto r = run_cli({"paths", "--graph", fixture("fig6.json"), "--through", "W"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("paths 3\n", 0), 0u);
  EXPECT_NE(r.out.find("1\tS->W->B->Yhat\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("through W: 2\n"), std::string::npos);
  auto none = run_cli({"paths", "--graph", fixture("noroute.json")});
  EXPECT_EQ(none.code, 0);
  EXPECT_EQ(none.out, "paths 0\ndirect: none\n");
}

TEST(Cli, SimulateIsReproducible) {
  auto a = scratch("sim_a"), b = scratch("sim_b");
  for (const auto& dir : {a, b}) {
    auto r = run_cli({"simulate", "--topology", "fig6", "--confounder-size", "100", "--seed", "7", "-n", "500",
                      "--out-dir", dir.string(), "--truth", "--pi", R"([["S","Yhat"],["S","W","A","Yhat"]])",
                      "--condition", "S=s+,W=w1,A=a1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_file((a / "scm.json").string()), read_file((b / "scm.json").string()));
  EXPECT_EQ(read_file((a / "data.csv").string()), read_file((b / "data.csv").string()));

  // The truth file agrees with the oracle evaluated directly.
  GraphFile gf = load_graph((a / "scm.json").string());
  ASSERT_TRUE(gf.oracle);
  const auto& g = gf.graph;
  PceQuery q;
  q.pi = parse_path_set(R"([["S","Yhat"],["S","W","A","Yhat"]])", g);
  q.condition = make_condition(g, {{"S", "s+"}, {"W", "w1"}, {"A", "a1"}});
  Json truth = Json::parse(read_file((a / "truth.json").string()));
  EXPECT_DOUBLE_EQ(truth["value"].get<double>(), ground_truth_pce(*gf.oracle, q).value);
}

TEST(Cli, TruthLiesInsideReportedBounds) {
  auto dir = scratch("roundtrip");
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const std::string s = std::to_string(seed);
    auto sim = run_cli({"simulate", "--topology", "fig6", "--confounder-size", "10", "--seed", s, "-n", "200",
                        "--out-dir", dir.string(), "--truth", "--notion", "total-effect"});
    ASSERT_EQ(sim.code, 0) << sim.err;
    // Exact observational table from the model keeps the truth inside the interval.
    GraphFile gf = load_graph((dir / "scm.json").string());
    write_file((dir / "exact.json").string(), distribution_to_json(model_to_distribution(*gf.oracle), gf.graph).dump());
    auto r = run_cli({"bound", "--graph", (dir / "scm.json").string(), "--dist", (dir / "exact.json").string(),
                      "--notion", "total-effect"});
    ASSERT_EQ(r.code, 0) << r.err;
    Json rep = report_of(r);
    double truth = Json::parse(read_file((dir / "truth.json").string()))["value"];
    EXPECT_GE(truth, rep["full"]["lb"].get<double>() - 1e-9);
    EXPECT_LE(truth, rep["full"]["ub"].get<double>() + 1e-9);
  }
}

TEST(Cli, ExportLp) {
  auto r = run_cli({"export-lp", "--graph", fixture("bow.json"), "--dist", fixture("bow_dist.json"), "--notion",
                    "total-effect", "--sense", "min"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nMinimize\n obj:"), std::string::npos);
  EXPECT_EQ(run_cli({"export-lp", "--graph", fixture("bow.json"), "--dist", fixture("bow_dist.json"), "--notion",
                     "total-effect", "--sense", "up"})
                .code,
            1);
}

TEST(Cli, ReportsIgnoreThreadCount) {
  std::vector<std::string> outs;
  for (const char* t : {"1", "4", "8"}) {
    auto r = run_cli({"--threads", t, "audit", "--graph", fixture("hiring_scm.json"), "--data", fixture("hiring.csv"),
                      "--notion", "counterfactual", "--mode", "both", "--restarts", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    outs.push_back(r.out);
  }
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_EQ(outs[0], outs[2]);
}
