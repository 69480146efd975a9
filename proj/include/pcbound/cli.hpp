#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/fairness.hpp"
#include "pcbound/io.hpp"
#include "pcbound/model.hpp"
#include "pcbound/oracle.hpp"
#include "pcbound/parallel.hpp"
#include "pcbound/program.hpp"
#include "pcbound/solver.hpp"

#ifndef PCBOUND_VERSION
#define PCBOUND_VERSION "0.0.0"
#endif

namespace pcbound::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUncertain = 2;
inline constexpr int kSchemaVersion = 1;

struct QueryArgs {
  std::string notion;
  std::string pi;
  std::string redlining;
  std::string s0, s1, y;
  std::string condition;
  std::string error_rate_paths;  // direct | indirect
  bool unconditioned = false;
};

struct BoundArgs {
  std::string graph;
  std::string data;
  std::string dist;
  QueryArgs query;
  double tau = 0.1;
  std::string mode = "full";
  std::size_t restarts = 16;
  std::uint64_t seed = 0;
  double min_support = 0.02;
  bool strict = false;
  std::string out;
  std::string sense = "max";  // export-lp only
};

struct SimulateArgs {
  std::string topology = "fig6";
  std::string graph;
  std::size_t confounder_size = 100;
  std::size_t exogenous_size = 8;
  std::uint64_t seed = 0;
  std::size_t n = 10000;
  std::string out_dir = ".";
  bool truth = false;
  QueryArgs query;
};

struct PathsArgs {
  std::string graph;
  std::string through;
};

// Loaded inputs shared by bound, audit and export-lp.
struct Inputs {
  GraphFile graph;
  std::optional<DataFile> data;
  std::string data_kind;
};

inline Inputs load_inputs(const BoundArgs& a) {
  if (a.graph.empty()) throw ParseError("--graph is required");
  if (a.data.empty() == a.dist.empty()) throw ParseError("exactly one of --data and --dist is required");
  Inputs in{load_graph(a.graph), std::nullopt, ""};
  if (!a.data.empty()) {
    in.data = load_csv_distribution(a.data, in.graph.graph);
    in.data_kind = "csv";
  } else {
    in.data = load_json_distribution(a.dist, in.graph.graph);
    in.data_kind = "dist";
  }
  return in;
}

struct Contrast {
  std::size_t s0 = 0, s1 = 1, y = 0;
};

inline Contrast resolve_contrast(const CausalGraph& g, const QueryArgs& q) {
  const std::size_t s = g.protected_index(), d = g.decision_index();
  Contrast c;
  c.s0 = q.s0.empty() ? 0 : g.label_index(s, q.s0);
  c.s1 = q.s1.empty() ? 1 : g.label_index(s, q.s1);
  c.y = q.y.empty() ? 0 : g.label_index(d, q.y);
  return c;
}

inline NotionSpec notion_from_args(const QueryArgs& q, const CausalGraph& g) {
  NotionSpec n;
  n.kind = parse_notion(q.notion.empty() ? "total-effect" : q.notion);
  n.redlining = split_names(q.redlining);
  n.unconditioned = q.unconditioned;
  if (q.error_rate_paths == "direct")
    n.error_rate_paths = ErrorRatePaths::Direct;
  else if (q.error_rate_paths == "indirect")
    n.error_rate_paths = ErrorRatePaths::Indirect;
  else if (!q.error_rate_paths.empty())
    throw ParseError("--error-rate-paths must be 'direct' or 'indirect'");
  (void)g;
  return n;
}

// Canonical enumeration of assignments to `vars` (first variable most significant).
template <typename Fn>
void for_each_condition(const CausalGraph& g, const std::vector<std::size_t>& vars, Fn&& fn) {
  std::size_t total = 1;
  for (std::size_t v : vars) total *= g.domain_size(v);
  PartialAssignment cell(vars.size());
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t k = vars.size(); k-- > 0;) {
      cell[k] = {vars[k], rest % g.domain_size(vars[k])};
      rest /= g.domain_size(vars[k]);
    }
    fn(i, cell);
  }
}

struct ResolvedQuery {
  PceQuery query;
  std::string notion;  // empty for an explicit --pi query
  bool auto_condition = false;
};

// Query for `bound`. Individual-level notions without a full profile fall back
// to the first supported cell of the missing variables.
inline ResolvedQuery resolve_bound_query(const QueryArgs& q, const CausalGraph& g,
                                         const ObservationalDistribution& obs, double min_support) {
  Contrast c = resolve_contrast(g, q);
  ResolvedQuery out;
  PartialAssignment given = make_condition(g, parse_key_values(q.condition));
  if (!q.pi.empty()) {
    if (!q.notion.empty()) throw ParseError("use either --notion or --pi, not both");
    out.query.s0 = c.s0;
    out.query.s1 = c.s1;
    out.query.y_target = c.y;
    out.query.condition = given;
    out.query.pi = parse_path_set(q.pi, g);
    check_query(g, out.query);
    return out;
  }
  NotionSpec notion = notion_from_args(q, g);
  out.notion = to_string(notion.kind);
  notion.individual = given;
  std::vector<std::size_t> missing;
  for (std::size_t v : condition_variables(notion, g)) {
    bool have = std::any_of(given.begin(), given.end(), [&](const auto& kv) { return kv.first == v; });
    if (!have && v != g.protected_index()) missing.push_back(v);
  }
  if (!missing.empty()) {
    std::optional<PartialAssignment> chosen;
    for_each_condition(g, missing, [&](std::size_t, const PartialAssignment& cell) {
      if (chosen) return;
      NotionSpec trial = notion;
      trial.individual.insert(trial.individual.end(), cell.begin(), cell.end());
      std::sort(trial.individual.begin(), trial.individual.end());
      PceQuery candidate = notion_to_query(trial, g, c.s0, c.s1, c.y);
      if (obs.marginal(g, candidate.condition) >= min_support) chosen = trial.individual;
    });
    if (!chosen) throw ZeroConditionError("no condition cell reaches the minimum support");
    notion.individual = *chosen;
    out.auto_condition = true;
  }
  out.query = notion_to_query(notion, g, c.s0, c.s1, c.y);
  return out;
}

inline BoundMode parse_mode(const std::string& m) {
  if (m == "full") return BoundMode::FullJoint;
  if (m == "factored") return BoundMode::Factored;
  if (m == "both") return BoundMode::Both;
  throw ParseError("--mode must be full, factored or both");
}

inline BoundOptions bound_options(const BoundArgs& a) {
  BoundOptions o;
  o.mode = parse_mode(a.mode);
  o.restarts = a.restarts;
  o.seed = a.seed;
  return o;
}

namespace detail {

inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json diagnostics_json(const LpSolution& s) {
  const auto& d = s.diagnostics;
  return Json{{"status", to_string(s.status)},
              {"iterations", d.iterations},
              {"phase1_iterations", d.phase1_iterations},
              {"redundant_rows", d.redundant_rows},
              {"bland", d.bland},
              {"columns", d.columns},
              {"rows", d.rows},
              {"presolved_columns", d.presolved_columns},
              {"presolved_rows", d.presolved_rows},
              {"residual", number(d.residual)}};
}

inline Json restart_values(const FactoredSolution& s) {
  Json arr = Json::array();
  for (double v : s.restart_values) arr.push_back(number(v));
  return arr;
}

inline Json condition_json(const CausalGraph& g, const PartialAssignment& cond) {
  Json j = Json::object();
  for (const auto& [v, x] : cond) j[g.name(v)] = g.label(v, x);
  return j;
}

}  // namespace detail

inline Json config_json(const BoundArgs& a, const BoundOptions& o) {
  const auto& s = o.solver;
  return Json{{"mode", to_string(o.mode)},
              {"tau", a.tau},
              {"restarts", o.restarts},
              {"seed", o.seed},
              {"min_support", a.min_support},
              {"profile_cap", o.program.profile_cap},
              {"response_cap", o.response_cap},
              {"tolerances",
               {{"feasibility", s.simplex.feasibility},
                {"optimality", s.simplex.optimality},
                {"pivot", s.simplex.pivot},
                {"bland_factor", s.simplex.bland_factor},
                {"witness", s.witness_tolerance},
                {"improvement", s.improvement},
                {"max_sweeps", s.max_sweeps},
                {"start_vertices", s.start_vertices}}}};
}

inline Json inputs_json(const Inputs& in) {
  return Json{{"graph", {{"sha256", in.graph.digest}}}, {"data", {{"kind", in.data_kind}, {"sha256", in.data->digest}}}};
}

inline Json query_json(const CausalGraph& g, const ResolvedQuery& rq) {
  const auto& q = rq.query;
  return Json{{"notion", rq.notion.empty() ? Json(nullptr) : Json(rq.notion)},
              {"protected", g.name(g.protected_index())},
              {"decision", g.name(g.decision_index())},
              {"s0", g.label(g.protected_index(), q.s0)},
              {"s1", g.label(g.protected_index(), q.s1)},
              {"y", g.label(g.decision_index(), q.y_target)},
              {"condition", detail::condition_json(g, q.condition)},
              {"condition_chosen_by_support", rq.auto_condition},
              {"pi", path_set_to_json(g, q.pi)}};
}

// The per-query part of a report; no timestamps, no paths, no thread counts.
inline Json run_report(const Inputs& in, const ResolvedQuery& rq, const BoundsResult& b, const BoundArgs& a,
                       const BoundOptions& o) {
  const CausalGraph& g = in.graph.graph;
  Json r;
  r["schema"] = kSchemaVersion;
  r["tool"] = {{"name", "pcbound"}, {"version", PCBOUND_VERSION}};
  r["inputs"] = inputs_json(in);
  r["query"] = query_json(g, rq);
  r["condition_mass"] = b.full.condition_mass;
  Json active = Json::array();
  for (std::size_t v : b.full.active.variables) active.push_back(g.name(v));
  r["full"] = {{"lb", detail::number(b.full.lb)},
               {"ub", detail::number(b.full.ub)},
               {"columns", b.full.columns},
               {"reduced", b.full.reduced},
               {"active", std::move(active)}};
  if (b.factored) {
    const auto& f = *b.factored;
    r["factored"] = {{"lb", detail::number(f.lb)},
                     {"ub", detail::number(f.ub)},
                     {"one_sided", true},
                     {"restarts", f.restarts},
                     {"seed", f.seed},
                     {"lower_restart_values", detail::restart_values(f.lower)},
                     {"upper_restart_values", detail::restart_values(f.upper)}};
  } else {
    r["factored"] = nullptr;
  }
  if (b.feasible()) {
    Verdict v = verdict(b, a.tau);
    r["verdict"] = {{"result", to_string(v.kind)}, {"tau", v.tau}};
  } else {
    r["verdict"] = {{"result", "infeasible"}, {"tau", a.tau}};
  }
  Json diag;
  diag["lower"] = detail::diagnostics_json(b.full.lower);
  diag["upper"] = detail::diagnostics_json(b.full.upper);
  if (b.factored)
    diag["factored"] = {{"lower_sweeps", b.factored->lower.sweeps},
                        {"upper_sweeps", b.factored->upper.sweeps},
                        {"lower_best_restart", b.factored->lower.best_restart},
                        {"upper_best_restart", b.factored->upper.best_restart},
                        {"lower_residual", detail::number(b.factored->lower.residual)},
                        {"upper_residual", detail::number(b.factored->upper.residual)}};
  r["diagnostics"] = std::move(diag);
  r["config"] = config_json(a, o);
  return r;
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file(path, text);
}

inline int cmd_bound(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  Inputs in = load_inputs(a);
  const CausalGraph& g = in.graph.graph;
  ResolvedQuery rq = resolve_bound_query(a.query, g, in.data->distribution, a.min_support);
  BoundOptions o = bound_options(a);
  BoundsResult b = bound_pce(g, in.data->distribution, rq.query, o);
  Json report = run_report(in, rq, b, a, o);
  emit(report.dump(2) + "\n", a.out, out);
  if (!b.feasible()) {
    err << "error: the data are inconsistent with the graph (bounding program infeasible)\n";
    return kExitError;
  }
  if (a.strict && verdict(b, a.tau).kind == VerdictKind::Uncertain) return kExitUncertain;
  return kExitOk;
}

inline int cmd_audit(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  Inputs in = load_inputs(a);
  const CausalGraph& g = in.graph.graph;
  const auto& obs = in.data->distribution;
  Contrast c = resolve_contrast(g, a.query);
  PathSet pi;
  std::string notion_name;
  std::vector<std::size_t> vars;
  if (!a.query.pi.empty()) {
    if (!a.query.notion.empty()) throw ParseError("use either --notion or --pi, not both");
    pi = parse_path_set(a.query.pi, g);
  } else {
    NotionSpec notion = notion_from_args(a.query, g);
    notion_name = to_string(notion.kind);
    pi = notion_paths(notion, g);
    vars = condition_variables(notion, g);
  }
  if (!a.query.condition.empty()) {
    vars.clear();
    for (const auto& name : split_names(a.query.condition)) vars.push_back(g.index_of(name));
    std::sort(vars.begin(), vars.end());
    if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
      throw ConditionError("--condition names a variable twice");
  }

  std::vector<PartialAssignment> cells;
  for_each_condition(g, vars, [&](std::size_t, const PartialAssignment& cell) {
    if (obs.marginal(g, cell) >= a.min_support) cells.push_back(cell);
  });
  BoundOptions o = bound_options(a);
  std::vector<Json> reports(cells.size());
  std::vector<BoundsResult> results(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    ResolvedQuery rq;
    rq.notion = notion_name;
    rq.query.s0 = c.s0;
    rq.query.s1 = c.s1;
    rq.query.y_target = c.y;
    rq.query.condition = cells[i];
    rq.query.pi = pi;
    results[i] = bound_pce(g, obs, rq.query, o);
    reports[i] = run_report(in, rq, results[i], a, o);
  });

  std::size_t fair = 0, unfair = 0, uncertain = 0, infeasible = 0;
  for (const auto& b : results) {
    if (!b.feasible()) {
      ++infeasible;
      continue;
    }
    switch (verdict(b, a.tau).kind) {
      case VerdictKind::Fair: ++fair; break;
      case VerdictKind::Unfair: ++unfair; break;
      case VerdictKind::Uncertain: ++uncertain; break;
    }
  }
  Json doc;
  doc["schema"] = kSchemaVersion;
  doc["tool"] = {{"name", "pcbound"}, {"version", PCBOUND_VERSION}};
  doc["inputs"] = inputs_json(in);
  Json names = Json::array();
  for (std::size_t v : vars) names.push_back(g.name(v));
  doc["condition_variables"] = std::move(names);
  doc["reports"] = Json::array();
  for (auto& r : reports) doc["reports"].push_back(std::move(r));
  doc["summary"] = {{"fair", fair},
                    {"unfair", unfair},
                    {"uncertain", uncertain},
                    {"infeasible", infeasible},
                    {"total", cells.size()}};
  doc["warnings"] = Json::array();
  if (cells.empty()) {
    doc["warnings"].push_back("no condition cell reaches the minimum support");
    err << "warning: no condition cell reaches the minimum support " << a.min_support << "\n";
  }
  doc["config"] = config_json(a, o);
  emit(doc.dump(2) + "\n", a.out, out);
  if (infeasible > 0) {
    err << "error: the data are inconsistent with the graph (bounding program infeasible)\n";
    return kExitError;
  }
  if (a.strict && uncertain > 0) return kExitUncertain;
  return kExitOk;
}

inline int cmd_paths(const PathsArgs& a, std::ostream& out) {
  if (a.graph.empty()) throw ParseError("--graph is required");
  GraphFile gf = load_graph(a.graph);
  const CausalGraph& g = gf.graph;
  PathSet all = enumerate_causal_paths(g);
  auto index_list = [&](const PathSet& subset) {
    std::string s;
    for (const auto& p : subset.paths) {
      auto idx = std::find(all.paths.begin(), all.paths.end(), p) - all.paths.begin();
      s += " " + std::to_string(idx);
    }
    return s;
  };
  out << "paths " << all.size() << "\n";
  for (std::size_t i = 0; i < all.size(); ++i) out << i << "\t" << path_to_string(g, all.paths[i]) << "\n";
  if (g.has_edge(g.protected_index(), g.decision_index()))
    out << "direct:" << index_list(direct_paths(g)) << "\n";
  else
    out << "direct: none\n";
  if (!a.through.empty()) {
    PathSet through = redlining_paths(g, split_names(a.through));
    out << "through " << a.through << ": " << through.size() << "\n";
    for (const auto& p : through.paths) out << "\t" << path_to_string(g, p) << "\n";
  }
  return kExitOk;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  GeneratorSpec spec;
  spec.topology = a.topology;
  spec.confounder_size = a.confounder_size;
  spec.exogenous_size = a.exogenous_size;
  spec.seed = a.seed;
  if (!a.graph.empty()) {
    spec.topology = "custom";
    spec.graph = graph_decl_from_json(parse_json(read_file(a.graph), a.graph), a.graph);
  }
  OracleScm scm = generate_model(spec);
  const CausalGraph& g = scm.graph();
  std::filesystem::create_directories(a.out_dir);
  const std::string scm_path = (std::filesystem::path(a.out_dir) / "scm.json").string();
  const std::string data_path = (std::filesystem::path(a.out_dir) / "data.csv").string();
  write_file(scm_path, oracle_to_json(scm).dump(2) + "\n");
  write_file(data_path, records_to_csv(g, sample_dataset(scm, a.n, a.seed)));
  out << scm_path << "\n" << data_path << "\n";
  if (a.truth) {
    ObservationalDistribution exact = model_to_distribution(scm);
    ResolvedQuery rq = resolve_bound_query(a.query, g, exact, 0.0);
    GroundTruth t = ground_truth_pce(scm, rq.query);
    Json j;
    j["schema"] = kSchemaVersion;
    j["query"] = query_json(g, rq);
    j["value"] = t.value;
    j["p_treated"] = t.p_treated;
    j["p_reference"] = t.p_reference;
    j["p_condition"] = t.p_condition;
    const std::string truth_path = (std::filesystem::path(a.out_dir) / "truth.json").string();
    write_file(truth_path, j.dump(2) + "\n");
    out << truth_path << "\n";
  }
  return kExitOk;
}

inline int cmd_export_lp(const BoundArgs& a, std::ostream& out) {
  Inputs in = load_inputs(a);
  const CausalGraph& g = in.graph.graph;
  ResolvedQuery rq = resolve_bound_query(a.query, g, in.data->distribution, a.min_support);
  if (a.sense != "min" && a.sense != "max") throw ParseError("--sense must be min or max");
  ResponseModel tables(g);
  BoundProgram prog = build_full_joint(g, in.data->distribution, rq.query, tables);
  emit(export_lp(prog, a.sense == "max" ? Sense::Maximize : Sense::Minimize), a.out, out);
  return kExitOk;
}

namespace detail {

inline void add_query_flags(CLI::App* cmd, QueryArgs& q, bool condition_names = false) {
  cmd->add_option("--notion", q.notion, "fairness notion (total-effect, direct, indirect, individual-direct, "
                                        "group-direct, counterfactual, counterfactual-error-rate, individual-indirect)");
  cmd->add_option("--pi", q.pi, "path set: [] | [[\"S\",\"Y\"],...] | all | direct | {\"through\":[...]}");
  cmd->add_option("--redlining", q.redlining, "redlining attributes, comma separated");
  cmd->add_option("--s0", q.s0, "reference protected label (default: first label)");
  cmd->add_option("--s1", q.s1, "treated protected label (default: second label)");
  cmd->add_option("--y", q.y, "decision label (default: first label, the positive decision)");
  cmd->add_option("--condition", q.condition,
                  condition_names ? "condition variables to enumerate, comma separated" : "condition name=label,...");
  cmd->add_option("--error-rate-paths", q.error_rate_paths, "direct or indirect (counterfactual-error-rate)");
  cmd->add_flag("--unconditioned", q.unconditioned, "use O = {} instead of O = {S = s0} for direct/indirect");
}

inline void add_bound_flags(CLI::App* cmd, BoundArgs& a, bool condition_names = false) {
  cmd->add_option("--graph", a.graph, "graph JSON")->required();
  cmd->add_option("--data", a.data, "CSV data with a header row");
  cmd->add_option("--dist", a.dist, "joint distribution JSON");
  add_query_flags(cmd, a.query, condition_names);
  cmd->add_option("--tau", a.tau, "fairness threshold")->capture_default_str();
  cmd->add_option("--mode", a.mode, "full | factored | both")->capture_default_str();
  cmd->add_option("--restarts", a.restarts, "factored-mode restarts")->capture_default_str();
  cmd->add_option("--seed", a.seed, "factored-mode seed")->capture_default_str();
  cmd->add_option("--min-support", a.min_support, "minimum P(o) for a condition cell")->capture_default_str();
  cmd->add_flag("--strict", a.strict, "exit 2 when a verdict is uncertain");
  cmd->add_option("--out", a.out, "output file (default: standard output)");
}

}  // namespace detail

// Entry point shared by the executable and the integration tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounds on path-specific counterfactual fairness from observational data", "pcbound"};
  app.set_version_flag("--version", PCBOUND_VERSION);
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (default: PCBOUND_THREADS or all cores)");

  BoundArgs bound_args, audit_args, export_args;
  SimulateArgs sim_args;
  PathsArgs path_args;
  auto* bound = app.add_subcommand("bound", "bound one query and report a verdict");
  detail::add_bound_flags(bound, bound_args);
  auto* audit = app.add_subcommand("audit", "bound every supported condition cell");
  detail::add_bound_flags(audit, audit_args, true);
  auto* paths = app.add_subcommand("paths", "list causal paths from the protected attribute to the decision");
  paths->add_option("--graph", path_args.graph, "graph JSON")->required();
  paths->add_option("--through", path_args.through, "redlining attributes, comma separated");
  auto* simulate = app.add_subcommand("simulate", "generate a random model and a sample");
  simulate->add_option("--topology", sim_args.topology, "bow | kite | w | fig6 | fig6-markovian")
      ->capture_default_str();
  simulate->add_option("--graph", sim_args.graph, "custom graph JSON (overrides --topology)");
  simulate->add_option("--confounder-size", sim_args.confounder_size, "size of shared exogenous blocks")
      ->capture_default_str();
  simulate->add_option("--exogenous-size", sim_args.exogenous_size, "size of unshared exogenous blocks")
      ->capture_default_str();
  simulate->add_option("--seed", sim_args.seed, "generator and sampling seed")->capture_default_str();
  simulate->add_option("-n", sim_args.n, "records to sample")->capture_default_str();
  simulate->add_option("--out-dir", sim_args.out_dir, "output directory")->capture_default_str();
  simulate->add_flag("--truth", sim_args.truth, "also write the exact effect for the query flags");
  detail::add_query_flags(simulate, sim_args.query);
  auto* export_cmd = app.add_subcommand("export-lp", "write the full-joint program in LP format");
  detail::add_bound_flags(export_cmd, export_args);
  export_cmd->add_option("--sense", export_args.sense, "min or max")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitError;
  }
  if (threads > 0) set_worker_threads(threads);
  try {
    if (*bound) return cmd_bound(bound_args, out, err);
    if (*audit) return cmd_audit(audit_args, out, err);
    if (*paths) return cmd_paths(path_args, out);
    if (*simulate) return cmd_simulate(sim_args, out);
    if (*export_cmd) return cmd_export_lp(export_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace pcbound::cli
