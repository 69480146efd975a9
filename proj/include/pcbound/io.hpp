#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/fairness.hpp"
#include "pcbound/model.hpp"

namespace pcbound {

using Json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot write file");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline Json parse_json(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

namespace detail {

template <typename T>
T json_get(const Json& j, const char* key, const std::string& source) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(source + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(source + ": field '" + key + "': " + e.what());
  }
}

inline std::pair<std::string, std::string> name_pair(const Json& j, const std::string& source) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
    throw ParseError(source + ": edges must be pairs of variable names");
  return {j[0].get<std::string>(), j[1].get<std::string>()};
}

// Flattens nested arrays [parent_1]...[parent_k][u] into canonical order.
inline void flatten_table(const Json& j, std::size_t depth, const std::vector<std::size_t>& dims,
                          const CausalGraph& g, std::size_t v, std::vector<std::size_t>& out,
                          const std::string& source) {
  if (!j.is_array() || j.size() != dims[depth])
    throw ParseError(source + ": truth table of '" + g.name(v) + "' has the wrong shape");
  for (const auto& item : j) {
    if (depth + 1 < dims.size()) {
      flatten_table(item, depth + 1, dims, g, v, out, source);
    } else if (item.is_number_unsigned()) {
      out.push_back(item.get<std::size_t>());
    } else if (item.is_string()) {
      out.push_back(g.label_index(v, item.get<std::string>()));
    } else {
      throw ParseError(source + ": truth table of '" + g.name(v) + "' must hold value indices or labels");
    }
  }
}

inline Json nest_table(const OracleScm& scm, std::size_t v) {
  const CausalGraph& g = scm.graph();
  std::vector<std::size_t> dims;
  for (std::size_t p : g.parents(v)) dims.push_back(g.domain_size(p));
  dims.push_back(scm.blocks()[scm.wiring()[v]].size());
  const auto& flat = scm.functions()[v];
  std::size_t pos = 0;
  auto build = [&](auto&& self, std::size_t depth) -> Json {
    Json arr = Json::array();
    for (std::size_t i = 0; i < dims[depth]; ++i) arr.push_back(depth + 1 < dims.size() ? self(self, depth + 1) : Json(flat[pos++]));
    return arr;
  };
  return build(build, 0);
}

}  // namespace detail

inline GraphDecl graph_decl_from_json(const Json& j, const std::string& source) {
  GraphDecl d;
  for (const auto& var : detail::json_get<Json>(j, "variables", source)) {
    VariableSpec spec;
    spec.name = detail::json_get<std::string>(var, "name", source);
    spec.domain = detail::json_get<std::vector<std::string>>(var, "domain", source);
    d.variables.push_back(std::move(spec));
  }
  if (j.contains("edges"))
    for (const auto& e : j.at("edges")) d.directed_edges.push_back(detail::name_pair(e, source));
  if (j.contains("confounded"))
    for (const auto& e : j.at("confounded")) d.bidirected_edges.push_back(detail::name_pair(e, source));
  d.protected_attr = detail::json_get<std::string>(j, "protected", source);
  d.decision = detail::json_get<std::string>(j, "decision", source);
  if (j.contains("outcome") && !j.at("outcome").is_null()) d.outcome = detail::json_get<std::string>(j, "outcome", source);
  return d;
}

inline Json graph_decl_to_json(const GraphDecl& d) {
  Json j;
  j["variables"] = Json::array();
  for (const auto& v : d.variables) j["variables"].push_back({{"name", v.name}, {"domain", v.domain}});
  j["edges"] = Json::array();
  for (const auto& [a, b] : d.directed_edges) j["edges"].push_back({a, b});
  j["confounded"] = Json::array();
  for (const auto& [a, b] : d.bidirected_edges) j["confounded"].push_back({a, b});
  j["protected"] = d.protected_attr;
  j["decision"] = d.decision;
  if (d.outcome) j["outcome"] = *d.outcome;
  return j;
}

inline std::optional<OracleScm> oracle_from_json(const Json& j, const CausalGraph& g, const std::string& source) {
  if (!j.contains("oracle") || j.at("oracle").is_null()) return std::nullopt;
  const Json& o = j.at("oracle");
  std::vector<ExogenousBlock> blocks;
  std::map<std::string, std::size_t> block_index;
  for (const auto& b : detail::json_get<Json>(o, "blocks", source)) {
    ExogenousBlock block;
    block.id = detail::json_get<std::string>(b, "id", source);
    block.probabilities = detail::json_get<std::vector<double>>(b, "probabilities", source);
    if (b.contains("size") && b.at("size").get<std::size_t>() != block.probabilities.size())
      throw ParseError(source + ": block '" + block.id + "' size does not match its probabilities");
    if (!block_index.emplace(block.id, blocks.size()).second)
      throw ParseError(source + ": block '" + block.id + "' declared twice");
    blocks.push_back(std::move(block));
  }
  const Json& wiring_json = detail::json_get<Json>(o, "wiring", source);
  const Json& functions_json = detail::json_get<Json>(o, "functions", source);
  std::vector<std::size_t> wiring(g.size());
  std::vector<std::vector<std::size_t>> functions(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::string& name = g.name(v);
    auto id = detail::json_get<std::string>(wiring_json, name.c_str(), source);
    auto it = block_index.find(id);
    if (it == block_index.end()) throw ParseError(source + ": '" + name + "' is wired to unknown block '" + id + "'");
    wiring[v] = it->second;
    std::vector<std::size_t> dims;
    for (std::size_t p : g.parents(v)) dims.push_back(g.domain_size(p));
    dims.push_back(blocks[wiring[v]].size());
    detail::flatten_table(detail::json_get<Json>(functions_json, name.c_str(), source), 0, dims, g, v, functions[v],
                          source);
  }
  return OracleScm(g, std::move(blocks), std::move(wiring), std::move(functions));
}

inline Json oracle_to_json(const OracleScm& scm) {
  Json j = graph_decl_to_json(scm.graph().decl());
  Json o;
  o["blocks"] = Json::array();
  for (const auto& b : scm.blocks())
    o["blocks"].push_back({{"id", b.id}, {"size", b.size()}, {"probabilities", b.probabilities}});
  const CausalGraph& g = scm.graph();
  for (std::size_t v = 0; v < g.size(); ++v) o["wiring"][g.name(v)] = scm.blocks()[scm.wiring()[v]].id;
  for (std::size_t v = 0; v < g.size(); ++v) o["functions"][g.name(v)] = detail::nest_table(scm, v);
  j["oracle"] = std::move(o);
  return j;
}

struct GraphFile {
  CausalGraph graph;
  std::optional<OracleScm> oracle;
  std::string digest;
};

inline GraphFile load_graph(const std::string& path) {
  std::string text = read_file(path);
  Json j = parse_json(text, path);
  try {
    CausalGraph g(graph_decl_from_json(j, path));
    auto oracle = oracle_from_json(j, g, path);
    return GraphFile{std::move(g), std::move(oracle), sha256_hex(text)};
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

// Splits one CSV line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

}  // namespace detail

// Label records in the graph's declaration order. Columns may appear in any order.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text, const CausalGraph& g,
                                                       const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> column_var;
  bool header = false;
  std::vector<std::vector<std::string>> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (!header) {
      header = true;
      std::vector<bool> seen(g.size(), false);
      for (const auto& name : fields) {
        auto v = g.find(name);
        if (!v) throw ParseError(where + "unknown column '" + name + "'");
        if (seen[*v]) throw ParseError(where + "column '" + name + "' appears twice");
        seen[*v] = true;
        column_var.push_back(*v);
      }
      for (std::size_t v = 0; v < g.size(); ++v)
        if (!seen[v]) throw ParseError(where + "missing column '" + g.name(v) + "'");
      continue;
    }
    if (fields.size() != column_var.size())
      throw UnknownLabelError(records.size(), where + "expected " + std::to_string(column_var.size()) +
                                                  " fields, got " + std::to_string(fields.size()));
    std::vector<std::string> rec(g.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      std::size_t v = column_var[k];
      if (!g.find_label(v, fields[k]))
        throw UnknownLabelError(records.size(), where + "'" + fields[k] + "' is not a label of '" + g.name(v) + "'");
      rec[v] = std::move(fields[k]);
    }
    records.push_back(std::move(rec));
  }
  if (!header) throw EmptyDataError(source + ": no header row");
  if (records.empty()) throw EmptyDataError(source + ": no records");
  return records;
}

inline std::string records_to_csv(const CausalGraph& g, const std::vector<Assignment>& records) {
  std::string out;
  for (std::size_t v = 0; v < g.size(); ++v) out += (v ? "," : "") + g.name(v);
  out += '\n';
  for (const auto& rec : records) {
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (v) out += ',';
      out += g.label(v, rec[v]);
    }
    out += '\n';
  }
  return out;
}

// Joint table JSON: {"cells": [{"assignment": {name: label}, "p": x}, ...]}
// or {"probabilities": [...]} dense in canonical cell order.
inline ObservationalDistribution distribution_from_json(const Json& j, const CausalGraph& g,
                                                        const std::string& source) {
  if (j.contains("probabilities")) {
    auto table = detail::json_get<std::vector<double>>(j, "probabilities", source);
    if (table.size() != g.cell_count())
      throw ParseError(source + ": expected " + std::to_string(g.cell_count()) + " probabilities, got " +
                       std::to_string(table.size()));
    return ObservationalDistribution::from_dense(table);
  }
  std::map<std::size_t, double> cells;
  for (const auto& c : detail::json_get<Json>(j, "cells", source)) {
    const Json& a = detail::json_get<Json>(c, "assignment", source);
    Assignment values(g.size());
    for (std::size_t v = 0; v < g.size(); ++v)
      values[v] = g.label_index(v, detail::json_get<std::string>(a, g.name(v).c_str(), source));
    if (a.size() != g.size()) throw ParseError(source + ": cell assignments must name exactly the graph variables");
    double p = detail::json_get<double>(c, "p", source);
    if (!cells.emplace(g.encode(values), p).second) throw ParseError(source + ": cell listed twice");
  }
  return ObservationalDistribution(g.cell_count(), std::move(cells));
}

inline Json distribution_to_json(const ObservationalDistribution& obs, const CausalGraph& g) {
  Json j;
  j["cells"] = Json::array();
  for (const auto& [cell, p] : obs.cells()) {
    Json a = Json::object();
    for (std::size_t v = 0; v < g.size(); ++v) a[g.name(v)] = g.label(v, g.value_in_cell(cell, v));
    j["cells"].push_back({{"assignment", std::move(a)}, {"p", p}});
  }
  return j;
}

struct DataFile {
  ObservationalDistribution distribution;
  std::string digest;
};

inline DataFile load_csv_distribution(const std::string& path, const CausalGraph& g) {
  std::string text = read_file(path);
  return DataFile{empirical_distribution(parse_csv(text, g, path), g), sha256_hex(text)};
}

inline DataFile load_json_distribution(const std::string& path, const CausalGraph& g) {
  std::string text = read_file(path);
  try {
    return DataFile{distribution_from_json(parse_json(text, path), g, path), sha256_hex(text)};
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace detail {

inline Path path_from_json(const Json& item, const CausalGraph& g) {
  Path p;
  if (item.is_string()) {
    std::string s = item.get<std::string>();
    std::size_t start = 0;
    for (;;) {
      std::size_t arrow = s.find("->", start);
      p.push_back(g.index_of(trim(std::string_view(s).substr(start, arrow - start))));
      if (arrow == std::string::npos) break;
      start = arrow + 2;
    }
  } else if (item.is_array()) {
    for (const auto& name : item) {
      if (!name.is_string()) throw ParseError("path entries must be variable names");
      p.push_back(g.index_of(name.get<std::string>()));
    }
  } else {
    throw ParseError("a path is an array of names or an 'A->B' string");
  }
  return p;
}

}  // namespace detail

// Path-set syntax: [] | [["S","W","Y"], "S->Y", ...] | "all" | "direct" | {"through": [attrs]}.
// A bare word other than all/direct is read as a JSON string.
inline PathSet parse_path_set(std::string_view text, const CausalGraph& g) {
  std::string t = detail::trim(text);
  Json j;
  if (t == "all" || t == "direct")
    j = t;
  else
    j = parse_json(t, "--pi");
  PathSet out;
  if (j.is_string()) {
    std::string word = j.get<std::string>();
    if (word == "all") return enumerate_causal_paths(g);
    if (word == "direct") return direct_paths(g);
    out.paths.push_back(detail::path_from_json(j, g));
  } else if (j.is_array()) {
    for (const auto& item : j) out.paths.push_back(detail::path_from_json(item, g));
  } else if (j.is_object() && j.contains("through")) {
    return redlining_paths(g, j.at("through").get<std::vector<std::string>>());
  } else {
    throw ParseError("--pi: expected [], a list of paths, \"all\", \"direct\" or {\"through\": [...]}");
  }
  check_path_set(g, out);
  return out;
}

inline Json path_set_to_json(const CausalGraph& g, const PathSet& pi) {
  Json arr = Json::array();
  for (const auto& p : pi.paths) {
    Json names = Json::array();
    for (std::size_t v : p) names.push_back(g.name(v));
    arr.push_back(std::move(names));
  }
  return arr;
}

// "k=v,k=v" into (name, label) pairs.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string s = detail::trim(text);
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = s.find(',', start);
    std::string item = detail::trim(std::string_view(s).substr(start, comma - start));
    std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("--condition: expected name=label, got '" + item + "'");
    out.emplace_back(detail::trim(std::string_view(item).substr(0, eq)),
                     detail::trim(std::string_view(item).substr(eq + 1)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string> split_names(std::string_view text) {
  std::vector<std::string> out;
  std::string s = detail::trim(text);
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = s.find(',', start);
    out.push_back(detail::trim(std::string_view(s).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace pcbound
