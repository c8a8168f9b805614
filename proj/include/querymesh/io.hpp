#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "querymesh/error.hpp"
#include "querymesh/hypothesis.hpp"
#include "querymesh/session.hpp"

namespace querymesh::io {

using nlohmann::json;

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open input file: " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot open output file: " + path.string());
  return out;
}

inline json session_to_json(const SessionRecord& s) {
  json j;
  j["session_id"] = s.session_id;
  json xs = json::array();
  for (const auto& it : s.interactions) {
    xs.push_back({{"query", it.query}, {"clicks", it.clicks}, {"time", it.query_time}});
  }
  j["interactions"] = std::move(xs);
  if (!s.ground_truth.empty()) j["ground_truth"] = s.ground_truth;
  return j;
}

inline SessionRecord session_from_json(const json& j) {
  SessionRecord s;
  s.session_id = j.at("session_id").get<std::string>();
  for (const auto& x : j.at("interactions")) {
    Interaction it;
    it.query = x.at("query").get<std::string>();
    it.clicks = x.at("clicks").get<std::vector<std::string>>();
    it.query_time = x.at("time").get<std::int64_t>();
    s.interactions.push_back(std::move(it));
  }
  if (j.contains("ground_truth")) s.ground_truth = j.at("ground_truth").get<std::string>();
  return s;
}

// One session per line.
inline void write_sessions(std::ostream& out, const std::vector<SessionRecord>& sessions) {
  for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
}

inline std::vector<SessionRecord> read_sessions(std::istream& in) {
  std::vector<SessionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(session_from_json(json::parse(line)));
  }
  return out;
}

inline std::vector<SessionRecord> read_sessions_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_sessions(in);
}

inline json hypothesis_to_json(const Hypothesis& h) {
  json items = json::array();
  for (const auto& it : h.items)
    items.push_back({{"text", it.text}, {"kind", it.kind == ItemKind::kQuery ? "query" : "title"}});
  return {{"kind", to_string(h.kind)}, {"items", std::move(items)}};
}

// Sorted key=value report, one per line.
inline void write_kv(std::ostream& out, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

}  // namespace querymesh::io
