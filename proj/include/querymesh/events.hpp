#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "querymesh/error.hpp"
#include "querymesh/text.hpp"

namespace querymesh {

enum class EventKind { kQuery, kClick };

inline const char* to_string(EventKind k) {
  return k == EventKind::kQuery ? "query" : "click";
}

// One log line: a query submission or a click on a result title.
struct RawEvent {
  std::string user_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  EventKind kind = EventKind::kQuery;
  std::string text;  // normalized query text or clicked title
};

struct EventParseStats {
  std::int64_t lines = 0;
  std::int64_t malformed = 0;  // wrong field count, bad timestamp, bad kind, empty text
};

// Tab-separated input, one event per line: user_id, timestamp, kind, text.
// Malformed lines are dropped and counted, not fatal.
inline std::vector<RawEvent> parse_events(std::istream& in, EventParseStats* stats = nullptr) {
  std::vector<RawEvent> events;
  EventParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;
    auto fields = text::split_on(line, '\t');
    if (fields.size() != 4) {
      ++local.malformed;
      continue;
    }
    RawEvent ev;
    ev.user_id = fields[0];
    try {
      size_t pos = 0;
      ev.timestamp = std::stoll(fields[1], &pos);
      if (pos != fields[1].size() || ev.timestamp < 0) throw std::invalid_argument("ts");
    } catch (const std::exception&) {
      ++local.malformed;
      continue;
    }
    if (fields[2] == "query") {
      ev.kind = EventKind::kQuery;
    } else if (fields[2] == "click") {
      ev.kind = EventKind::kClick;
    } else {
      ++local.malformed;
      continue;
    }
    ev.text = text::normalize(fields[3]);
    if (ev.text.empty()) {
      ++local.malformed;
      continue;
    }
    events.push_back(std::move(ev));
  }
  if (stats) *stats = local;
  return events;
}

inline void write_event(std::ostream& out, const RawEvent& ev) {
  out << ev.user_id << '\t' << ev.timestamp << '\t' << to_string(ev.kind) << '\t' << ev.text
      << '\n';
}

}  // namespace querymesh
