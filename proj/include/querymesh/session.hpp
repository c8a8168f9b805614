#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "querymesh/error.hpp"
#include "querymesh/events.hpp"

namespace querymesh {

// One query submission and the set of titles clicked in response to it.
// Clicked titles are kept in click order, deduplicated on first occurrence.
struct Interaction {
  std::string query;
  std::vector<std::string> clicks;
  std::int64_t query_time = 0;
};

struct SessionRecord {
  std::string session_id;
  std::vector<Interaction> interactions;
  std::string ground_truth;  // non-empty only after holdout

  // Total queries in the session including a held-out ground truth.
  int query_count() const {
    return static_cast<int>(interactions.size()) + (ground_truth.empty() ? 0 : 1);
  }
  int last_query_clicks() const {
    return interactions.empty() ? 0 : static_cast<int>(interactions.back().clicks.size());
  }
  int total_clicks() const {
    int n = 0;
    for (const auto& it : interactions) n += static_cast<int>(it.clicks.size());
    return n;
  }
};

struct SegmentStats {
  std::int64_t events_in = 0;
  std::int64_t clicks_dropped_no_query = 0;  // malformed stream signal
  std::int64_t sessions_out = 0;
};

// A session is a maximal run of one user's events with every consecutive
// gap strictly below gap_seconds; a gap of gap_seconds or more splits.
// Clicks attach to the most recent query of the same session. Session ids
// are "<user_id>#<ordinal>" with ordinals starting at 1 per user.
//
// Events are re-sorted internally by a total order, so any permutation of
// the input yields identical output.
inline std::vector<SessionRecord> segment_sessions(std::vector<RawEvent> events,
                                                   std::int64_t gap_seconds,
                                                   SegmentStats* stats = nullptr) {
  require(gap_seconds > 0, "segment_sessions: gap_seconds must be positive");
  SegmentStats local;
  local.events_in = static_cast<std::int64_t>(events.size());

  std::sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    // Same-instant ordering: queries before clicks, then by text.
    if (a.kind != b.kind) return a.kind == EventKind::kQuery;
    return a.text < b.text;
  });

  std::vector<SessionRecord> sessions;
  SessionRecord current;
  int user_ordinal = 0;
  const std::string* prev_user = nullptr;
  std::int64_t prev_ts = 0;

  auto flush = [&]() {
    if (!current.interactions.empty()) {
      sessions.push_back(std::move(current));
      ++local.sessions_out;
    }
    current = SessionRecord{};
  };

  for (auto& ev : events) {
    bool new_user = prev_user == nullptr || ev.user_id != *prev_user;
    bool gap_break = !new_user && (ev.timestamp - prev_ts) >= gap_seconds;
    if (new_user) user_ordinal = 0;
    if (new_user || gap_break) {
      flush();
      ++user_ordinal;
      current.session_id = ev.user_id + "#" + std::to_string(user_ordinal);
    }
    if (ev.kind == EventKind::kQuery) {
      current.interactions.push_back(Interaction{std::move(ev.text), {}, ev.timestamp});
    } else {
      if (current.interactions.empty()) {
        ++local.clicks_dropped_no_query;
      } else {
        auto& clicks = current.interactions.back().clicks;
        if (std::find(clicks.begin(), clicks.end(), ev.text) == clicks.end()) {
          clicks.push_back(std::move(ev.text));
        }
      }
    }
    prev_user = &ev.user_id;
    prev_ts = ev.timestamp;
  }
  flush();

  if (stats) *stats = local;
  return sessions;
}

// Holds out the final query as the generation target. Clicks attached to the
// held-out query happen after the prediction point and are discarded with it.
inline SessionRecord holdout_ground_truth(const SessionRecord& session) {
  require(session.interactions.size() >= 2,
          "holdout_ground_truth: session needs at least 2 queries, got " +
              std::to_string(session.interactions.size()));
  SessionRecord out;
  out.session_id = session.session_id;
  out.interactions.assign(session.interactions.begin(), session.interactions.end() - 1);
  out.ground_truth = session.interactions.back().query;
  return out;
}

struct FilterConfig {
  int min_query_freq = 10;  // queries occurring this many times or fewer are removed
  int max_tokens = 0;       // 0 disables the length filter
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
};

struct FilterStats {
  std::int64_t sessions_in = 0;
  std::int64_t queries_removed_low_freq = 0;   // query submissions dropped
  std::int64_t sessions_removed_too_few = 0;   // under 2 queries after the frequency pass
  std::int64_t sessions_removed_overlong = 0;  // longest hypothesis tokenization > max_tokens
  std::int64_t sessions_out = 0;
};

struct CorpusSplit {
  std::vector<SessionRecord> train;
  std::vector<SessionRecord> dev;
  std::vector<SessionRecord> test;
  // Corpus frequency (counted before filtering) of every surviving query.
  std::map<std::string, std::int64_t> query_frequency;

  std::int64_t total_sessions() const {
    return static_cast<std::int64_t>(train.size() + dev.size() + test.size());
  }
};

// Longest tokenized length an encoder or decoder would see for a held-out
// session. Wired in by the caller (hypothesis builder + trained tokenizer);
// the indirection keeps this header free of tokenizer details.
using SessionLengthFn = std::function<int(const SessionRecord&)>;

// Frequency filter, singleton removal, ground-truth holdout, max-length
// filter, then a time-ordered train/dev/test split. Frequency is counted per
// submission over the whole corpus before splitting, which leaks train/test
// statistics exactly the way the source protocol does.
inline CorpusSplit apply_filters(const std::vector<SessionRecord>& sessions,
                                 const FilterConfig& cfg, const SessionLengthFn& longest_len,
                                 FilterStats* stats = nullptr) {
  require(cfg.min_query_freq >= 0, "apply_filters: min_query_freq must be >= 0");
  require(cfg.max_tokens >= 0, "apply_filters: max_tokens must be >= 0");
  if (cfg.max_tokens > 0)
    require(static_cast<bool>(longest_len),
            "apply_filters: max_tokens filter requires a trained tokenizer");
  require(cfg.train_fraction >= 0 && cfg.dev_fraction >= 0 &&
              cfg.train_fraction + cfg.dev_fraction <= 1.0,
          "apply_filters: bad split fractions");

  FilterStats local;
  local.sessions_in = static_cast<std::int64_t>(sessions.size());

  std::map<std::string, std::int64_t> freq;
  for (const auto& s : sessions)
    for (const auto& it : s.interactions) ++freq[it.query];

  std::vector<SessionRecord> survivors;
  for (const auto& s : sessions) {
    SessionRecord kept;
    kept.session_id = s.session_id;
    for (const auto& it : s.interactions) {
      if (freq[it.query] <= cfg.min_query_freq) {
        ++local.queries_removed_low_freq;
        continue;
      }
      kept.interactions.push_back(it);
    }
    if (kept.interactions.size() < 2) {
      ++local.sessions_removed_too_few;
      continue;
    }
    SessionRecord held = holdout_ground_truth(kept);
    if (cfg.max_tokens > 0 && longest_len(held) > cfg.max_tokens) {
      ++local.sessions_removed_overlong;
      continue;
    }
    survivors.push_back(std::move(held));
  }
  local.sessions_out = static_cast<std::int64_t>(survivors.size());

  // Time-ordered split mirrors the period-based protocol: earliest sessions
  // train, then dev, the most recent become test.
  std::stable_sort(survivors.begin(), survivors.end(),
                   [](const SessionRecord& a, const SessionRecord& b) {
                     std::int64_t ta = a.interactions.front().query_time;
                     std::int64_t tb = b.interactions.front().query_time;
                     if (ta != tb) return ta < tb;
                     return a.session_id < b.session_id;
                   });

  CorpusSplit split;
  size_t n = survivors.size();
  size_t n_train = static_cast<size_t>(cfg.train_fraction * static_cast<double>(n));
  size_t n_dev = static_cast<size_t>(cfg.dev_fraction * static_cast<double>(n));
  for (size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_dev ? split.dev : split.test);
    dst.push_back(std::move(survivors[i]));
  }
  for (const auto& bucket : {&split.train, &split.dev, &split.test})
    for (const auto& s : *bucket) {
      for (const auto& it : s.interactions) split.query_frequency[it.query] = freq[it.query];
      split.query_frequency[s.ground_truth] = freq[s.ground_truth];
    }
  if (stats) *stats = local;
  return split;
}

}  // namespace querymesh
