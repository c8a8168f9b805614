#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "querymesh/events.hpp"
#include "querymesh/session.hpp"

namespace querymesh {
namespace {

RawEvent Q(const std::string& user, std::int64_t ts, const std::string& q) {
  return {user, ts, EventKind::kQuery, q};
}
RawEvent C(const std::string& user, std::int64_t ts, const std::string& t) {
  return {user, ts, EventKind::kClick, t};
}

TEST(ParseEvents, AcceptsWellFormedAndCountsMalformed) {
  std::istringstream in(
      "u1\t100\tquery\tData  Engineer \n"
      "u1\t110\tclick\tSenior Data Engineer\n"
      "bad line\n"
      "u1\t-5\tquery\tnegative time\n"
      "u1\t120\tscroll\tunknown kind\n"
      "u1\t130\tquery\t   \n");
  EventParseStats stats;
  auto events = parse_events(in, &stats);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].text, "data engineer");
  EXPECT_EQ(events[1].text, "senior data engineer");
  EXPECT_EQ(stats.lines, 6);
  EXPECT_EQ(stats.malformed, 4);
}

TEST(SegmentSessions, GapStrictlyBelowBoundaryStaysTogether) {
  auto sessions = segment_sessions({Q("u", 0, "a"), Q("u", 1799, "b")}, 1800);
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_EQ(sessions[0].interactions.size(), 2u);
}

TEST(SegmentSessions, GapExactlyAtBoundarySplits) {
  // "30 minutes or more" is inclusive.
  auto sessions = segment_sessions({Q("u", 0, "a"), Q("u", 1800, "b")}, 1800);
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].session_id, "u#1");
  EXPECT_EQ(sessions[1].session_id, "u#2");
}

TEST(SegmentSessions, HandTrace) {
  // (q@0, click@10, q@20, q@4000) -> [(q1,{c1}),(q2,{})] and [(q3,{})]
  auto sessions = segment_sessions(
      {Q("u", 0, "q1"), C("u", 10, "c1"), Q("u", 20, "q2"), Q("u", 4000, "q3")}, 1800);
  ASSERT_EQ(sessions.size(), 2u);
  ASSERT_EQ(sessions[0].interactions.size(), 2u);
  EXPECT_EQ(sessions[0].interactions[0].query, "q1");
  ASSERT_EQ(sessions[0].interactions[0].clicks.size(), 1u);
  EXPECT_EQ(sessions[0].interactions[0].clicks[0], "c1");
  EXPECT_TRUE(sessions[0].interactions[1].clicks.empty());
  ASSERT_EQ(sessions[1].interactions.size(), 1u);
  EXPECT_EQ(sessions[1].interactions[0].query, "q3");
}

TEST(SegmentSessions, ClickGapAlsoSplits) {
  // Inactivity is measured between consecutive actions of any kind.
  auto sessions =
      segment_sessions({Q("u", 0, "a"), C("u", 100, "t"), Q("u", 1899, "b")}, 1800);
  ASSERT_EQ(sessions.size(), 1u);  // 1899-100 < 1800, still one session
  auto split = segment_sessions({Q("u", 0, "a"), C("u", 100, "t"), Q("u", 1900, "b")}, 1800);
  ASSERT_EQ(split.size(), 2u);
}

TEST(SegmentSessions, OrphanClickDroppedAndCounted) {
  SegmentStats stats;
  auto sessions = segment_sessions({C("u", 0, "t"), Q("u", 10, "a")}, 1800, &stats);
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_TRUE(sessions[0].interactions[0].clicks.empty());
  EXPECT_EQ(stats.clicks_dropped_no_query, 1);

  // A click after a session break has no query in *its* session either.
  SegmentStats stats2;
  auto s2 = segment_sessions({Q("u", 0, "a"), C("u", 5000, "t")}, 1800, &stats2);
  ASSERT_EQ(s2.size(), 1u);
  EXPECT_EQ(stats2.clicks_dropped_no_query, 1);
}

TEST(SegmentSessions, DuplicateClickedTitlesDeduplicated) {
  auto sessions = segment_sessions(
      {Q("u", 0, "a"), C("u", 1, "t"), C("u", 2, "s"), C("u", 3, "t")}, 1800);
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_EQ(sessions[0].interactions[0].clicks, (std::vector<std::string>{"t", "s"}));
}

TEST(SegmentSessions, PermutationInvariant) {
  std::vector<RawEvent> events;
  std::mt19937 rng(7);
  for (int u = 0; u < 5; ++u) {
    std::int64_t t = 0;
    for (int i = 0; i < 20; ++i) {
      t += static_cast<std::int64_t>(rng() % 2500);
      std::string user = "u" + std::to_string(u);
      if (rng() % 3 == 0) {
        events.push_back(C(user, t, "title" + std::to_string(rng() % 4)));
      } else {
        events.push_back(Q(user, t, "query" + std::to_string(rng() % 6)));
      }
    }
  }
  auto baseline = segment_sessions(events, 1800);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(events.begin(), events.end(), rng);
    auto shuffled = segment_sessions(events, 1800);
    ASSERT_EQ(shuffled.size(), baseline.size());
    for (size_t i = 0; i < baseline.size(); ++i) {
      EXPECT_EQ(shuffled[i].session_id, baseline[i].session_id);
      ASSERT_EQ(shuffled[i].interactions.size(), baseline[i].interactions.size());
      for (size_t k = 0; k < baseline[i].interactions.size(); ++k) {
        EXPECT_EQ(shuffled[i].interactions[k].query, baseline[i].interactions[k].query);
        EXPECT_EQ(shuffled[i].interactions[k].clicks, baseline[i].interactions[k].clicks);
      }
    }
  }
}

TEST(Holdout, LastQueryBecomesGroundTruth) {
  SessionRecord s{"s", {{"q1", {"t1"}, 0}, {"q2", {}, 10}}, ""};
  auto held = holdout_ground_truth(s);
  ASSERT_EQ(held.interactions.size(), 1u);
  EXPECT_EQ(held.interactions[0].query, "q1");
  EXPECT_EQ(held.ground_truth, "q2");
}

TEST(Holdout, HandTraceThreeQueries) {
  SessionRecord s{"s", {{"q1", {}, 0}, {"q2", {"t2"}, 10}, {"q3", {}, 20}}, ""};
  auto held = holdout_ground_truth(s);
  ASSERT_EQ(held.interactions.size(), 2u);
  EXPECT_EQ(held.interactions[1].query, "q2");
  EXPECT_EQ(held.interactions[1].clicks, (std::vector<std::string>{"t2"}));
  EXPECT_EQ(held.ground_truth, "q3");
}

TEST(Holdout, ClicksOnHeldOutQueryDiscarded) {
  SessionRecord s{"s", {{"q1", {}, 0}, {"q2", {"after"}, 10}}, ""};
  auto held = holdout_ground_truth(s);
  EXPECT_EQ(held.ground_truth, "q2");
  EXPECT_TRUE(held.interactions[0].clicks.empty());
}

TEST(Holdout, SingleQueryIsError) {
  SessionRecord s{"s", {{"q1", {}, 0}}, ""};
  EXPECT_THROW(holdout_ground_truth(s), RuntimeError);
}

std::vector<SessionRecord> make_sessions(const std::vector<std::vector<std::string>>& queries) {
  std::vector<SessionRecord> out;
  std::int64_t base = 0;
  for (size_t i = 0; i < queries.size(); ++i) {
    SessionRecord s;
    s.session_id = "s" + std::to_string(i);
    std::int64_t t = base;
    for (const auto& q : queries[i]) s.interactions.push_back({q, {}, t++});
    base += 10000;
    out.push_back(std::move(s));
  }
  return out;
}

TEST(ApplyFilters, SingletonSessionsRemoved) {
  auto sessions = make_sessions({{"a"}, {"a", "b"}, {"a", "b"}});
  FilterConfig cfg;
  cfg.min_query_freq = 0;
  FilterStats stats;
  auto split = apply_filters(sessions, cfg, nullptr, &stats);
  EXPECT_EQ(stats.sessions_removed_too_few, 1);
  EXPECT_EQ(split.total_sessions(), 2);
}

TEST(ApplyFilters, FrequencyThresholdIsInclusive) {
  // "x" appears exactly 10 times with threshold 10 -> removed.
  std::vector<std::vector<std::string>> qs;
  for (int i = 0; i < 5; ++i) qs.push_back({"x", "x", "keep1", "keep2"});
  for (int i = 0; i < 12; ++i) qs.push_back({"keep1", "keep2"});
  auto sessions = make_sessions(qs);
  FilterConfig cfg;
  cfg.min_query_freq = 10;
  FilterStats stats;
  auto split = apply_filters(sessions, cfg, nullptr, &stats);
  EXPECT_EQ(stats.queries_removed_low_freq, 10);
  EXPECT_FALSE(split.query_frequency.count("x"));
  for (const auto& [q, f] : split.query_frequency) EXPECT_GT(f, 10) << q;
}

TEST(ApplyFilters, EmptyInputGivesEmptySplit) {
  FilterStats stats;
  auto split = apply_filters({}, FilterConfig{}, nullptr, &stats);
  EXPECT_EQ(split.total_sessions(), 0);
  EXPECT_EQ(stats.sessions_in, 0);
  EXPECT_EQ(stats.queries_removed_low_freq, 0);
  EXPECT_EQ(stats.sessions_removed_too_few, 0);
  EXPECT_EQ(stats.sessions_removed_overlong, 0);
}

TEST(ApplyFilters, CountersAccountForEverySession) {
  auto sessions = make_sessions({{"a"}, {"a", "b"}, {"a", "b", "c"}, {"rare", "a"}, {"a", "b"}});
  FilterConfig cfg;
  cfg.min_query_freq = 1;  // "rare" and "c" appear once
  FilterStats stats;
  auto split = apply_filters(sessions, cfg, nullptr, &stats);
  EXPECT_EQ(stats.sessions_in, stats.sessions_removed_too_few + stats.sessions_removed_overlong +
                                   stats.sessions_out);
  EXPECT_EQ(split.total_sessions(), stats.sessions_out);
}

TEST(ApplyFilters, MaxTokensRemovesOverlongSessions) {
  auto sessions = make_sessions({{"a", "b"}, {"a", "b", "c", "d"}});
  FilterConfig cfg;
  cfg.min_query_freq = 0;
  cfg.max_tokens = 3;
  // Stub length function: number of context queries + 2.
  SessionLengthFn len = [](const SessionRecord& s) {
    return static_cast<int>(s.interactions.size()) + 2;
  };
  FilterStats stats;
  auto split = apply_filters(sessions, cfg, len, &stats);
  EXPECT_EQ(stats.sessions_removed_overlong, 1);
  EXPECT_EQ(split.total_sessions(), 1);
}

TEST(ApplyFilters, HoldoutAppliedAndSplitsDisjoint) {
  std::vector<std::vector<std::string>> qs;
  for (int i = 0; i < 20; ++i) qs.push_back({"a", "b", "c"});
  auto split = apply_filters(make_sessions(qs), FilterConfig{0, 0, 0.5, 0.25}, nullptr);
  EXPECT_EQ(split.train.size(), 10u);
  EXPECT_EQ(split.dev.size(), 5u);
  EXPECT_EQ(split.test.size(), 5u);
  std::set<std::string> ids;
  for (const auto* bucket : {&split.train, &split.dev, &split.test})
    for (const auto& s : *bucket) {
      EXPECT_TRUE(ids.insert(s.session_id).second) << "duplicate " << s.session_id;
      EXPECT_GE(s.interactions.size(), 1u);
      EXPECT_FALSE(s.ground_truth.empty());
    }
}

}  // namespace
}  // namespace querymesh
