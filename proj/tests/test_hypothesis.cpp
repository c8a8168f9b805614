#include <gtest/gtest.h>

#include "querymesh/hypothesis.hpp"

namespace querymesh {
namespace {

std::vector<std::string> texts(const Hypothesis& h) {
  std::vector<std::string> out;
  for (const auto& it : h.items) out.push_back(it.text);
  return out;
}

SessionRecord held(std::vector<Interaction> xs, std::string gt) {
  SessionRecord s;
  s.session_id = "s";
  s.interactions = std::move(xs);
  s.ground_truth = std::move(gt);
  return s;
}

TEST(BuildHypothesis, K3InterleavesClickedQueries) {
  auto s = held({{"q1", {"t11", "t12"}, 0}, {"q2", {}, 1}}, "gt");
  auto h = build_hypothesis(s, HypothesisKind::K3);
  EXPECT_EQ(texts(h), (std::vector<std::string>{"q1", "t11", "t12", "q2"}));
  EXPECT_EQ(h.items[0].kind, ItemKind::kQuery);
  EXPECT_EQ(h.items[1].kind, ItemKind::kTitle);
}

TEST(BuildHypothesis, K2WithNoEarlierClicksIsJustLastQuery) {
  auto s = held({{"q1", {}, 0}, {"q2", {}, 1}}, "gt");
  auto h = build_hypothesis(s, HypothesisKind::K2);
  EXPECT_EQ(texts(h), (std::vector<std::string>{"q2"}));
}

TEST(BuildHypothesis, K2CollectsEarlierTitlesOnly) {
  auto s = held({{"q1", {"a", "b"}, 0}, {"q2", {"c"}, 1}, {"q3", {"d"}, 2}}, "gt");
  auto h = build_hypothesis(s, HypothesisKind::K2);
  // Titles of C_1..C_{n-1} in interaction order, then Q_n.
  EXPECT_EQ(texts(h), (std::vector<std::string>{"a", "b", "c", "q3"}));
}

TEST(BuildHypothesis, K4UsesOnlyFinalInteraction) {
  auto s = held({{"q1", {"t"}, 0}, {"q2", {"u"}, 1}}, "gt");
  auto h = build_hypothesis(s, HypothesisKind::K4);
  EXPECT_EQ(texts(h), (std::vector<std::string>{"q2", "u"}));
}

TEST(BuildAll, ClickFreeSessionCollapsesK2K3K4) {
  auto s = held({{"q1", {}, 0}, {"q2", {}, 1}, {"q3", {}, 2}}, "gt");
  auto hs = build_all(s);
  EXPECT_EQ(texts(hs[0]), (std::vector<std::string>{"q1", "q2", "q3"}));
  EXPECT_EQ(texts(hs[1]), (std::vector<std::string>{"q3"}));
  EXPECT_EQ(texts(hs[2]), (std::vector<std::string>{"q3"}));
  EXPECT_EQ(texts(hs[3]), (std::vector<std::string>{"q3"}));
}

TEST(BuildAll, SingleQueryWithClicksDuplicatesQnInK3) {
  auto s = held({{"q1", {"t1"}, 0}}, "gt");
  auto hs = build_all(s);
  EXPECT_EQ(texts(hs[0]), (std::vector<std::string>{"q1"}));
  EXPECT_EQ(texts(hs[1]), (std::vector<std::string>{"q1"}));
  EXPECT_EQ(texts(hs[2]), (std::vector<std::string>{"q1", "t1", "q1"}));
  EXPECT_EQ(texts(hs[3]), (std::vector<std::string>{"q1", "t1"}));
}

TEST(BuildAll, AlwaysFourInFixedOrder) {
  auto s = held({{"q1", {"t"}, 0}, {"q2", {}, 1}}, "gt");
  auto hs = build_all(s);
  ASSERT_EQ(hs.size(), 4u);
  EXPECT_EQ(hs[0].kind, HypothesisKind::K1);
  EXPECT_EQ(hs[1].kind, HypothesisKind::K2);
  EXPECT_EQ(hs[2].kind, HypothesisKind::K3);
  EXPECT_EQ(hs[3].kind, HypothesisKind::K4);
  for (const auto& h : hs) EXPECT_FALSE(h.items.empty());
}

TEST(BuildHypothesis, K1IsExactlyTheQuerySequence) {
  auto s = held({{"a", {"x"}, 0}, {"b", {}, 1}, {"c", {"y", "z"}, 2}}, "gt");
  auto h = build_hypothesis(s, HypothesisKind::K1);
  EXPECT_EQ(texts(h), (std::vector<std::string>{"a", "b", "c"}));
  for (const auto& it : h.items) EXPECT_EQ(it.kind, ItemKind::kQuery);
}

}  // namespace
}  // namespace querymesh
