#pragma once

#include <array>
#include <string>
#include <vector>

#include "querymesh/error.hpp"
#include "querymesh/session.hpp"

namespace querymesh {

enum class HypothesisKind { K1, K2, K3, K4 };

inline constexpr std::array<HypothesisKind, 4> kAllHypotheses = {
    HypothesisKind::K1, HypothesisKind::K2, HypothesisKind::K3, HypothesisKind::K4};

inline const char* to_string(HypothesisKind k) {
  switch (k) {
    case HypothesisKind::K1: return "K1";
    case HypothesisKind::K2: return "K2";
    case HypothesisKind::K3: return "K3";
    case HypothesisKind::K4: return "K4";
  }
  return "?";
}

enum class ItemKind { kQuery, kTitle };

struct HypothesisItem {
  std::string text;
  ItemKind kind = ItemKind::kQuery;
};

// One behavioral view of a held-out session's history, as an ordered list of
// query / clicked-title items:
//   K1: every preceding query.
//   K2: all titles clicked before the last query, then the last query.
//   K3: each clicked query followed by its titles, then the last query.
//   K4: the last query and the titles clicked on it.
// K3 keeps the literal formula: when the last query has clicks it appears
// both inside its clicked-query run and as the trailing query.
struct Hypothesis {
  HypothesisKind kind = HypothesisKind::K1;
  std::vector<HypothesisItem> items;
  std::string session_id;
};

inline Hypothesis build_hypothesis(const SessionRecord& session, HypothesisKind kind) {
  require(!session.interactions.empty(),
          "build_hypothesis: session must be held out with >= 1 interaction");
  Hypothesis h;
  h.kind = kind;
  h.session_id = session.session_id;
  const auto& xs = session.interactions;
  const Interaction& last = xs.back();
  switch (kind) {
    case HypothesisKind::K1:
      for (const auto& it : xs) h.items.push_back({it.query, ItemKind::kQuery});
      break;
    case HypothesisKind::K2:
      for (size_t i = 0; i + 1 < xs.size(); ++i)
        for (const auto& t : xs[i].clicks) h.items.push_back({t, ItemKind::kTitle});
      h.items.push_back({last.query, ItemKind::kQuery});
      break;
    case HypothesisKind::K3:
      for (const auto& it : xs) {
        if (it.clicks.empty()) continue;
        h.items.push_back({it.query, ItemKind::kQuery});
        for (const auto& t : it.clicks) h.items.push_back({t, ItemKind::kTitle});
      }
      h.items.push_back({last.query, ItemKind::kQuery});
      break;
    case HypothesisKind::K4:
      h.items.push_back({last.query, ItemKind::kQuery});
      for (const auto& t : last.clicks) h.items.push_back({t, ItemKind::kTitle});
      break;
  }
  // Q_n is always present, so no hypothesis can come out empty.
  require(!h.items.empty(), "build_hypothesis: empty hypothesis");
  return h;
}

// Fixed (K1,K2,K3,K4) order so the attention index is stable corpus-wide.
inline std::array<Hypothesis, 4> build_all(const SessionRecord& session) {
  return {build_hypothesis(session, HypothesisKind::K1),
          build_hypothesis(session, HypothesisKind::K2),
          build_hypothesis(session, HypothesisKind::K3),
          build_hypothesis(session, HypothesisKind::K4)};
}

}  // namespace querymesh
