#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "querymesh/bpe.hpp"
#include "querymesh/error.hpp"
#include "querymesh/model.hpp"

namespace querymesh::beam {

struct BeamConfig {
  int width = 8;
  int k = 5;
  int max_len = 32;  // maximum emitted tokens including EOS

  void validate() const {
    require(k >= 1 && width >= k, "beam: need width >= k >= 1");
    require(max_len >= 2, "beam: max_len must be at least 2");
  }
};

// One decoded candidate: emitted token ids (BOS excluded, EOS included when
// finished) with its length-normalized log probability.
struct RankedSequence {
  std::vector<int> ids;
  double total_logprob = 0;
  bool finished = false;

  double score() const {
    return ids.empty() ? -std::numeric_limits<double>::infinity()
                       : total_logprob / static_cast<double>(ids.size());
  }
};

struct Suggestion {
  std::string text;
  double score = 0;
};

struct SuggestionList {
  std::string session_id;
  std::vector<Suggestion> suggestions;  // scores non-increasing, texts unique
  int beam_width = 0;
  int k = 0;
  bool incomplete = false;  // no hypothesis reached EOS within max_len
};

namespace detail {

inline bool better(const RankedSequence& a, const RankedSequence& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  return a.ids < b.ids;  // deterministic tie-break: lower token ids win
}

struct Partial {
  std::vector<int> emitted;
  double total_logprob = 0;
};

inline bool better_partial(const Partial& a, const Partial& b) {
  if (a.total_logprob != b.total_logprob) return a.total_logprob > b.total_logprob;
  return a.emitted < b.emitted;
}

inline Eigen::RowVectorXd log_softmax(Eigen::RowVectorXd logits) {
  double maxv = logits.maxCoeff();
  double z = (logits.array() - maxv).exp().sum();
  return logits.array() - maxv - std::log(z);
}

}  // namespace detail

// Standard beam search from BOS over an arbitrary next-token scorer.
// `next_logits(prefix)` receives the full prefix starting with BOS and
// returns raw logits for the next position. Hypotheses finalize on eos_id;
// final ranking is by total log probability divided by emitted token count.
// The optional observer sees every candidate sequence that gets scored.
template <typename StepFn>
std::vector<RankedSequence> search_ids(
    StepFn&& next_logits, int eos_id, const BeamConfig& cfg,
    const std::function<void(const std::vector<int>&)>& observer = nullptr) {
  cfg.validate();
  std::vector<detail::Partial> alive = {detail::Partial{}};
  std::vector<RankedSequence> finished;

  for (int step = 0; step < cfg.max_len && !alive.empty(); ++step) {
    std::vector<detail::Partial> alive_next;
    for (const auto& beam : alive) {
      std::vector<int> prefix;
      prefix.reserve(beam.emitted.size() + 1);
      prefix.push_back(bpe::kBos);
      prefix.insert(prefix.end(), beam.emitted.begin(), beam.emitted.end());
      Eigen::RowVectorXd lp = detail::log_softmax(next_logits(prefix));

      // Expanding the top `width` tokens per beam is enough: no more than
      // `width` candidates survive pruning anyway.
      int expand = std::min<int>(cfg.width, static_cast<int>(lp.cols()));
      std::vector<int> order(static_cast<size_t>(lp.cols()));
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::partial_sort(order.begin(), order.begin() + expand, order.end(),
                        [&](int a, int b) { return lp(a) != lp(b) ? lp(a) > lp(b) : a < b; });
      for (int rank = 0; rank < expand; ++rank) {
        int tok = order[static_cast<size_t>(rank)];
        detail::Partial cand;
        cand.emitted = beam.emitted;
        cand.emitted.push_back(tok);
        cand.total_logprob = beam.total_logprob + lp(tok);
        if (observer) observer(cand.emitted);
        if (tok == eos_id) {
          finished.push_back(RankedSequence{std::move(cand.emitted), cand.total_logprob, true});
        } else {
          alive_next.push_back(std::move(cand));
        }
      }
    }
    if (static_cast<int>(alive_next.size()) > cfg.width) {
      std::nth_element(alive_next.begin(), alive_next.begin() + cfg.width, alive_next.end(),
                       detail::better_partial);
      alive_next.resize(static_cast<size_t>(cfg.width));
    }
    std::sort(alive_next.begin(), alive_next.end(), detail::better_partial);
    alive = std::move(alive_next);
  }

  if (finished.empty()) {
    // Nothing reached EOS: surface the best unfinished prefixes, flagged by
    // finished=false, so the caller can report the condition.
    for (auto& p : alive)
      finished.push_back(RankedSequence{std::move(p.emitted), p.total_logprob, false});
  }
  std::sort(finished.begin(), finished.end(), detail::better);
  return finished;
}

// Model-backed suggestion decoding: beam over the transformer decoder given
// precomputed (fused) memory, detokenized to unique surface strings.
template <typename S>
SuggestionList suggest(model::Transformer<S>& m, const model::MemoryStates<S>& mem,
                       const bpe::Vocab& vocab, const std::string& session_id,
                       const BeamConfig& cfg) {
  cfg.validate();
  ag::NoGradGuard ng;
  int budget = std::min(cfg.max_len, m.cfg.max_positions - 1);
  BeamConfig run = cfg;
  run.max_len = budget;
  auto step = [&](const std::vector<int>& prefix) -> Eigen::RowVectorXd {
    return model::next_token_logits(m, mem, prefix).template cast<double>();
  };
  auto ranked = search_ids(step, bpe::kEos, run);

  SuggestionList out;
  out.session_id = session_id;
  out.beam_width = cfg.width;
  out.k = cfg.k;
  out.incomplete = !ranked.empty() && !ranked.front().finished;
  std::unordered_set<std::string> seen;
  for (const auto& r : ranked) {
    if (static_cast<int>(out.suggestions.size()) >= cfg.k) break;
    std::string text = vocab.detokenize(r.ids);
    if (text.empty()) continue;               // degenerate all-control output
    if (!seen.insert(text).second) continue;  // same surface form, keep best score
    out.suggestions.push_back(Suggestion{std::move(text), r.score()});
  }
  return out;
}

}  // namespace querymesh::beam
