#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "querymesh/bpe.hpp"
#include "querymesh/hypothesis.hpp"
#include "querymesh/session.hpp"

namespace querymesh {

// Longest model-visible tokenization of a held-out session: the four
// hypothesis encodings plus the ground-truth target sequence. Sessions are
// removed rather than truncated when this exceeds the budget, so no model
// ever sees a clipped input.
inline int longest_tokenized_length(const SessionRecord& session, const bpe::Vocab& vocab) {
  int longest = 0;
  for (const auto& h : build_all(session))
    longest = std::max(longest, bpe::encode_hypothesis(h, vocab).length());
  longest = std::max(longest, bpe::encode_target(session.ground_truth, vocab).length());
  return longest;
}

inline SessionLengthFn make_length_fn(const bpe::Vocab& vocab) {
  require(vocab.trained(), "tokenizer not yet trained");
  return [&vocab](const SessionRecord& s) { return longest_tokenized_length(s, vocab); };
}

}  // namespace querymesh
