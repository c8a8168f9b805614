// Shared fixtures for model-level tests: a tiny vocabulary and randomly
// generated held-out sessions.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "querymesh/bpe.hpp"
#include "querymesh/hypothesis.hpp"
#include "querymesh/model.hpp"
#include "querymesh/session.hpp"

namespace querymesh::testing {

inline const std::vector<std::string>& fixture_words() {
  static const std::vector<std::string> words = {
      "data",    "engineer", "analyst", "nurse",   "sydney", "melbourne",
      "python",  "senior",   "junior",  "manager", "retail", "driver",
      "teacher", "remote",   "casual",  "support"};
  return words;
}

inline bpe::Vocab fixture_vocab(int merges = 60) {
  std::vector<std::string> corpus;
  for (const auto& a : fixture_words())
    for (const auto& b : fixture_words()) corpus.push_back(a + " " + b);
  return bpe::train(corpus, bpe::kBaseVocab + merges);
}

inline std::string random_phrase(std::mt19937_64& rng, int min_words = 1, int max_words = 3) {
  const auto& words = fixture_words();
  int n = min_words + static_cast<int>(rng() % static_cast<unsigned>(max_words - min_words + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[rng() % words.size()];
  }
  return out;
}

// A held-out session with random queries and clicks.
inline SessionRecord random_session(std::mt19937_64& rng, int max_interactions = 3) {
  SessionRecord s;
  s.session_id = "t" + std::to_string(rng() % 100000);
  int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_interactions));
  std::int64_t t = 0;
  for (int i = 0; i < n; ++i) {
    Interaction it;
    it.query = random_phrase(rng);
    it.query_time = t++;
    int clicks = static_cast<int>(rng() % 3);
    for (int c = 0; c < clicks; ++c) it.clicks.push_back(random_phrase(rng, 2, 4));
    s.interactions.push_back(std::move(it));
  }
  s.ground_truth = random_phrase(rng);
  return s;
}

template <typename S>
model::ExampleInputs make_mesh_inputs(const SessionRecord& session, const bpe::Vocab& vocab) {
  model::ExampleInputs ex;
  for (const auto& h : build_all(session)) ex.sequences.push_back(bpe::encode_hypothesis(h, vocab));
  ex.target = bpe::encode_target(session.ground_truth, vocab);
  return ex;
}

inline model::ExampleInputs make_vanilla_inputs(const SessionRecord& session,
                                                const bpe::Vocab& vocab,
                                                HypothesisKind kind = HypothesisKind::K1) {
  model::ExampleInputs ex;
  ex.sequences.push_back(bpe::encode_hypothesis(build_hypothesis(session, kind), vocab));
  ex.target = bpe::encode_target(session.ground_truth, vocab);
  return ex;
}

}  // namespace querymesh::testing
