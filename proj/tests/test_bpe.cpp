#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "querymesh/bpe.hpp"

namespace querymesh::bpe {
namespace {

// Independent oracle: count adjacent single-byte pairs over space-delimited
// chunks (chunks after the first keep their leading space) by brute force.
std::pair<std::string, std::string> most_frequent_pair(const std::vector<std::string>& corpus) {
  std::map<std::pair<std::string, std::string>, long> counts;
  for (const auto& line : corpus) {
    std::string norm = text::normalize(line);
    std::vector<std::string> chunks;
    std::string cur;
    for (char c : norm) {
      if (c == ' ' && !cur.empty()) {
        chunks.push_back(cur);
        cur.clear();
      }
      cur.push_back(c);
    }
    if (!cur.empty()) chunks.push_back(cur);
    for (const auto& chunk : chunks)
      for (size_t i = 0; i + 1 < chunk.size(); ++i)
        ++counts[{std::string(1, chunk[i]), std::string(1, chunk[i + 1])}];
  }
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

TEST(TrainBpe, FirstMergeMatchesBruteForcePairCount) {
  std::vector<std::string> corpus = {"aaab"};
  auto vocab = train(corpus, kBaseVocab + 1);
  ASSERT_EQ(vocab.merges().size(), 1u);
  EXPECT_EQ(vocab.merges()[0], most_frequent_pair(corpus));
  EXPECT_EQ(vocab.merges()[0], (std::pair<std::string, std::string>{"a", "a"}));

  std::vector<std::string> corpus2 = {"the cat", "the hat", "the mat"};
  auto vocab2 = train(corpus2, kBaseVocab + 1);
  ASSERT_EQ(vocab2.merges().size(), 1u);
  EXPECT_EQ(vocab2.merges()[0], most_frequent_pair(corpus2));
}

TEST(TrainBpe, TooSmallVocabIsError) {
  EXPECT_THROW(train({"abc"}, 5), RuntimeError);
  EXPECT_THROW(train({"abc"}, kBaseVocab), RuntimeError);
}

TEST(TrainBpe, EmptyCorpusIsError) { EXPECT_THROW(train({}, 4096), RuntimeError); }

TEST(TrainBpe, ControlIdsStayReserved) {
  auto vocab = train({"some words here", "more words"}, kBaseVocab + 20);
  EXPECT_LT(kBos, 5);
  EXPECT_LT(kEos, 5);
  EXPECT_LT(kSep, 5);
  EXPECT_LT(kPad, 5);
  EXPECT_LT(kUnk, 5);
  // Merges never produce a control token.
  for (const auto& [l, r] : vocab.merges()) {
    EXPECT_FALSE(is_control(vocab.id_of(l + r)));
  }
  for (int id : vocab.encode_text("some more words")) EXPECT_GE(id, kNumControls);
}

TEST(EncodeHypothesis, SingleItemHasNoSeparator) {
  auto vocab = train({"data engineer"}, kBaseVocab + 10);
  Hypothesis h{HypothesisKind::K1, {{"data", ItemKind::kQuery}}, "s"};
  auto seq = encode_hypothesis(h, vocab);
  EXPECT_EQ(seq.ids.front(), kBos);
  EXPECT_EQ(seq.ids.back(), kEos);
  for (size_t i = 1; i + 1 < seq.ids.size(); ++i) EXPECT_NE(seq.ids[i], kSep);
  EXPECT_EQ(seq.real_length(), seq.length());
}

TEST(EncodeHypothesis, SeparatorBetweenItems) {
  auto vocab = train({"a b"}, kBaseVocab + 5);
  Hypothesis h{HypothesisKind::K3,
               {{"a", ItemKind::kQuery}, {"b", ItemKind::kTitle}},
               "s"};
  auto seq = encode_hypothesis(h, vocab);
  int seps = 0;
  for (int id : seq.ids) seps += id == kSep;
  EXPECT_EQ(seps, 1);
  EXPECT_EQ(seq.ids.front(), kBos);
  EXPECT_EQ(seq.ids.back(), kEos);
}

TEST(EncodeHypothesis, RoundTripRecoversItemTexts) {
  auto vocab = train({"data engineer sydney", "senior data engineer"}, kBaseVocab + 30);
  Hypothesis h{HypothesisKind::K3,
               {{"data engineer", ItemKind::kQuery},
                {"senior data engineer sydney", ItemKind::kTitle}},
               "s"};
  auto seq = encode_hypothesis(h, vocab);
  auto items = vocab.decode_items(seq.ids);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0], "data engineer");
  EXPECT_EQ(items[1], "senior data engineer sydney");
}

TEST(EncodeText, IdentityOnArbitraryUtf8ViaByteFallback) {
  auto vocab = train({"plain ascii only"}, kBaseVocab + 8);
  // None of these strings appeared in training.
  for (std::string s : {std::string("zূrich café"), std::string("データ エンジニア"),
                        std::string("never seen words")}) {
    auto ids = vocab.encode_text(s);
    EXPECT_EQ(vocab.decode_segment(ids, 0, ids.size()), s);
    for (int id : ids) EXPECT_NE(id, kUnk);
  }
}

TEST(EncodeText, PrefixStability) {
  auto vocab = train({"data engineer sydney nsw", "data analyst"}, kBaseVocab + 40);
  std::mt19937 rng(11);
  std::vector<std::string> words = {"data", "engineer", "sydney", "nsw", "analyst"};
  for (int trial = 0; trial < 30; ++trial) {
    std::string a = words[rng() % words.size()] + " " + words[rng() % words.size()];
    std::string b = words[rng() % words.size()];
    Hypothesis ha{HypothesisKind::K1, {{a, ItemKind::kQuery}}, "s"};
    Hypothesis hab{HypothesisKind::K1,
                   {{a, ItemKind::kQuery}, {b, ItemKind::kQuery}},
                   "s"};
    auto ea = encode_hypothesis(ha, vocab);
    auto eab = encode_hypothesis(hab, vocab);
    ASSERT_GE(eab.ids.size(), ea.ids.size());
    for (size_t i = 0; i + 1 < ea.ids.size(); ++i) EXPECT_EQ(ea.ids[i], eab.ids[i]);
  }
}

TEST(Vocab, DeterministicSerialization) {
  std::vector<std::string> corpus = {"data engineer", "data analyst", "registered nurse",
                                     "nurse unit manager"};
  auto v1 = train(corpus, kBaseVocab + 50);
  auto v2 = train(corpus, kBaseVocab + 50);
  std::ostringstream s1, s2;
  v1.serialize(s1);
  v2.serialize(s2);
  EXPECT_EQ(s1.str(), s2.str());

  std::istringstream in(s1.str());
  auto v3 = Vocab::deserialize(in);
  std::ostringstream s3;
  v3.serialize(s3);
  EXPECT_EQ(s1.str(), s3.str());
  EXPECT_EQ(v3.encode_text("data engineer"), v1.encode_text("data engineer"));
}

TEST(PadBatch, PadsWithMaskFalseSuffix) {
  auto vocab = train({"a b c"}, kBaseVocab + 2);
  TokenSequence seq;
  seq.ids = {kBos, 10, kEos};
  seq.mask = {true, true, true};
  auto padded = pad_to(seq, 5);
  EXPECT_EQ(padded.ids, (std::vector<int>{kBos, 10, kEos, kPad, kPad}));
  EXPECT_EQ(padded.mask, (std::vector<bool>{true, true, true, false, false}));
}

TEST(PadBatch, ExactLengthUnchangedAndEmptyBatchOk) {
  TokenSequence seq;
  seq.ids = {kBos, 9, 8, 7, kEos};
  seq.mask.assign(5, true);
  auto same = pad_to(seq, 5);
  EXPECT_EQ(same.ids, seq.ids);
  EXPECT_TRUE(pad_batch({}, 4).empty());
  EXPECT_THROW(pad_to(seq, 3), RuntimeError);
}

}  // namespace
}  // namespace querymesh::bpe
