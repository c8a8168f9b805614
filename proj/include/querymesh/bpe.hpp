#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "querymesh/error.hpp"
#include "querymesh/hypothesis.hpp"
#include "querymesh/text.hpp"

namespace querymesh::bpe {

// Reserved control ids. Byte tokens follow at 5..260, merge tokens after.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kSep = 2;
inline constexpr int kPad = 3;
inline constexpr int kUnk = 4;
inline constexpr int kNumControls = 5;
inline constexpr int kNumBytes = 256;
inline constexpr int kBaseVocab = kNumControls + kNumBytes;

inline bool is_control(int id) { return id >= 0 && id < kNumControls; }

struct TokenSequence {
  std::vector<int> ids;
  std::vector<bool> mask;  // true = real token, false = PAD suffix

  int length() const { return static_cast<int>(ids.size()); }
  int real_length() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
  }
};

// Byte-level BPE vocabulary. Every UTF-8 byte is a base token, so UNK is
// unreachable in practice; it is kept anyway.
class Vocab {
 public:
  Vocab() = default;

  bool trained() const { return !id_to_token_.empty(); }
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  const std::string& token(int id) const { return id_to_token_.at(static_cast<size_t>(id)); }

  int id_of(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  // Text -> token ids. No control tokens are added here.
  std::vector<int> encode_text(std::string_view txt) const {
    require(trained(), "tokenizer not yet trained");
    std::vector<int> out;
    for (auto& chunk : chunks(txt)) {
      auto symbols = merge_chunk(chunk);
      for (auto& s : symbols) out.push_back(token_to_id_.at(s));
    }
    return out;
  }

  // Inverse of encode_text over one SEP-free segment.
  std::string decode_segment(const std::vector<int>& ids, size_t begin, size_t end) const {
    std::string bytes;
    for (size_t i = begin; i < end; ++i) {
      int id = ids[i];
      if (is_control(id)) continue;
      bytes += token(id);
    }
    if (!bytes.empty() && bytes.front() == ' ') bytes.erase(bytes.begin());
    return bytes;
  }

  // Splits a formatted sequence on SEP and strips controls, recovering the
  // original item texts.
  std::vector<std::string> decode_items(const std::vector<int>& ids) const {
    std::vector<std::string> items;
    size_t start = 0;
    for (size_t i = 0; i <= ids.size(); ++i) {
      if (i == ids.size() || ids[i] == kSep) {
        items.push_back(decode_segment(ids, start, i));
        start = i + 1;
      }
    }
    return items;
  }

  // Single surface string for a generated sequence; SEP, if the model emits
  // one, becomes a plain space.
  std::string detokenize(const std::vector<int>& ids) const {
    return text::normalize(text::join(decode_items(ids), " "));
  }

  void serialize(std::ostream& out) const {
    out << "querymesh-bpe v1\n";
    out << "merges " << merges_.size() << "\n";
    for (const auto& [l, r] : merges_) out << hex(l) << ' ' << hex(r) << '\n';
    out << "tokens " << id_to_token_.size() << "\n";
    for (size_t i = 0; i < id_to_token_.size(); ++i)
      out << i << ' ' << hex(id_to_token_[i]) << '\n';
  }

  static Vocab deserialize(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    require(magic == "querymesh-bpe" && version == "v1", "bad vocab file header");
    std::string key;
    size_t n_merges = 0;
    in >> key >> n_merges;
    require(key == "merges", "bad vocab file: expected merges count");
    Vocab v;
    v.init_base();
    for (size_t i = 0; i < n_merges; ++i) {
      std::string l, r;
      in >> l >> r;
      v.add_merge(unhex(l), unhex(r));
    }
    size_t n_tokens = 0;
    in >> key >> n_tokens;
    require(key == "tokens" && n_tokens == v.id_to_token_.size(),
            "bad vocab file: token table does not match merge list");
    return v;
  }

 private:
  friend Vocab train(const std::vector<std::string>&, int);

  void init_base() {
    id_to_token_ = {"<bos>", "<eos>", "<sep>", "<pad>", "<unk>"};
    for (int b = 0; b < kNumBytes; ++b) id_to_token_.push_back(std::string(1, static_cast<char>(b)));
    token_to_id_.clear();
    for (size_t i = 0; i < id_to_token_.size(); ++i) token_to_id_[id_to_token_[i]] = static_cast<int>(i);
  }

  void add_merge(const std::string& l, const std::string& r) {
    merges_.emplace_back(l, r);
    merge_rank_[{l, r}] = static_cast<int>(merges_.size()) - 1;
    std::string joined = l + r;
    if (!token_to_id_.count(joined)) {
      token_to_id_[joined] = static_cast<int>(id_to_token_.size());
      id_to_token_.push_back(joined);
    }
  }

  // "a b c" -> {"a", " b", " c"}: each chunk after the first carries its
  // leading space, so plain concatenation inverts tokenization.
  static std::vector<std::string> chunks(std::string_view txt) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : txt) {
      if (c == ' ' && !cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      cur.push_back(c);
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  std::vector<std::string> merge_chunk(const std::string& chunk) const {
    std::vector<std::string> sym;
    sym.reserve(chunk.size());
    for (char c : chunk) sym.emplace_back(1, c);
    while (sym.size() > 1) {
      int best_rank = -1;
      size_t best_at = 0;
      for (size_t i = 0; i + 1 < sym.size(); ++i) {
        auto it = merge_rank_.find({sym[i], sym[i + 1]});
        if (it == merge_rank_.end()) continue;
        if (best_rank < 0 || it->second < best_rank) {
          best_rank = it->second;
          best_at = i;
        }
      }
      if (best_rank < 0) break;
      sym[best_at] += sym[best_at + 1];
      sym.erase(sym.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
    }
    return sym;
  }

  static std::string hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
      out.push_back(digits[c >> 4]);
      out.push_back(digits[c & 15]);
    }
    return out;
  }

  static std::string unhex(const std::string& h) {
    require(h.size() % 2 == 0, "bad hex token in vocab file");
    auto nib = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      throw RuntimeError("bad hex digit in vocab file");
    };
    std::string out;
    out.reserve(h.size() / 2);
    for (size_t i = 0; i < h.size(); i += 2)
      out.push_back(static_cast<char>((nib(h[i]) << 4) | nib(h[i + 1])));
    return out;
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
};

// Greedy highest-frequency pair merging with lexicographic tie-break.
// Deterministic in (corpus order, vocab_size); merging stops early once no
// adjacent pair repeats.
inline Vocab train(const std::vector<std::string>& corpus, int vocab_size) {
  require(!corpus.empty(), "train_bpe: empty corpus");
  require(vocab_size > kBaseVocab,
          "train_bpe: vocab_size must exceed controls + byte alphabet (" +
              std::to_string(kBaseVocab) + ")");
  Vocab v;
  v.init_base();

  // Distinct chunk -> (symbol sequence, weight).
  std::map<std::string, std::int64_t> chunk_count;
  for (const auto& line : corpus) {
    std::string norm = text::normalize(line);
    std::string cur;
    for (char c : norm) {
      if (c == ' ' && !cur.empty()) {
        ++chunk_count[cur];
        cur.clear();
      }
      cur.push_back(c);
    }
    if (!cur.empty()) ++chunk_count[cur];
  }
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> work;
  work.reserve(chunk_count.size());
  for (const auto& [chunk, cnt] : chunk_count) {
    std::vector<std::string> sym;
    for (char c : chunk) sym.emplace_back(1, c);
    work.emplace_back(std::move(sym), cnt);
  }

  int budget = vocab_size - kBaseVocab;
  for (int step = 0; step < budget; ++step) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pairs;
    for (const auto& [sym, cnt] : work)
      for (size_t i = 0; i + 1 < sym.size(); ++i) pairs[{sym[i], sym[i + 1]}] += cnt;
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = std::next(pairs.begin()); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;  // map order breaks ties low
    if (best->second < 2) break;
    const auto [l, r] = best->first;
    v.add_merge(l, r);
    for (auto& [sym, cnt] : work) {
      for (size_t i = 0; i + 1 < sym.size();) {
        if (sym[i] == l && sym[i + 1] == r) {
          sym[i] += sym[i + 1];
          sym.erase(sym.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        } else {
          ++i;
        }
      }
    }
  }
  return v;
}

// BOS + items joined by SEP + EOS; all positions real.
inline TokenSequence encode_hypothesis(const Hypothesis& h, const Vocab& vocab) {
  TokenSequence seq;
  seq.ids.push_back(kBos);
  for (size_t i = 0; i < h.items.size(); ++i) {
    if (i) seq.ids.push_back(kSep);
    auto ids = vocab.encode_text(h.items[i].text);
    seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  }
  seq.ids.push_back(kEos);
  seq.mask.assign(seq.ids.size(), true);
  return seq;
}

// BOS + text + EOS, for decoder targets.
inline TokenSequence encode_target(std::string_view txt, const Vocab& vocab) {
  TokenSequence seq;
  seq.ids.push_back(kBos);
  auto ids = vocab.encode_text(txt);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  seq.ids.push_back(kEos);
  seq.mask.assign(seq.ids.size(), true);
  return seq;
}

inline TokenSequence pad_to(TokenSequence seq, int target_len) {
  require(target_len >= seq.length(),
          "pad_to: target length " + std::to_string(target_len) + " below sequence length " +
              std::to_string(seq.length()));
  seq.ids.resize(static_cast<size_t>(target_len), kPad);
  seq.mask.resize(static_cast<size_t>(target_len), false);
  return seq;
}

inline std::vector<TokenSequence> pad_batch(const std::vector<TokenSequence>& seqs,
                                            int target_len) {
  std::vector<TokenSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(pad_to(s, target_len));
  return out;
}

}  // namespace querymesh::bpe
