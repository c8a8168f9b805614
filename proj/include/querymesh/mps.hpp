#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "querymesh/beam.hpp"
#include "querymesh/error.hpp"
#include "querymesh/session.hpp"

namespace querymesh::mps {

// Most Popular Suggestion statistics, built from the training split only:
// adjacent-pair co-occurrence counts plus global query submission counts
// for tie-breaking.
struct CandidatePool {
  std::map<std::string, std::map<std::string, std::int64_t>> cooccurrence;
  std::map<std::string, std::int64_t> global_freq;

  bool covers(const std::string& last_query) const {
    auto it = cooccurrence.find(last_query);
    return it != cooccurrence.end() && !it->second.empty();
  }

  // Fraction of sessions whose last context query has candidates.
  double coverage(const std::vector<SessionRecord>& sessions) const {
    if (sessions.empty()) return 0.0;
    std::int64_t hit = 0;
    for (const auto& s : sessions)
      if (!s.interactions.empty() && covers(s.interactions.back().query)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(sessions.size());
  }

  void serialize(std::ostream& out) const {
    out << "querymesh-mps v1\n";
    std::int64_t pairs = 0;
    for (const auto& [last, nexts] : cooccurrence) pairs += static_cast<std::int64_t>(nexts.size());
    out << "pairs " << pairs << '\n';
    for (const auto& [last, nexts] : cooccurrence)
      for (const auto& [next, count] : nexts)
        out << last << '\t' << next << '\t' << count << '\n';
    out << "queries " << global_freq.size() << '\n';
    for (const auto& [q, count] : global_freq) out << q << '\t' << count << '\n';
  }

  static CandidatePool deserialize(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    require(magic == "querymesh-mps" && version == "v1", "bad pool file header");
    std::string key;
    std::int64_t pairs = 0;
    in >> key >> pairs;
    require(key == "pairs", "bad pool file: expected pair count");
    in.ignore();
    CandidatePool pool;
    std::string line;
    for (std::int64_t i = 0; i < pairs; ++i) {
      require(static_cast<bool>(std::getline(in, line)), "bad pool file: truncated pairs");
      auto fields = text::split_on(line, '\t');
      require(fields.size() == 3, "bad pool file: malformed pair line");
      pool.cooccurrence[fields[0]][fields[1]] = std::stoll(fields[2]);
    }
    std::int64_t queries = 0;
    in >> key >> queries;
    require(key == "queries", "bad pool file: expected query count");
    in.ignore();
    for (std::int64_t i = 0; i < queries; ++i) {
      require(static_cast<bool>(std::getline(in, line)), "bad pool file: truncated queries");
      auto fields = text::split_on(line, '\t');
      require(fields.size() == 2, "bad pool file: malformed query line");
      pool.global_freq[fields[0]] = std::stoll(fields[1]);
    }
    return pool;
  }
};

// Counts every adjacent query pair within a held-out session. The full query
// sequence includes the ground truth, so the pool sees the same transitions
// the generative models train on.
inline CandidatePool build_pool(const std::vector<SessionRecord>& train) {
  CandidatePool pool;
  for (const auto& s : train) {
    std::vector<const std::string*> seq;
    for (const auto& it : s.interactions) seq.push_back(&it.query);
    if (!s.ground_truth.empty()) seq.push_back(&s.ground_truth);
    for (const auto* q : seq) ++pool.global_freq[*q];
    for (size_t i = 0; i + 1 < seq.size(); ++i) ++pool.cooccurrence[*seq[i]][*seq[i + 1]];
  }
  return pool;
}

// Top-k next queries by co-occurrence with the last query; ties break by
// global frequency, then lexicographically. Unseen last query gives an
// empty list (coverage miss).
inline beam::SuggestionList suggest_mps(const std::string& last_query, const CandidatePool& pool,
                                        int k, const std::string& session_id = "") {
  require(k >= 1, "suggest_mps: k must be at least 1");
  beam::SuggestionList out;
  out.session_id = session_id;
  out.k = k;
  auto it = pool.cooccurrence.find(last_query);
  if (it == pool.cooccurrence.end()) return out;

  std::vector<std::pair<const std::string*, std::int64_t>> cands;
  cands.reserve(it->second.size());
  for (const auto& [next, count] : it->second) cands.emplace_back(&next, count);
  std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    std::int64_t fa = pool.global_freq.count(*a.first) ? pool.global_freq.at(*a.first) : 0;
    std::int64_t fb = pool.global_freq.count(*b.first) ? pool.global_freq.at(*b.first) : 0;
    if (fa != fb) return fa > fb;
    return *a.first < *b.first;
  });
  for (int i = 0; i < k && i < static_cast<int>(cands.size()); ++i)
    out.suggestions.push_back(
        beam::Suggestion{*cands[static_cast<size_t>(i)].first,
                         static_cast<double>(cands[static_cast<size_t>(i)].second)});
  return out;
}

}  // namespace querymesh::mps
