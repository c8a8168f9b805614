#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "querymesh/error.hpp"
#include "querymesh/text.hpp"

namespace querymesh::metrics {

// Word-level Levenshtein distance over whitespace tokens.
inline int word_edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// min over the first k hypotheses of EditDist(ref, hyp) / |ref|, in words.
// An empty hypothesis list scores 1 by convention (the caller flags it).
inline double wer_at_k(const std::string& ref, std::span<const std::string> hyps, int k) {
  require(k >= 1, "wer_at_k: k must be at least 1");
  auto ref_words = text::split_words(text::normalize(ref));
  require(!ref_words.empty(), "wer_at_k: empty reference");
  if (hyps.empty()) return 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k && i < static_cast<int>(hyps.size()); ++i) {
    auto hyp_words = text::split_words(text::normalize(hyps[static_cast<size_t>(i)]));
    double wer = static_cast<double>(word_edit_distance(ref_words, hyp_words)) /
                 static_cast<double>(ref_words.size());
    best = std::min(best, wer);
  }
  return best;
}

// Token-pair similarity kernel: conceptually the inner product of unit-norm
// token embeddings. Implementations must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual double similarity(const std::string& a, const std::string& b) const = 0;
};

// One-hot token identity kernel: 1 for equal tokens, 0 otherwise.
class OneHotEmbedder : public Embedder {
 public:
  double similarity(const std::string& a, const std::string& b) const override {
    return a == b ? 1.0 : 0.0;
  }
};

// Greedy-matching F1 against unit-norm token embeddings: recall averages,
// over reference tokens, each token's best similarity to any hypothesis
// token; precision is symmetric; F1 is their harmonic mean.
inline double greedy_match_f1(const std::string& ref, const std::string& hyp,
                              const Embedder& embedder) {
  auto ref_toks = text::split_words(text::normalize(ref));
  auto hyp_toks = text::split_words(text::normalize(hyp));
  if (ref_toks.empty() || hyp_toks.empty()) return 0.0;
  auto directional = [&](const std::vector<std::string>& from,
                         const std::vector<std::string>& to) {
    double total = 0;
    for (const auto& f : from) {
      double best = 0;
      for (const auto& t : to) best = std::max(best, embedder.similarity(f, t));
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  double recall = directional(ref_toks, hyp_toks);
  double precision = directional(hyp_toks, ref_toks);
  if (recall + precision <= 0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

inline double bertf1_at_k(const std::string& ref, std::span<const std::string> hyps, int k,
                          const Embedder& embedder) {
  require(k >= 1, "bertf1_at_k: k must be at least 1");
  double best = 0.0;
  for (int i = 0; i < k && i < static_cast<int>(hyps.size()); ++i)
    best = std::max(best, greedy_match_f1(ref, hyps[static_cast<size_t>(i)], embedder));
  return best;
}

// 1/rank of the first exact match within the top k, else 0. Matching uses
// the same normalization as ingest.
inline double mrr_at_k(const std::string& ref, std::span<const std::string> hyps, int k) {
  require(k >= 1, "mrr_at_k: k must be at least 1");
  std::string want = text::normalize(ref);
  for (int i = 0; i < k && i < static_cast<int>(hyps.size()); ++i)
    if (text::normalize(hyps[static_cast<size_t>(i)]) == want)
      return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

inline int success_at_k(const std::string& ref, std::span<const std::string> hyps, int k) {
  return mrr_at_k(ref, hyps, k) > 0 ? 1 : 0;
}

// ---- Wilcoxon signed-rank test ----------------------------------------------

struct WilcoxonResult {
  double w_plus = 0;    // rank sum of positive differences
  int n = 0;            // pairs remaining after zero removal
  double p_value = 1.0; // two-sided
  bool exact = false;   // exact enumeration-equivalent distribution used
};

// Two-sided Wilcoxon signed-rank test on paired differences. Zeros are
// dropped; tied magnitudes get average ranks. For n <= exact_threshold the
// p-value is computed from the exact sign-flip distribution (a subset-sum
// count over doubled ranks, integral even with .5 average ranks); larger n
// uses the normal approximation with tie correction and continuity
// correction.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs,
                                           int exact_threshold = 25) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  WilcoxonResult res;
  res.n = static_cast<int>(d.size());
  if (d.empty()) return res;

  const size_t n = d.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  // Average ranks doubled so ties like 1.5 stay integral.
  std::vector<std::int64_t> rank2(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    std::int64_t sum2 = 0;
    for (size_t r = i; r <= j; ++r) sum2 += static_cast<std::int64_t>(2 * (r + 1));
    std::int64_t avg2 = sum2 / static_cast<std::int64_t>(j - i + 1);
    for (size_t r = i; r <= j; ++r) rank2[order[r]] = avg2;
    i = j + 1;
  }
  std::int64_t w2 = 0, total2 = 0;
  for (size_t t = 0; t < n; ++t) {
    total2 += rank2[t];
    if (d[t] > 0) w2 += rank2[t];
  }
  res.w_plus = static_cast<double>(w2) / 2.0;

  if (static_cast<int>(n) <= exact_threshold) {
    // ways[s] = number of sign assignments whose positive doubled-rank sum
    // is s. Distribution is exact, so the p-value equals the full sign-flip
    // permutation test.
    std::vector<double> ways(static_cast<size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    for (size_t t = 0; t < n; ++t) {
      auto r = static_cast<size_t>(rank2[t]);
      for (size_t s = static_cast<size_t>(total2); s + 1 > r; --s)
        if (ways[s - r] > 0) ways[s] += ways[s - r];
    }
    // Two-sided: sign vectors at least as far from the mean as observed.
    // |2s - total2| keeps everything integral.
    std::int64_t obs_dev = std::abs(2 * w2 - total2);
    double count = 0, all = 0;
    for (size_t s = 0; s < ways.size(); ++s) {
      all += ways[s];
      if (std::abs(2 * static_cast<std::int64_t>(s) - total2) >= obs_dev) count += ways[s];
    }
    res.p_value = count / all;
    res.exact = true;
    return res;
  }

  // Normal approximation. Tie correction subtracts sum(t^3 - t)/48 from the
  // variance; continuity correction of 0.5 on the statistic.
  double nn = static_cast<double>(n);
  double mean = nn * (nn + 1) / 4.0;
  double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  i = 0;
  std::vector<double> sorted_abs(n);
  for (size_t t = 0; t < n; ++t) sorted_abs[t] = std::abs(d[order[t]]);
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && sorted_abs[j + 1] == sorted_abs[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  double dev = std::abs(res.w_plus - mean);
  double z = var > 0 ? (dev - 0.5) / std::sqrt(var) : 0.0;
  res.p_value = std::min(1.0, std::erfc(std::max(0.0, z) / std::sqrt(2.0)));
  return res;
}

// ---- per-session metric reports ----------------------------------------------

struct SessionMetrics {
  std::string session_id;
  int n_suggestions = 0;
  bool empty_suggestions = false;  // WER fell back to the empty-list convention
  std::map<std::string, double> values;  // "wer@3" -> 0.5, ...
};

struct MetricReport {
  std::vector<int> ks;
  std::vector<SessionMetrics> rows;
  std::map<std::string, double> aggregate;  // arithmetic means over rows
};

inline MetricReport evaluate(const std::vector<std::pair<std::string, std::string>>& refs,
                             const std::map<std::string, std::vector<std::string>>& suggestions,
                             const std::vector<int>& ks, const Embedder& embedder) {
  require(!ks.empty(), "evaluate: need at least one k");
  MetricReport report;
  report.ks = ks;
  static const std::vector<std::string> empty;
  for (const auto& [sid, ref] : refs) {
    auto it = suggestions.find(sid);
    const auto& hyps = it == suggestions.end() ? empty : it->second;
    SessionMetrics row;
    row.session_id = sid;
    row.n_suggestions = static_cast<int>(hyps.size());
    row.empty_suggestions = hyps.empty();
    for (int k : ks) {
      row.values["wer@" + std::to_string(k)] = wer_at_k(ref, hyps, k);
      row.values["bertf1@" + std::to_string(k)] = bertf1_at_k(ref, hyps, k, embedder);
      row.values["mrr@" + std::to_string(k)] = mrr_at_k(ref, hyps, k);
      row.values["s@" + std::to_string(k)] = success_at_k(ref, hyps, k);
    }
    report.rows.push_back(std::move(row));
  }
  if (!report.rows.empty()) {
    for (const auto& [key, unused] : report.rows.front().values) {
      double sum = 0;
      for (const auto& row : report.rows) sum += row.values.at(key);
      report.aggregate[key] = sum / static_cast<double>(report.rows.size());
    }
  }
  return report;
}

inline void write_report(std::ostream& out, const MetricReport& report) {
  out << "sessions = " << report.rows.size() << '\n';
  for (const auto& [key, value] : report.aggregate) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    out << key << " = " << buf << '\n';
  }
  out << "#session_id";
  if (!report.rows.empty())
    for (const auto& [key, unused] : report.rows.front().values) out << '\t' << key;
  out << "\tn_suggestions\n";
  for (const auto& row : report.rows) {
    out << row.session_id;
    char buf[64];
    for (const auto& [key, value] : row.values) {
      std::snprintf(buf, sizeof buf, "%.6f", value);
      out << '\t' << buf;
    }
    out << '\t' << row.n_suggestions << '\n';
  }
}

}  // namespace querymesh::metrics
