#pragma once

// Scoring toolkit:
//   * span-extraction precision/recall/F1 with partial credit (text overlap,
//     level agreement, type-embedding similarity) and greedy one-to-one
//     matching;
//   * generation metrics over token vectors: BLEU-N (uniform weights, clipped
//     counts, brevity penalty), METEOR (exact unigram alignment, 10PR/(R+9P),
//     chunk penalty 0.5*(ch/m)^3) and ROUGE-L (LCS F, beta = 1);
//   * residual leakage, utility loss and group reward normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "maskgate/corpus.hpp"
#include "maskgate/taxonomy.hpp"
#include "maskgate/text.hpp"

namespace maskgate {

// --- type embedding -----------------------------------------------------------

class TypeEmbedder {
 public:
  virtual ~TypeEmbedder() = default;
  virtual std::vector<double> embed(std::string_view label) const = 0;
};

// Character-trigram term frequencies over the case-folded label, padded with
// "##" at both ends, hashed (FNV-1a) into a fixed-width vector. Deterministic
// and dependency-free; cosine of a label with itself is exactly 1.
class TrigramEmbedder final : public TypeEmbedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 384) : dim_(dim) {}

  std::vector<double> embed(std::string_view label) const override {
    std::vector<double> v(dim_, 0.0);
    std::string s = "##";
    for (char c : label) s.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    s += "##";
    if (s.size() < 3) return v;
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
      std::uint64_t h = 1469598103934665603ull;  // FNV-1a, explicit for portability
      for (std::size_t k = 0; k < 3; ++k) {
        h ^= static_cast<unsigned char>(s[i + k]);
        h *= 1099511628211ull;
      }
      v[h % dim_] += 1.0;
    }
    return v;
  }

 private:
  std::size_t dim_;
};

inline const TypeEmbedder& default_type_embedder() {
  static const TrigramEmbedder instance;
  return instance;
}

// Cosine similarity clamped to [0,1]; zero vectors score 0.
inline double cosine01(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine01: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

// --- span text scoring -----------------------------------------------------------

// Length of the longest common contiguous token run between two sequences.
inline std::size_t longest_common_run(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

// Exact match is always 1. Strict types get no partial credit. Otherwise a
// token-level F1 over the longest common contiguous run.
inline double text_score(std::string_view pred, std::string_view gold, bool strict) {
  if (pred == gold) return 1.0;
  if (strict) return 0.0;
  auto tp = tokenize(pred);
  auto tg = tokenize(gold);
  if (tp.empty() || tg.empty()) return 0.0;
  auto l = static_cast<double>(longest_common_run(tp, tg));
  if (l == 0) return 0.0;
  double p = l / static_cast<double>(tp.size());
  double r = l / static_cast<double>(tg.size());
  return 2 * p * r / (p + r);
}

// --- extraction scoring ------------------------------------------------------------

struct MatchedPair {
  std::size_t pred_index = 0;
  std::size_t gold_index = 0;
  double text = 0, level = 0, type = 0, total = 0;
};

struct ExtractionScore {
  double precision = 0, recall = 0, f1 = 0;
  std::vector<MatchedPair> pairs;
  std::size_t n_pred = 0, n_gold = 0;
};

// Pair score = mean(text overlap, exact level agreement, clamped cosine of
// type embeddings). Matching is greedy: repeatedly take the highest-scoring
// unmatched pair (ties: lower pred index, then lower gold index) while the
// best score is positive. P sums matched totals over predictions, R over
// golds. Both sides empty scores 1; exactly one side empty scores 0.
inline ExtractionScore score_extraction(const std::vector<PrivacyItem>& pred,
                                        const std::vector<PrivacyItem>& gold,
                                        const TypeEmbedder& emb = default_type_embedder(),
                                        const Taxonomy& tax = Taxonomy::canonical()) {
  ExtractionScore out;
  out.n_pred = pred.size();
  out.n_gold = gold.size();
  if (pred.empty() && gold.empty()) {
    out.precision = out.recall = out.f1 = 1.0;
    return out;
  }
  if (pred.empty() || gold.empty()) return out;

  std::vector<std::vector<double>> type_sim(pred.size(), std::vector<double>(gold.size(), 0.0));
  {
    std::vector<std::vector<double>> pe, ge;
    pe.reserve(pred.size());
    ge.reserve(gold.size());
    for (const auto& p : pred) pe.push_back(emb.embed(p.privacy_type));
    for (const auto& g : gold) ge.push_back(emb.embed(g.privacy_type));
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t j = 0; j < gold.size(); ++j) type_sim[i][j] = cosine01(pe[i], ge[j]);
  }

  struct Cell {
    double text, level, type, total;
  };
  std::vector<std::vector<Cell>> score(pred.size(), std::vector<Cell>(gold.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      bool strict = tax.is_strict(gold[j].privacy_type);
      double t = text_score(pred[i].original_text, gold[j].original_text, strict);
      double l = pred[i].privacy_level == gold[j].privacy_level ? 1.0 : 0.0;
      double ty = type_sim[i][j];
      score[i][j] = {t, l, ty, (t + l + ty) / 3.0};
    }
  }

  std::vector<bool> pused(pred.size(), false), gused(gold.size(), false);
  double sum = 0;
  while (true) {
    double best = 0;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pused[i]) continue;
      for (std::size_t j = 0; j < gold.size(); ++j) {
        if (gused[j]) continue;
        if (score[i][j].total > best) {
          best = score[i][j].total;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found || best <= 0) break;
    pused[bi] = true;
    gused[bj] = true;
    sum += best;
    out.pairs.push_back({bi, bj, score[bi][bj].text, score[bi][bj].level, score[bi][bj].type, best});
  }

  out.precision = sum / static_cast<double>(pred.size());
  out.recall = sum / static_cast<double>(gold.size());
  out.f1 = (out.precision + out.recall) > 0
               ? 2 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// --- generation metrics --------------------------------------------------------------

using TokenSeq = std::vector<std::string>;

namespace detail {

inline std::map<std::vector<std::string_view>, int> ngram_counts(const TokenSeq& t, std::size_t n) {
  std::map<std::vector<std::string_view>, int> m;
  if (t.size() < n) return m;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::vector<std::string_view> g;
    g.reserve(n);
    for (std::size_t k = 0; k < n; ++k) g.emplace_back(t[i + k]);
    ++m[std::move(g)];
  }
  return m;
}

}  // namespace detail

// BLEU with uniform weights 1/N over orders 1..N, clipped n-gram precision and
// brevity penalty exp(1 - r/c) when c <= r. Returns 0 when the candidate is
// empty or any order has zero clipped matches.
inline double bleu_n(const TokenSeq& cand, const TokenSeq& ref, int max_n) {
  if (max_n < 1) throw std::invalid_argument("bleu_n: order must be >= 1");
  if (cand.empty()) return 0.0;
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    auto cc = detail::ngram_counts(cand, static_cast<std::size_t>(n));
    auto rc = detail::ngram_counts(ref, static_cast<std::size_t>(n));
    long total = 0, clipped = 0;
    for (const auto& [g, k] : cc) {
      total += k;
      auto it = rc.find(g);
      if (it != rc.end()) clipped += std::min(k, it->second);
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total)) / max_n;
  }
  double c = static_cast<double>(cand.size());
  double r = static_cast<double>(ref.size());
  double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

namespace detail {

// Greedy chunk alignment: repeatedly take the longest common contiguous block
// over still-unmatched positions (ties toward the leftmost candidate, then
// leftmost reference start). Always completes a maximum matching — while any
// word still has matchable occurrences free on both sides, a block of length
// >= 1 exists — so the block count is a valid upper bound on the minimum.
inline int greedy_chunks(const TokenSeq& cand, const TokenSeq& ref) {
  std::vector<bool> cu(cand.size(), false), ru(ref.size(), false);
  int chunks = 0;
  while (true) {
    std::size_t best_len = 0, best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        std::size_t len = 0;
        while (i + len < cand.size() && j + len < ref.size() && !cu[i + len] && !ru[j + len] &&
               cand[i + len] == ref[j + len])
          ++len;
        if (len > best_len) {
          best_len = len;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_len == 0) break;
    for (std::size_t k = 0; k < best_len; ++k) cu[best_i + k] = ru[best_j + k] = true;
    ++chunks;
  }
  return chunks;
}

struct ChunkSearch {
  const TokenSeq& cand;
  const TokenSeq& ref;
  int m = 0;
  int best = 0;
  std::vector<bool> ref_used;
  std::map<std::string_view, int> need;  // remaining matches per word
  std::map<std::string_view, std::vector<int>> slot_index;

  void run(std::size_t i, int prev_ref, int matched, int chunks) {
    if (chunks >= best) return;  // chunk count only grows along a path
    if (matched == m) {
      best = chunks;
      return;
    }
    if (i >= cand.size()) return;
    std::string_view w{cand[i]};
    auto need_it = need.find(w);
    int needed = need_it == need.end() ? 0 : need_it->second;
    // Option A: leave cand[i] unmatched, if enough later occurrences remain.
    if (needed == 0 || occurrences_after(w, i) >= needed) run(i + 1, -1, matched, chunks);
    if (needed > 0) {
      // Option B: match cand[i] to each free ref slot holding the same word.
      // The chunk-continuing slot goes first so good solutions bound early.
      int cont = prev_ref >= 0 ? prev_ref + 1 : -1;
      auto try_slot = [&](int j) {
        if (j < 0 || j >= static_cast<int>(ref.size()) || ref_used[static_cast<std::size_t>(j)])
          return;
        if (std::string_view{ref[static_cast<std::size_t>(j)]} != w) return;
        ref_used[static_cast<std::size_t>(j)] = true;
        --need_it->second;
        int add = (prev_ref >= 0 && j == prev_ref + 1) ? 0 : 1;
        run(i + 1, j, matched + 1, chunks + add);
        ++need_it->second;
        ref_used[static_cast<std::size_t>(j)] = false;
      };
      try_slot(cont);
      if (auto si = slot_index.find(w); si != slot_index.end())
        for (int j : si->second)
          if (j != cont) try_slot(j);
    }
  }

  int occurrences_after(std::string_view w, std::size_t i) const {
    int n = 0;
    for (std::size_t k = i + 1; k < cand.size(); ++k)
      if (std::string_view{cand[k]} == w) ++n;
    return n;
  }
};

// Minimum chunk count over all maximum unigram matchings. Exact for small
// inputs (branch-and-bound seeded with the greedy alignment); greedy beyond.
inline int min_chunks(const TokenSeq& cand, const TokenSeq& ref, int m) {
  int greedy = greedy_chunks(cand, ref);
  if (cand.size() > 20 || ref.size() > 64) return greedy;

  std::map<std::string_view, int> cc, rc;
  for (const auto& t : cand) ++cc[std::string_view(t)];
  for (const auto& t : ref) ++rc[std::string_view(t)];
  ChunkSearch s{cand, ref};
  s.m = m;
  s.best = greedy;
  for (const auto& [w, n] : cc) {
    auto it = rc.find(w);
    if (it != rc.end()) s.need[w] = std::min(n, it->second);
  }
  s.ref_used.assign(ref.size(), false);
  for (std::size_t j = 0; j < ref.size(); ++j)
    s.slot_index[std::string_view(ref[j])].push_back(static_cast<int>(j));
  s.run(0, -1, 0, 0);  // only strictly-better-than-greedy alignments survive pruning
  return s.best;
}

}  // namespace detail

// METEOR with exact unigram matches: m = sum over words of min(count in
// candidate, count in reference); F = 10PR/(R+9P); penalty = 0.5*(chunks/m)^3;
// score = F*(1-penalty). Zero matches score 0.
inline double meteor(const TokenSeq& cand, const TokenSeq& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::map<std::string_view, int> cc, rc;
  for (const auto& t : cand) ++cc[std::string_view(t)];
  for (const auto& t : ref) ++rc[std::string_view(t)];
  int m = 0;
  for (const auto& [w, n] : cc) {
    auto it = rc.find(w);
    if (it != rc.end()) m += std::min(n, it->second);
  }
  if (m == 0) return 0.0;
  int chunks = detail::min_chunks(cand, ref, m);
  double p = static_cast<double>(m) / static_cast<double>(cand.size());
  double r = static_cast<double>(m) / static_cast<double>(ref.size());
  double f = 10 * p * r / (r + 9 * p);
  double penalty = 0.5 * std::pow(static_cast<double>(chunks) / static_cast<double>(m), 3.0);
  return f * (1.0 - penalty);
}

// ROUGE-L: LCS-based F with beta = 1 (harmonic mean of LCS/|cand|, LCS/|ref|).
inline double rouge_l(const TokenSeq& cand, const TokenSeq& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  auto lcs = static_cast<double>(prev[ref.size()]);
  if (lcs == 0) return 0.0;
  double p = lcs / static_cast<double>(cand.size());
  double r = lcs / static_cast<double>(ref.size());
  return 2 * p * r / (p + r);
}

// --- aggregate metrics -----------------------------------------------------------------

// Fraction of gold items at or above the threshold whose original_text still
// appears verbatim in the sanitized text. No eligible items scores 0.
inline double residual_leakage(std::string_view sanitized, const std::vector<PrivacyItem>& gold,
                               PrivacyLevel threshold) {
  std::size_t eligible = 0, leaked = 0;
  for (const auto& g : gold) {
    if (g.privacy_level < threshold) continue;
    ++eligible;
    if (!g.original_text.empty() && sanitized.find(g.original_text) != std::string_view::npos)
      ++leaked;
  }
  if (eligible == 0) return 0.0;
  return static_cast<double>(leaked) / static_cast<double>(eligible);
}

// Drop in a utility metric relative to the unmasked ideal: always the ideal
// score minus the achieved one, so a degradation comes out positive.
inline double utility_loss(double u_ideal, double u_hat) { return u_ideal - u_hat; }

// Signed change as printed in comparison tables: value minus baseline, so a
// degradation comes out negative.
inline double score_delta(double baseline, double value) { return value - baseline; }

// Group-relative reward normalization: (r - mean)/std with population std.
// A zero-variance group normalizes to all zeros; an empty group is an error.
inline std::vector<double> group_normalize_rewards(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("group_normalize_rewards: empty group");
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  double sd = std::sqrt(var);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd == 0) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

}  // namespace maskgate
