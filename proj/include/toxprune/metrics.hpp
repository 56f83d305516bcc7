#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toxprune/errors.hpp"
#include "toxprune/tokenizer.hpp"

namespace toxprune {

struct EvalItem {
  std::string candidate;
  std::vector<std::string> references;
};

struct EvalCorpus {
  std::vector<EvalItem> items;

  void validate() const {
    if (items.empty()) throw validation_error("EmptyCorpus", "no items");
    for (const auto& it : items)
      if (it.references.empty())
        throw validation_error("EmptyCorpus", "item without references");
  }
};

struct MetricReport {
  double bleu_1 = 0, bleu_2 = 0, bleu_3 = 0, bleu_4 = 0, bleu = 0;  // 0..100
  double rouge_1 = 0, rouge_2 = 0, rouge_l = 0;                     // 0..1
  double distinct_1 = 0, distinct_2 = 0;                            // 0..1
  double toxicity_rate = 0;                                         // 0..1
  int n_items = 0;
};

namespace metrics_detail {

// Shared metric tokenization: lowercase, whitespace split.
inline std::vector<std::string> tokenize(const std::string& s) {
  std::string lower = s;
  for (char& c : lower)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return detail::split_ws(lower);
}

inline std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& toks, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    counts[std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                    toks.begin() + static_cast<long>(i) + n)] += 1;
  return counts;
}

inline size_t lcs_length(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double f1(double precision, double recall) {
  double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

}  // namespace metrics_detail

/// Corpus-level (pooled) distinct n-gram ratio.
inline double distinct_n(const std::vector<std::string>& candidates, int n) {
  if (n < 1) throw validation_error("InvalidConfig", "n must be >= 1");
  std::set<std::vector<std::string>> distinct;
  size_t total = 0;
  for (const auto& c : candidates) {
    auto toks = metrics_detail::tokenize(c);
    if (static_cast<int>(toks.size()) < n) continue;
    for (size_t i = 0; i + n <= toks.size(); ++i) {
      distinct.insert(std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                               toks.begin() + static_cast<long>(i) + n));
      ++total;
    }
  }
  return static_cast<double>(distinct.size()) / static_cast<double>(std::max<size_t>(1, total));
}

struct BleuScores {
  std::vector<double> cumulative;  // cumulative[i] == bleu_{i+1}, scale 0..100
  double bleu = 0.0;               // == cumulative.back()
};

/// Corpus BLEU with modified n-gram precision, closest-reference brevity
/// penalty, and epsilon smoothing on zero precisions.
inline BleuScores bleu(const EvalCorpus& corpus, int max_n = 4) {
  corpus.validate();
  constexpr double kEpsilon = 1e-9;

  std::vector<int64_t> correct(static_cast<size_t>(max_n), 0);
  std::vector<int64_t> total(static_cast<size_t>(max_n), 0);
  int64_t cand_len = 0, ref_len = 0;

  for (const auto& item : corpus.items) {
    auto cand = metrics_detail::tokenize(item.candidate);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : item.references) refs.push_back(metrics_detail::tokenize(r));

    cand_len += static_cast<int64_t>(cand.size());
    // closest reference length; ties toward the shorter
    int64_t best_ref = static_cast<int64_t>(refs[0].size());
    for (const auto& r : refs) {
      int64_t rl = static_cast<int64_t>(r.size());
      int64_t cl = static_cast<int64_t>(cand.size());
      if (std::llabs(rl - cl) < std::llabs(best_ref - cl) ||
          (std::llabs(rl - cl) == std::llabs(best_ref - cl) && rl < best_ref))
        best_ref = rl;
    }
    ref_len += best_ref;

    for (int n = 1; n <= max_n; ++n) {
      auto cc = metrics_detail::ngram_counts(cand, n);
      std::map<std::vector<std::string>, int> max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, c] : metrics_detail::ngram_counts(r, n))
          max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : cc) {
        auto it = max_ref.find(g);
        correct[static_cast<size_t>(n - 1)] += std::min(c, it == max_ref.end() ? 0 : it->second);
        total[static_cast<size_t>(n - 1)] += c;
      }
    }
  }

  double bp = 1.0;
  if (cand_len == 0) bp = 0.0;
  else if (cand_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));

  std::vector<double> log_p(static_cast<size_t>(max_n));
  for (int n = 0; n < max_n; ++n) {
    double p = total[static_cast<size_t>(n)] > 0
                   ? static_cast<double>(correct[static_cast<size_t>(n)]) /
                         static_cast<double>(total[static_cast<size_t>(n)])
                   : 0.0;
    if (p <= 0.0) p = kEpsilon;
    log_p[static_cast<size_t>(n)] = std::log(p);
  }

  BleuScores out;
  double acc = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    acc += log_p[static_cast<size_t>(n - 1)];
    out.cumulative.push_back(100.0 * bp * std::exp(acc / n));
  }
  out.bleu = out.cumulative.back();
  return out;
}

struct RougeScores {
  double rouge_1 = 0, rouge_2 = 0, rouge_l = 0;
};

/// Per-item F1 against the best-matching reference, averaged.
inline RougeScores rouge(const EvalCorpus& corpus) {
  corpus.validate();
  RougeScores out;
  for (const auto& item : corpus.items) {
    auto cand = metrics_detail::tokenize(item.candidate);
    double best1 = 0, best2 = 0, bestl = 0;
    for (const auto& r : item.references) {
      auto ref = metrics_detail::tokenize(r);
      for (int n = 1; n <= 2; ++n) {
        auto cc = metrics_detail::ngram_counts(cand, n);
        auto rc = metrics_detail::ngram_counts(ref, n);
        int64_t overlap = 0, ctot = 0, rtot = 0;
        for (const auto& [g, c] : cc) {
          ctot += c;
          auto it = rc.find(g);
          if (it != rc.end()) overlap += std::min(c, it->second);
        }
        for (const auto& [g, c] : rc) rtot += c;
        double prec = ctot > 0 ? static_cast<double>(overlap) / ctot : 0.0;
        double rec = rtot > 0 ? static_cast<double>(overlap) / rtot : 0.0;
        double f = metrics_detail::f1(prec, rec);
        (n == 1 ? best1 : best2) = std::max(n == 1 ? best1 : best2, f);
      }
      size_t lcs = metrics_detail::lcs_length(cand, ref);
      double prec = cand.empty() ? 0.0 : static_cast<double>(lcs) / cand.size();
      double rec = ref.empty() ? 0.0 : static_cast<double>(lcs) / ref.size();
      bestl = std::max(bestl, metrics_detail::f1(prec, rec));
    }
    out.rouge_1 += best1;
    out.rouge_2 += best2;
    out.rouge_l += bestl;
  }
  double n = static_cast<double>(corpus.items.size());
  out.rouge_1 /= n;
  out.rouge_2 /= n;
  out.rouge_l /= n;
  return out;
}

namespace metrics_detail {

inline bool is_word_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '\'';
}

// Case-insensitive whole-word occurrence of `word` in `text`.
inline bool contains_word(const std::string& text, const std::string& word) {
  if (word.empty()) return false;
  std::string t = text, w = word;
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  size_t pos = 0;
  while ((pos = t.find(w, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_char(t[pos - 1]);
    size_t end = pos + w.size();
    bool right_ok = end >= t.size() || !is_word_char(t[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace metrics_detail

/// Fraction of candidates containing at least one listed word under
/// whole-word matching; the lexicon surrogate for model-based judging.
inline double lexical_toxicity(const std::vector<std::string>& candidates,
                               const std::vector<std::string>& words) {
  if (words.empty()) throw validation_error("EmptyWordList", "no toxicity lexicon");
  if (candidates.empty()) return 0.0;
  int hits = 0;
  for (const auto& c : candidates) {
    for (const auto& w : words) {
      if (metrics_detail::contains_word(c, w)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(candidates.size());
}

inline MetricReport evaluate(const EvalCorpus& corpus,
                             const std::vector<std::string>& toxic_words) {
  corpus.validate();
  MetricReport r;
  BleuScores b = bleu(corpus, 4);
  r.bleu_1 = b.cumulative[0];
  r.bleu_2 = b.cumulative[1];
  r.bleu_3 = b.cumulative[2];
  r.bleu_4 = b.cumulative[3];
  r.bleu = b.bleu;
  RougeScores rg = rouge(corpus);
  r.rouge_1 = rg.rouge_1;
  r.rouge_2 = rg.rouge_2;
  r.rouge_l = rg.rouge_l;
  std::vector<std::string> cands;
  for (const auto& it : corpus.items) cands.push_back(it.candidate);
  r.distinct_1 = distinct_n(cands, 1);
  r.distinct_2 = distinct_n(cands, 2);
  r.toxicity_rate = lexical_toxicity(cands, toxic_words);
  r.n_items = static_cast<int>(corpus.items.size());
  return r;
}

}  // namespace toxprune
