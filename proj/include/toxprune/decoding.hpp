#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "toxprune/errors.hpp"
#include "toxprune/lm.hpp"
#include "toxprune/prunelist.hpp"
#include "toxprune/tokenizer.hpp"

namespace toxprune {

enum class Strategy { greedy, top_k, top_p, beam };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::top_k: return "top_k";
    case Strategy::top_p: return "top_p";
    case Strategy::beam: return "beam";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "greedy") return Strategy::greedy;
  if (name == "top_k") return Strategy::top_k;
  if (name == "top_p") return Strategy::top_p;
  if (name == "beam") return Strategy::beam;
  throw validation_error("InvalidStrategy", "unknown strategy '" + name + "'");
}

struct SamplingConfig {
  Strategy strategy = Strategy::top_k;
  int k = 50;
  double p = 0.9;
  int beam_width = 4;
  int max_len = 64;
  double temperature = 1.0;
  uint64_t rng_seed = 0;
  bool length_normalize = true;

  void validate() const {
    if (max_len < 1) throw validation_error("InvalidConfig", "max_len must be >= 1");
    if (!(temperature > 0.0))
      throw validation_error("InvalidConfig", "temperature must be > 0");
    if (strategy == Strategy::top_k && k < 1)
      throw validation_error("InvalidConfig", "k must be >= 1");
    if (strategy == Strategy::top_p && !(p > 0.0 && p <= 1.0))
      throw validation_error("InvalidConfig", "p must be in (0,1]");
    if (strategy == Strategy::beam && beam_width < 1)
      throw validation_error("InvalidConfig", "beam_width must be >= 1");
  }
};

/// Probability vector over the full vocabulary; zero outside `support`.
struct MaskedDistribution {
  std::vector<double> probs;
  std::vector<TokenId> support;  // ascending
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Eq-(2) mechanism: banned entries go to -inf before any truncation,
/// so they receive exactly zero probability downstream.
inline LogitVector apply_prune_mask(LogitVector logits, const PruneSet& p) {
  for (TokenId id : p.ids) {
    if (id < 0 || id >= static_cast<TokenId>(logits.size()))
      throw validation_error("InvalidTokenId", "prune id " + std::to_string(id));
    logits[static_cast<size_t>(id)] = kNegInf;
  }
  bool any = false;
  for (double x : logits)
    if (x != kNegInf) { any = true; break; }
  if (!any) throw internal_error("AllMasked", "every logit masked");
  return logits;
}

namespace detail {

// Indices of unmasked logits sorted by (logit desc, id asc).
inline std::vector<TokenId> ranked_unmasked(const LogitVector& logits) {
  std::vector<TokenId> idx;
  for (TokenId i = 0; i < static_cast<TokenId>(logits.size()); ++i)
    if (logits[static_cast<size_t>(i)] != kNegInf) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](TokenId a, TokenId b) {
    double la = logits[static_cast<size_t>(a)], lb = logits[static_cast<size_t>(b)];
    if (la != lb) return la > lb;
    return a < b;
  });
  return idx;
}

inline MaskedDistribution softmax_over(const LogitVector& logits,
                                       const std::vector<TokenId>& kept,
                                       double temperature) {
  MaskedDistribution d;
  d.probs.assign(logits.size(), 0.0);
  d.support.assign(kept.begin(), kept.end());
  std::sort(d.support.begin(), d.support.end());
  double mx = kNegInf;
  for (TokenId id : kept) mx = std::max(mx, logits[static_cast<size_t>(id)] / temperature);
  double z = 0.0;
  for (TokenId id : kept) {
    double e = std::exp(logits[static_cast<size_t>(id)] / temperature - mx);
    d.probs[static_cast<size_t>(id)] = e;
    z += e;
  }
  for (TokenId id : kept) d.probs[static_cast<size_t>(id)] /= z;
  return d;
}

}  // namespace detail

/// Keep the k highest unmasked logits (ties toward the lower id),
/// softmax at `temperature`, zero elsewhere.
inline MaskedDistribution top_k_distribution(const LogitVector& logits, int k,
                                             double temperature = 1.0) {
  if (k < 1) throw validation_error("InvalidConfig", "k must be >= 1");
  std::vector<TokenId> ranked = detail::ranked_unmasked(logits);
  if (ranked.empty()) throw internal_error("NoCandidates", "no unmasked logits");
  if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<size_t>(k));
  return detail::softmax_over(logits, ranked, temperature);
}

/// Smallest probability-mass prefix reaching cumulative mass >= p,
/// renormalized.
inline MaskedDistribution top_p_distribution(const LogitVector& logits, double p,
                                             double temperature = 1.0) {
  if (!(p > 0.0 && p <= 1.0))
    throw validation_error("InvalidConfig", "p must be in (0,1]");
  std::vector<TokenId> ranked = detail::ranked_unmasked(logits);
  if (ranked.empty()) throw internal_error("NoCandidates", "no unmasked logits");
  MaskedDistribution full = detail::softmax_over(logits, ranked, temperature);
  std::vector<TokenId> kept;
  double cum = 0.0;
  for (TokenId id : ranked) {
    kept.push_back(id);
    cum += full.probs[static_cast<size_t>(id)];
    if (cum >= p - 1e-12) break;
  }
  return detail::softmax_over(logits, kept, temperature);
}

/// Seeded RNG with a platform-stable unit-interval mapping.
class SampleRng {
public:
  explicit SampleRng(uint64_t seed) : engine_(seed) {}
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF draw over ascending token ids.
inline TokenId sample_next(const MaskedDistribution& d, SampleRng& rng) {
  double u = rng.next_unit();
  double cum = 0.0;
  for (TokenId id : d.support) {
    cum += d.probs[static_cast<size_t>(id)];
    if (u < cum) return id;
  }
  return d.support.back();
}

struct GenerationRecord {
  TokenIdSeq prompt_ids;
  TokenIdSeq output_ids;  // eos excluded
  std::string output_text;
  SamplingConfig config;
  std::string pruneset_fingerprint;
  std::vector<int> per_step_support_size;
};

namespace detail {

inline MaskedDistribution strategy_distribution(const LogitVector& masked,
                                                const SamplingConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::greedy:
      return top_k_distribution(masked, 1, cfg.temperature);
    case Strategy::top_k:
      return top_k_distribution(masked, cfg.k, cfg.temperature);
    case Strategy::top_p:
      return top_p_distribution(masked, cfg.p, cfg.temperature);
    case Strategy::beam:
      break;
  }
  throw validation_error("InvalidStrategy", "generate() does not take beam");
}

}  // namespace detail

/// Autoregressive loop: score, mask, strategy filter, sample; stops at
/// eos or max_len. Greedy is the k=1 case with low-id tie breaking.
inline GenerationRecord generate(const LogitSource& source, const TokenIdSeq& prompt,
                                 const SamplingConfig& cfg, const PruneSet& prune,
                                 TokenId eos, const Vocabulary* vocab_for_text = nullptr) {
  cfg.validate();
  if (cfg.strategy == Strategy::beam)
    throw validation_error("InvalidStrategy", "use beam_search() for beam decoding");

  GenerationRecord rec;
  rec.prompt_ids = prompt;
  rec.config = cfg;
  rec.pruneset_fingerprint = prune.fingerprint();

  SampleRng rng(cfg.rng_seed);
  TokenIdSeq prefix = prompt;
  for (int step = 0; step < cfg.max_len; ++step) {
    LogitVector masked = apply_prune_mask(source.score(prefix), prune);
    MaskedDistribution d = detail::strategy_distribution(masked, cfg);
    rec.per_step_support_size.push_back(static_cast<int>(d.support.size()));
    TokenId next = sample_next(d, rng);
    if (next == eos) break;
    rec.output_ids.push_back(next);
    prefix.push_back(next);
  }
  if (vocab_for_text) rec.output_text = decode(*vocab_for_text, rec.output_ids);
  return rec;
}

struct BeamHypothesis {
  TokenIdSeq ids;  // generated tokens; includes eos when finished
  double logprob = 0.0;
  bool finished = false;
};

namespace detail {

inline double beam_rank_score(const BeamHypothesis& h, bool length_normalize) {
  size_t len = std::max<size_t>(1, h.ids.size());
  return length_normalize ? h.logprob / static_cast<double>(len) : h.logprob;
}

inline bool beam_better(const BeamHypothesis& a, const BeamHypothesis& b,
                        bool length_normalize) {
  double sa = beam_rank_score(a, length_normalize);
  double sb = beam_rank_score(b, length_normalize);
  if (sa != sb) return sa > sb;
  return a.ids < b.ids;
}

}  // namespace detail

/// Beam search over the masked, renormalized distribution. Hypotheses
/// reaching eos leave the active beam, which shrinks by one each time;
/// search stops when the beam is empty or max_len is hit. Unfinished
/// hypotheses at max_len still compete in the final ranking.
inline std::vector<BeamHypothesis> beam_search(const LogitSource& source,
                                               const TokenIdSeq& prompt,
                                               const SamplingConfig& cfg,
                                               const PruneSet& prune, TokenId eos) {
  if (cfg.beam_width < 1)
    throw validation_error("InvalidConfig", "beam_width must be >= 1");
  if (cfg.max_len < 1)
    throw validation_error("InvalidConfig", "max_len must be >= 1");

  struct Candidate {
    TokenIdSeq ids;
    double logprob;
  };

  std::vector<BeamHypothesis> finished;
  std::vector<Candidate> active{{{}, 0.0}};

  for (int step = 0; step < cfg.max_len && !active.empty(); ++step) {
    int slots = cfg.beam_width - static_cast<int>(finished.size());
    if (slots <= 0) break;

    std::vector<Candidate> expanded;
    for (const auto& hyp : active) {
      TokenIdSeq prefix = prompt;
      prefix.insert(prefix.end(), hyp.ids.begin(), hyp.ids.end());
      LogitVector masked = apply_prune_mask(source.score(prefix), prune);
      std::vector<TokenId> support = detail::ranked_unmasked(masked);
      if (support.empty()) throw internal_error("NoCandidates", "empty beam support");
      MaskedDistribution d = detail::softmax_over(masked, support, cfg.temperature);
      for (TokenId id : support) {
        Candidate c{hyp.ids, hyp.logprob + std::log(d.probs[static_cast<size_t>(id)])};
        c.ids.push_back(id);
        expanded.push_back(std::move(c));
      }
    }
    std::sort(expanded.begin(), expanded.end(), [](const Candidate& a, const Candidate& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return a.ids < b.ids;
    });
    if (static_cast<int>(expanded.size()) > slots)
      expanded.resize(static_cast<size_t>(slots));

    active.clear();
    for (auto& c : expanded) {
      if (c.ids.back() == eos) {
        finished.push_back({std::move(c.ids), c.logprob, true});
      } else {
        active.push_back(std::move(c));
      }
    }
  }
  for (auto& c : active) finished.push_back({std::move(c.ids), c.logprob, false});

  std::sort(finished.begin(), finished.end(),
            [&](const BeamHypothesis& a, const BeamHypothesis& b) {
              return detail::beam_better(a, b, cfg.length_normalize);
            });
  return finished;
}

/// Wrap the best beam hypothesis as a GenerationRecord; support sizes
/// are recomputed along the winning path.
inline GenerationRecord generate_beam(const LogitSource& source, const TokenIdSeq& prompt,
                                      const SamplingConfig& cfg, const PruneSet& prune,
                                      TokenId eos,
                                      const Vocabulary* vocab_for_text = nullptr) {
  std::vector<BeamHypothesis> hyps = beam_search(source, prompt, cfg, prune, eos);
  GenerationRecord rec;
  rec.prompt_ids = prompt;
  rec.config = cfg;
  rec.pruneset_fingerprint = prune.fingerprint();
  if (!hyps.empty()) {
    const BeamHypothesis& best = hyps.front();
    TokenIdSeq prefix = prompt;
    for (TokenId id : best.ids) {
      LogitVector masked = apply_prune_mask(source.score(prefix), prune);
      int sz = 0;
      for (double x : masked)
        if (x != kNegInf) ++sz;
      rec.per_step_support_size.push_back(sz);
      if (id != eos) rec.output_ids.push_back(id);
      prefix.push_back(id);
    }
  }
  if (vocab_for_text) rec.output_text = decode(*vocab_for_text, rec.output_ids);
  return rec;
}

}  // namespace toxprune
