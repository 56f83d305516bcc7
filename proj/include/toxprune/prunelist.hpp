#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxprune/errors.hpp"
#include "toxprune/tokenizer.hpp"

namespace toxprune {

/// Banned token-id set with provenance. Immutable after construction.
struct PruneSet {
  std::set<TokenId> ids;
  std::vector<std::string> source_words;
  double fraction = 1.0;
  uint64_t selection_seed = 0;
  std::string vocab_fingerprint;
  int full_size = 0;  // distinct non-special subwords at fraction 1.0
  int dropped_special_count = 0;

  bool contains(TokenId id) const { return ids.count(id) != 0; }
  bool empty() const { return ids.empty(); }

  /// Identifies the set for generation records; empty sets hash to "none".
  std::string fingerprint() const {
    if (ids.empty()) return "none";
    std::string payload = vocab_fingerprint;
    for (TokenId id : ids) payload += "," + std::to_string(id);
    payload += "|" + std::to_string(fraction) + "|" + std::to_string(selection_seed);
    return detail::to_hex(detail::fnv1a64(payload));
  }
};

struct CoverageReport {
  int total_words = 0;
  int fully_pruned_words = 0;
  double coverage = 0.0;
  // word -> {pruned_subwords, total_subwords}
  std::map<std::string, std::pair<int, int>> per_word;
};

namespace detail {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void seeded_shuffle(std::vector<T>& v, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

/// Select ceil(fraction * N) of the N distinct subword ids, in seeded
/// shuffled order so that smaller fractions are prefixes of larger ones.
inline PruneSet build_prune_set(const WordExpansion& expansion, double fraction,
                                uint64_t seed, const Vocabulary& v) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw validation_error("InvalidFraction",
                           "fraction must be in (0,1], got " + std::to_string(fraction));
  if (expansion.empty()) throw validation_error("EmptyExpansion", "no expanded words");

  std::set<TokenId> distinct;
  int dropped = 0;
  for (const auto& [word, variants] : expansion) {
    for (const auto& seq : variants) {
      for (TokenId id : seq) {
        if (v.is_special(id)) {
          ++dropped;
        } else {
          distinct.insert(id);
        }
      }
    }
  }
  if (distinct.empty())
    throw validation_error("AllSpecialTokens", "expansion yields only special tokens");

  std::vector<TokenId> order(distinct.begin(), distinct.end());  // ascending
  detail::seeded_shuffle(order, seed);

  const int n = static_cast<int>(order.size());
  const int take = (fraction >= 1.0)
                       ? n
                       : static_cast<int>(std::ceil(fraction * n));

  PruneSet p;
  p.ids.insert(order.begin(), order.begin() + take);
  for (const auto& [word, variants] : expansion) p.source_words.push_back(word);
  p.fraction = fraction;
  p.selection_seed = seed;
  p.vocab_fingerprint = v.fingerprint;
  p.full_size = n;
  p.dropped_special_count = dropped;
  return p;
}

inline nlohmann::json prune_set_to_json(const PruneSet& p) {
  nlohmann::json j;
  j["ids"] = std::vector<TokenId>(p.ids.begin(), p.ids.end());  // sorted
  j["fraction"] = p.fraction;
  j["seed"] = p.selection_seed;
  j["vocab_fingerprint"] = p.vocab_fingerprint;
  j["full_size"] = p.full_size;
  j["source_words"] = p.source_words;
  j["dropped_special_count"] = p.dropped_special_count;
  return j;
}

inline void save_prune_set(const PruneSet& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("FileNotFound", "cannot write " + path);
  out << prune_set_to_json(p).dump(2) << "\n";
}

inline PruneSet load_prune_set(const std::string& path, const Vocabulary& v) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedFile", std::string("pruneset json: ") + e.what());
  }
  PruneSet p;
  try {
    std::vector<TokenId> ids = j.at("ids").get<std::vector<TokenId>>();
    p.ids.insert(ids.begin(), ids.end());
    p.fraction = j.at("fraction").get<double>();
    p.selection_seed = j.at("seed").get<uint64_t>();
    p.vocab_fingerprint = j.at("vocab_fingerprint").get<std::string>();
    p.full_size = j.at("full_size").get<int>();
    p.source_words = j.at("source_words").get<std::vector<std::string>>();
    p.dropped_special_count = j.value("dropped_special_count", 0);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedFile", std::string("pruneset fields: ") + e.what());
  }
  if (p.ids.empty())
    throw data_error("MalformedFile", "pruneset has no ids");
  if (p.vocab_fingerprint != v.fingerprint)
    throw data_error("FingerprintMismatch",
                     "pruneset built against a different vocabulary (" +
                         p.vocab_fingerprint + " vs " + v.fingerprint + ")");
  for (TokenId id : p.ids) {
    if (id < 0 || id >= v.size())
      throw data_error("MalformedFile", "id " + std::to_string(id) + " out of range");
    if (v.is_special(id))
      throw data_error("MalformedFile", "pruneset contains a special token");
  }
  return p;
}

/// A word counts as fully pruned iff every surface-variant tokenization
/// contains at least one banned id; one banned subword blocks canonical
/// generation of that form.
inline CoverageReport coverage_report(const PruneSet& p, const WordExpansion& expansion) {
  CoverageReport r;
  for (const auto& [word, variants] : expansion) {
    std::set<TokenId> word_ids;
    int pruned_subwords = 0;
    bool all_variants_blocked = !variants.empty();
    for (const auto& seq : variants) {
      bool blocked = false;
      for (TokenId id : seq) {
        word_ids.insert(id);
        if (p.contains(id)) blocked = true;
      }
      if (!blocked) all_variants_blocked = false;
    }
    for (TokenId id : word_ids)
      if (p.contains(id)) ++pruned_subwords;
    r.per_word[word] = {pruned_subwords, static_cast<int>(word_ids.size())};
    ++r.total_words;
    if (all_variants_blocked) ++r.fully_pruned_words;
  }
  r.coverage = r.total_words == 0
                   ? 0.0
                   : static_cast<double>(r.fully_pruned_words) / r.total_words;
  return r;
}

/// wordlist.txt: one word per line, '#' comments, blanks ignored.
inline std::vector<std::string> load_wordlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileNotFound", "cannot open " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line[0] == '#') continue;
    words.push_back(line);
  }
  return words;
}

}  // namespace toxprune
