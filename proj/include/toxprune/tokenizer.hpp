#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "toxprune/errors.hpp"

namespace toxprune {

using TokenId = int;
using TokenIdSeq = std::vector<TokenId>;

/// Character-level BPE vocabulary with an explicit end-of-word marker.
/// Immutable after load; all tokenizer operations are pure.
struct Vocabulary {
  std::vector<std::string> tokens;                   // index == token id
  std::vector<std::pair<std::string, std::string>> merges;  // rank == index
  std::string end_of_word_marker = "</w>";
  TokenId bos = -1;
  TokenId eos = -1;
  TokenId unk = -1;
  std::string fingerprint;  // hash of the vocab + merges file bytes

  std::unordered_map<std::string, TokenId> token_to_id;
  // merged pair -> rank
  std::map<std::pair<std::string, std::string>, int> merge_rank;

  int size() const { return static_cast<int>(tokens.size()); }

  bool is_special(TokenId id) const {
    return id == bos || id == eos || id == unk;
  }

  TokenId id_of(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? unk : it->second;
  }
};

namespace detail {

inline uint64_t fnv1a64(const std::string& data, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("FileNotFound", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Split on ASCII whitespace, dropping empty pieces.
inline std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// UTF-8 aware split of a word into single-codepoint symbols.
inline std::vector<std::string> split_chars(const std::string& word) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char c = static_cast<unsigned char>(word[i]);
    size_t len = 1;
    if (c >= 0xf0) len = 4;
    else if (c >= 0xe0) len = 3;
    else if (c >= 0xc0) len = 2;
    if (i + len > word.size()) len = 1;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

/// One applied merge step, for trace-based verification of rank order.
struct MergeStep {
  std::vector<std::string> symbols_before;
  int rank_applied;
};
using MergeTrace = std::vector<MergeStep>;

inline Vocabulary load_vocab(const std::string& vocab_path,
                             const std::string& merges_path) {
  const std::string vocab_bytes = detail::read_file(vocab_path);
  const std::string merges_bytes = detail::read_file(merges_path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(vocab_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("MalformedFile", std::string("vocab json: ") + e.what());
  }
  if (!j.is_object()) throw data_error("MalformedFile", "vocab must be a JSON object");

  Vocabulary v;
  std::map<int, std::string> by_id;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "__eow__") {
      if (!it.value().is_string())
        throw data_error("MalformedFile", "__eow__ must be a string");
      v.end_of_word_marker = it.value().get<std::string>();
      continue;
    }
    if (!it.value().is_number_integer())
      throw data_error("MalformedFile", "vocab entry for '" + it.key() + "' is not an integer");
    int id = it.value().get<int>();
    if (id < 0) throw data_error("NonContiguousIds", "negative id for '" + it.key() + "'");
    auto [pos, inserted] = by_id.emplace(id, it.key());
    if (!inserted)
      throw data_error("DuplicateToken",
                       "id " + std::to_string(id) + " assigned to both '" + pos->second +
                           "' and '" + it.key() + "'");
  }
  v.tokens.resize(by_id.size());
  int expect = 0;
  for (auto& [id, tok] : by_id) {
    if (id != expect)
      throw data_error("NonContiguousIds", "gap at id " + std::to_string(expect));
    v.tokens[id] = tok;
    ++expect;
  }
  for (int i = 0; i < v.size(); ++i) {
    auto [pos, inserted] = v.token_to_id.emplace(v.tokens[i], i);
    (void)pos;
    if (!inserted) throw data_error("DuplicateToken", "token '" + v.tokens[i] + "' repeated");
  }

  auto need = [&](const char* tok) {
    auto it = v.token_to_id.find(tok);
    if (it == v.token_to_id.end())
      throw data_error("MalformedFile", std::string("vocab missing required special ") + tok);
    return it->second;
  };
  v.bos = need("<bos>");
  v.eos = need("<eos>");
  v.unk = need("<unk>");

  // merges: "left right" per line, '#' comments ignored
  std::istringstream ms(merges_bytes);
  std::string line;
  while (std::getline(ms, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
      throw data_error("MalformedFile", "bad merge line: '" + line + "'");
    std::string left = line.substr(0, sp);
    std::string right = line.substr(sp + 1);
    if (!v.token_to_id.count(left + right))
      throw data_error("UnknownMergeSymbol", "merge result '" + left + right +
                                                 "' not in vocabulary");
    int rank = static_cast<int>(v.merges.size());
    v.merges.emplace_back(left, right);
    v.merge_rank.emplace(std::make_pair(left, right), rank);
  }

  v.fingerprint =
      detail::to_hex(detail::fnv1a64(merges_bytes, detail::fnv1a64(vocab_bytes)));
  return v;
}

/// BPE-encode a single word (no whitespace) into symbol strings by
/// repeatedly applying the lowest-rank applicable merge.
inline std::vector<std::string> encode_word_symbols(const Vocabulary& v,
                                                    const std::string& word,
                                                    MergeTrace* trace = nullptr) {
  std::vector<std::string> syms = detail::split_chars(word);
  if (syms.empty()) return syms;
  syms.back() += v.end_of_word_marker;
  while (syms.size() > 1) {
    int best_rank = -1;
    size_t best_pos = 0;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = v.merge_rank.find({syms[i], syms[i + 1]});
      if (it != v.merge_rank.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    if (trace) trace->push_back({syms, best_rank});
    syms[best_pos] += syms[best_pos + 1];
    syms.erase(syms.begin() + static_cast<long>(best_pos) + 1);
  }
  return syms;
}

/// Whitespace-split, per-word greedy BPE. Unknown symbols become unk;
/// no bos/eos are added.
inline TokenIdSeq encode(const Vocabulary& v, const std::string& text) {
  TokenIdSeq out;
  for (const auto& word : detail::split_ws(text)) {
    for (const auto& sym : encode_word_symbols(v, word)) {
      out.push_back(v.id_of(sym));
    }
  }
  return out;
}

inline std::string decode(const Vocabulary& v, const TokenIdSeq& seq) {
  std::string out;
  const std::string& eow = v.end_of_word_marker;
  for (TokenId id : seq) {
    if (id < 0 || id >= v.size())
      throw validation_error("InvalidTokenId", "id " + std::to_string(id));
    if (id == v.bos || id == v.eos) continue;
    std::string tok = v.tokens[id];
    size_t pos;
    while ((pos = tok.find(eow)) != std::string::npos) {
      tok.replace(pos, eow.size(), " ");
    }
    out += tok;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

/// word -> canonical tokenizations of each enabled surface variant
using WordExpansion = std::map<std::string, std::vector<TokenIdSeq>>;

/// Tokenize every word (lowercase form, plus first-letter-capitalized
/// when enabled). The union of IDs across variants defines the word's
/// subword set.
inline WordExpansion expand_words(const Vocabulary& v,
                                  const std::vector<std::string>& words,
                                  bool include_capitalized = true) {
  if (words.empty()) throw validation_error("EmptyWordList", "no words to expand");
  WordExpansion out;
  for (const auto& w : words) {
    if (w.empty()) throw validation_error("EmptyWordList", "blank word in list");
    std::string lower = w;
    for (char& c : lower)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    std::vector<std::string> variants{lower};
    if (include_capitalized && lower[0] >= 'a' && lower[0] <= 'z') {
      std::string cap = lower;
      cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
      if (cap != lower) variants.push_back(cap);
    }
    std::vector<TokenIdSeq> seqs;
    for (const auto& variant : variants) {
      seqs.push_back(encode(v, variant));
    }
    out[w] = std::move(seqs);
  }
  return out;
}

}  // namespace toxprune
