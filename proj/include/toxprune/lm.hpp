#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxprune/errors.hpp"
#include "toxprune/tokenizer.hpp"

namespace toxprune {

using LogitVector = std::vector<double>;

/// Abstract next-token scorer. Implementations are immutable after
/// construction and score() is a pure function of the prefix.
class LogitSource {
public:
  virtual ~LogitSource() = default;
  virtual int vocab_size() const = 0;
  virtual LogitVector score(const TokenIdSeq& prefix) const = 0;

protected:
  void check_prefix(const TokenIdSeq& prefix) const {
    for (TokenId id : prefix)
      if (id < 0 || id >= vocab_size())
        throw validation_error("InvalidTokenId", "prefix id " + std::to_string(id));
  }
};

/// Fixed-order n-gram model with add-alpha smoothing. Contexts are
/// (order-1)-tuples, bos-padded; every continuation has finite logit.
class NgramLM : public LogitSource {
public:
  using Context = std::vector<TokenId>;

  NgramLM(int order, double alpha, int vocab_size, TokenId bos, TokenId eos)
      : order_(order), alpha_(alpha), vocab_size_(vocab_size), bos_(bos), eos_(eos) {
    if (order < 1) throw validation_error("InvalidOrder", "order must be >= 1");
    if (!(alpha > 0.0)) throw validation_error("InvalidAlpha", "alpha must be > 0");
  }

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  int vocab_size() const override { return vocab_size_; }

  LogitVector score(const TokenIdSeq& prefix) const override {
    check_prefix(prefix);
    Context ctx = context_of(prefix);
    LogitVector logits(static_cast<size_t>(vocab_size_));
    auto it = counts_.find(ctx);
    const std::map<TokenId, int64_t>* next = it == counts_.end() ? nullptr : &it->second;
    int64_t total = 0;
    if (next)
      for (const auto& [id, c] : *next) total += c;
    const double denom = static_cast<double>(total) + alpha_ * vocab_size_;
    for (int id = 0; id < vocab_size_; ++id) {
      int64_t c = 0;
      if (next) {
        auto jt = next->find(id);
        if (jt != next->end()) c = jt->second;
      }
      logits[static_cast<size_t>(id)] = std::log((c + alpha_) / denom);
    }
    return logits;
  }

  const std::map<Context, std::map<TokenId, int64_t>>& counts() const { return counts_; }

  /// Pads each sequence with order-1 bos tokens and terminates with eos.
  static NgramLM train(const std::vector<TokenIdSeq>& corpus, int order, double alpha,
                       int vocab_size, TokenId bos, TokenId eos) {
    if (corpus.empty()) throw validation_error("EmptyCorpus", "no training sequences");
    NgramLM lm(order, alpha, vocab_size, bos, eos);
    for (const auto& seq : corpus) {
      TokenIdSeq padded(static_cast<size_t>(order - 1), bos);
      padded.insert(padded.end(), seq.begin(), seq.end());
      padded.push_back(eos);
      for (size_t t = static_cast<size_t>(order - 1); t < padded.size(); ++t) {
        Context ctx(padded.begin() + static_cast<long>(t) - (order - 1),
                    padded.begin() + static_cast<long>(t));
        lm.counts_[ctx][padded[t]] += 1;
      }
    }
    return lm;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["order"] = order_;
    j["alpha"] = alpha_;
    j["vocab_size"] = vocab_size_;
    j["bos"] = bos_;
    j["eos"] = eos_;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [ctx, next] : counts_) {
      std::string key;
      for (size_t i = 0; i < ctx.size(); ++i) {
        if (i) key += ",";
        key += std::to_string(ctx[i]);
      }
      nlohmann::json inner = nlohmann::json::object();
      for (const auto& [id, c] : next) inner[std::to_string(id)] = c;
      counts[key] = std::move(inner);
    }
    j["counts"] = std::move(counts);
    return j;
  }

  static NgramLM from_json(const nlohmann::json& j) {
    NgramLM lm(j.at("order").get<int>(), j.at("alpha").get<double>(),
               j.at("vocab_size").get<int>(), j.at("bos").get<TokenId>(),
               j.at("eos").get<TokenId>());
    for (auto it = j.at("counts").begin(); it != j.at("counts").end(); ++it) {
      Context ctx;
      const std::string& key = it.key();
      if (!key.empty()) {
        size_t pos = 0;
        while (pos <= key.size()) {
          size_t comma = key.find(',', pos);
          std::string piece =
              key.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
          ctx.push_back(std::stoi(piece));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
      }
      if (static_cast<int>(ctx.size()) != lm.order_ - 1)
        throw data_error("MalformedFile", "context '" + key + "' has wrong length");
      auto& next = lm.counts_[ctx];
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        int64_t c = jt.value().get<int64_t>();
        if (c < 1) throw data_error("MalformedFile", "count below 1");
        next[std::stoi(jt.key())] = c;
      }
    }
    return lm;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("FileNotFound", "cannot write " + path);
    out << to_json().dump(2) << "\n";
  }

  static NgramLM load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("MalformedFile", std::string("ngram json: ") + e.what());
    }
    return from_json(j);
  }

private:
  Context context_of(const TokenIdSeq& prefix) const {
    Context ctx(static_cast<size_t>(order_ - 1), bos_);
    size_t n = std::min(prefix.size(), static_cast<size_t>(order_ - 1));
    for (size_t i = 0; i < n; ++i)
      ctx[ctx.size() - n + i] = prefix[prefix.size() - n + i];
    return ctx;
  }

  int order_;
  double alpha_;
  int vocab_size_;
  TokenId bos_;
  TokenId eos_;
  std::map<Context, std::map<TokenId, int64_t>> counts_;
};

/// Table-driven scorer for oracle tests: exact vectors per prefix,
/// with a default vector for misses.
class ScriptedLM : public LogitSource {
public:
  ScriptedLM(LogitVector default_logits,
             std::map<TokenIdSeq, LogitVector> table = {})
      : default_(std::move(default_logits)), table_(std::move(table)) {
    for (const auto& [prefix, vec] : table_) {
      if (vec.size() != default_.size())
        throw validation_error("InvalidTokenId", "scripted vector length mismatch");
    }
  }

  void set(const TokenIdSeq& prefix, LogitVector logits) {
    if (logits.size() != default_.size())
      throw validation_error("InvalidTokenId", "scripted vector length mismatch");
    table_[prefix] = std::move(logits);
  }

  int vocab_size() const override { return static_cast<int>(default_.size()); }

  LogitVector score(const TokenIdSeq& prefix) const override {
    check_prefix(prefix);
    auto it = table_.find(prefix);
    return it == table_.end() ? default_ : it->second;
  }

private:
  LogitVector default_;
  std::map<TokenIdSeq, LogitVector> table_;
};

/// Adds a constant logit offset at the given ids; emulates a model
/// whose distribution is polluted toward those tokens.
class BiasWrapper : public LogitSource {
public:
  BiasWrapper(std::shared_ptr<const LogitSource> inner, std::set<TokenId> biased_ids,
              double bias)
      : inner_(std::move(inner)), biased_ids_(std::move(biased_ids)), bias_(bias) {
    for (TokenId id : biased_ids_)
      if (id < 0 || id >= inner_->vocab_size())
        throw validation_error("InvalidTokenId", "biased id " + std::to_string(id));
  }

  int vocab_size() const override { return inner_->vocab_size(); }

  LogitVector score(const TokenIdSeq& prefix) const override {
    LogitVector logits = inner_->score(prefix);
    for (TokenId id : biased_ids_) logits[static_cast<size_t>(id)] += bias_;
    return logits;
  }

private:
  std::shared_ptr<const LogitSource> inner_;
  std::set<TokenId> biased_ids_;
  double bias_;
};

}  // namespace toxprune
