#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxprune/decoding.hpp"
#include "toxprune/io.hpp"
#include "toxprune/lm.hpp"
#include "toxprune/metrics.hpp"
#include "toxprune/prunelist.hpp"
#include "toxprune/tokenizer.hpp"

namespace toxprune {

/// End-to-end fraction-sweep configuration. Paths are resolved relative
/// to the config file's directory.
struct ExperimentConfig {
  std::string vocab_path;
  std::string merges_path;
  std::string wordlist_path;
  std::string prompts_path;
  std::string refs_path;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  std::vector<uint64_t> seeds{0};
  SamplingConfig sampling;
  int lm_order = 3;
  double lm_alpha = 0.1;
  std::string lm_corpus_path;
  double toxic_bias = 4.0;

  static ExperimentConfig load(const std::string& config_path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("MalformedFile", std::string("config json: ") + e.what());
    }
    namespace fs = std::filesystem;
    fs::path base = fs::path(config_path).parent_path();
    auto resolve = [&](const std::string& p) {
      fs::path path(p);
      return path.is_absolute() ? path.string() : (base / path).string();
    };

    ExperimentConfig c;
    try {
      c.vocab_path = resolve(j.at("vocab").get<std::string>());
      c.merges_path = resolve(j.at("merges").get<std::string>());
      c.wordlist_path = resolve(j.at("wordlist").get<std::string>());
      c.prompts_path = resolve(j.at("prompts").get<std::string>());
      c.refs_path = resolve(j.at("refs").get<std::string>());
      if (j.contains("fractions")) c.fractions = j["fractions"].get<std::vector<double>>();
      if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<uint64_t>>();
      const auto& s = j.at("sampling");
      c.sampling.strategy = strategy_from_name(s.value("strategy", std::string("top_k")));
      c.sampling.k = s.value("k", 50);
      c.sampling.p = s.value("p", 0.9);
      c.sampling.beam_width = s.value("beam_width", 4);
      c.sampling.max_len = s.value("max_len", 64);
      c.sampling.temperature = s.value("temperature", 1.0);
      c.sampling.rng_seed = s.value("rng_seed", uint64_t{0});
      c.sampling.length_normalize = s.value("length_normalize", true);
      const auto& lm = j.at("lm");
      c.lm_order = lm.value("order", 3);
      c.lm_alpha = lm.value("alpha", 0.1);
      c.lm_corpus_path = resolve(lm.at("corpus").get<std::string>());
      c.toxic_bias = lm.value("toxic_bias", 4.0);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("MalformedFile", std::string("config fields: ") + e.what());
    }
    for (double f : c.fractions)
      if (!(f > 0.0 && f <= 1.0))
        throw validation_error("InvalidFraction", "sweep fraction out of (0,1]");
    c.sampling.validate();
    return c;
  }
};

struct SweepRow {
  double fraction;
  MetricReport report;
};

inline std::vector<TokenIdSeq> tokenize_lines(const Vocabulary& v,
                                              const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileNotFound", "cannot open " + path);
  std::vector<TokenIdSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(encode(v, line));
  }
  return out;
}

inline std::vector<std::vector<std::string>> load_references(const std::string& path) {
  std::vector<std::vector<std::string>> refs;
  for (const auto& j : read_jsonl(path)) {
    if (j.is_object() && j.contains("references"))
      refs.push_back(j.at("references").get<std::vector<std::string>>());
    else if (j.is_array())
      refs.push_back(j.get<std::vector<std::string>>());
    else
      throw data_error("MalformedFile", "reference line is neither object nor array");
  }
  return refs;
}

/// Generate one record per prompt; prompt i uses rng_seed + i so records
/// differ per line while staying fully seed-determined.
inline std::vector<GenerationRecord> generate_batch(
    const LogitSource& source, const Vocabulary& v,
    const std::vector<TokenIdSeq>& prompts, const SamplingConfig& cfg,
    const PruneSet& prune) {
  std::vector<GenerationRecord> records;
  for (size_t i = 0; i < prompts.size(); ++i) {
    SamplingConfig per = cfg;
    per.rng_seed = cfg.rng_seed + i;
    GenerationRecord rec =
        cfg.strategy == Strategy::beam
            ? generate_beam(source, prompts[i], per, prune, v.eos, &v)
            : generate(source, prompts[i], per, prune, v.eos, &v);
    records.push_back(std::move(rec));
  }
  return records;
}

/// Fraction sweep: a fraction-0 baseline row plus each configured
/// fraction, against the bias-polluted LM.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                       const std::string& out_dir,
                                       uint64_t prune_seed) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Vocabulary v = load_vocab(cfg.vocab_path, cfg.merges_path);
  std::vector<std::string> words = load_wordlist(cfg.wordlist_path);
  WordExpansion expansion = expand_words(v, words);

  std::vector<TokenIdSeq> corpus = tokenize_lines(v, cfg.lm_corpus_path);
  auto base = std::make_shared<NgramLM>(
      NgramLM::train(corpus, cfg.lm_order, cfg.lm_alpha, v.size(), v.bos, v.eos));

  // bias only the canonical lowercase tokens: these are what a polluted
  // model would actually emit; capitalized-variant fragments stay neutral
  WordExpansion bias_expansion = expand_words(v, words, /*include_capitalized=*/false);
  PruneSet bias_full = build_prune_set(bias_expansion, 1.0, prune_seed, v);
  BiasWrapper toxic_lm(base, bias_full.ids, cfg.toxic_bias);

  std::vector<TokenIdSeq> prompts = tokenize_lines(v, cfg.prompts_path);
  std::vector<std::vector<std::string>> refs = load_references(cfg.refs_path);
  if (prompts.size() != refs.size())
    throw data_error("LengthMismatch",
                     std::to_string(prompts.size()) + " prompts vs " +
                         std::to_string(refs.size()) + " references");

  std::vector<double> fractions{0.0};
  fractions.insert(fractions.end(), cfg.fractions.begin(), cfg.fractions.end());

  std::vector<SweepRow> rows;
  std::string summary = std::string(kSummaryCsvHeader) + "\n";
  for (double f : fractions) {
    PruneSet prune;  // fraction 0 baseline: nothing banned
    if (f > 0.0) prune = build_prune_set(expansion, f, prune_seed, v);

    std::vector<GenerationRecord> records =
        generate_batch(toxic_lm, v, prompts, cfg.sampling, prune);

    std::string tag = format_double(f, 2);
    std::string gens;
    EvalCorpus corpus_eval;
    for (size_t i = 0; i < records.size(); ++i) {
      gens += record_to_json(records[i]).dump() + "\n";
      corpus_eval.items.push_back({records[i].output_text, refs[i]});
    }
    atomic_write((fs::path(out_dir) / ("gens_f" + tag + ".jsonl")).string(), gens);
    if (f > 0.0)
      save_prune_set(prune, (fs::path(out_dir) / ("pruneset_f" + tag + ".json")).string());

    MetricReport report = evaluate(corpus_eval, words);
    atomic_write((fs::path(out_dir) / ("report_f" + tag + ".json")).string(),
                 report_to_json(report).dump(2) + "\n");
    summary += report_csv_row(f, report) + "\n";
    rows.push_back({f, report});
  }
  atomic_write((fs::path(out_dir) / "summary.csv").string(), summary);
  return rows;
}

}  // namespace toxprune
