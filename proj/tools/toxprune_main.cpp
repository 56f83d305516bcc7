// toxprune CLI: build prune sets, train toy LMs, generate, evaluate,
// and run the fraction sweep.

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "toxprune/toxprune.hpp"

namespace tp = toxprune;

namespace {

int exit_code_for(const tp::Error& e) {
  switch (e.kind()) {
    case tp::ErrorKind::validation: return 2;
    case tp::ErrorKind::data: return 3;
    case tp::ErrorKind::internal: return 4;
  }
  return 4;
}

struct SamplingFlags {
  std::string strategy = "top_k";
  int k = 50;
  double p = 0.9;
  int beam_width = 4;
  int max_len = 64;
  double temperature = 1.0;
  uint64_t seed = 0;
  bool no_length_normalize = false;

  tp::SamplingConfig to_config() const {
    tp::SamplingConfig cfg;
    cfg.strategy = tp::strategy_from_name(strategy);
    cfg.k = k;
    cfg.p = p;
    cfg.beam_width = beam_width;
    cfg.max_len = max_len;
    cfg.temperature = temperature;
    cfg.rng_seed = seed;
    cfg.length_normalize = !no_length_normalize;
    cfg.validate();
    return cfg;
  }
};

void add_sampling_flags(CLI::App* cmd, SamplingFlags& f) {
  cmd->add_option("--strategy", f.strategy, "greedy | top_k | top_p | beam");
  cmd->add_option("--k", f.k, "top-k window size");
  cmd->add_option("--p", f.p, "nucleus mass");
  cmd->add_option("--beam-width", f.beam_width, "beam width");
  cmd->add_option("--max-len", f.max_len, "max generated tokens");
  cmd->add_option("--temperature", f.temperature, "softmax temperature");
  cmd->add_option("--seed", f.seed, "sampling rng seed");
  cmd->add_flag("--no-length-normalize", f.no_length_normalize,
                "rank beam hypotheses by raw logprob");
}

int cmd_build_prunelist(const std::string& vocab, const std::string& merges,
                        const std::string& wordlist, double fraction, uint64_t seed,
                        const std::string& out) {
  tp::Vocabulary v = tp::load_vocab(vocab, merges);
  std::vector<std::string> words = tp::load_wordlist(wordlist);
  tp::WordExpansion expansion = tp::expand_words(v, words);
  tp::PruneSet p = tp::build_prune_set(expansion, fraction, seed, v);
  tp::save_prune_set(p, out);
  tp::CoverageReport cov = tp::coverage_report(p, expansion);
  std::cout << "subwords: " << p.full_size << "\n"
            << "pruned ids: " << p.ids.size() << "\n"
            << "dropped specials: " << p.dropped_special_count << "\n"
            << "coverage: " << tp::format_double(cov.coverage, 4) << " ("
            << cov.fully_pruned_words << "/" << cov.total_words << " words)\n";
  return 0;
}

int cmd_train_lm(const std::string& vocab, const std::string& merges,
                 const std::string& corpus, int order, double alpha,
                 const std::string& out) {
  tp::Vocabulary v = tp::load_vocab(vocab, merges);
  std::vector<tp::TokenIdSeq> seqs = tp::tokenize_lines(v, corpus);
  tp::NgramLM lm = tp::NgramLM::train(seqs, order, alpha, v.size(), v.bos, v.eos);
  lm.save(out);
  std::cout << "trained order-" << order << " model on " << seqs.size()
            << " sequences\n";
  return 0;
}

int cmd_generate(const std::string& vocab, const std::string& merges,
                 const std::string& model, const std::string& pruneset,
                 const std::string& prompts, const std::string& out,
                 const SamplingFlags& flags, const std::string& bias_wordlist,
                 double bias) {
  tp::Vocabulary v = tp::load_vocab(vocab, merges);
  auto lm = std::make_shared<tp::NgramLM>(tp::NgramLM::load(model));
  std::shared_ptr<const tp::LogitSource> source = lm;
  if (!bias_wordlist.empty()) {
    tp::WordExpansion exp =
        tp::expand_words(v, tp::load_wordlist(bias_wordlist));
    tp::PruneSet full = tp::build_prune_set(exp, 1.0, 0, v);
    source = std::make_shared<tp::BiasWrapper>(lm, full.ids, bias);
  }
  tp::PruneSet prune;
  if (!pruneset.empty()) prune = tp::load_prune_set(pruneset, v);

  std::vector<tp::TokenIdSeq> prompt_seqs = tp::tokenize_lines(v, prompts);
  std::vector<tp::GenerationRecord> records =
      tp::generate_batch(*source, v, prompt_seqs, flags.to_config(), prune);
  std::string lines;
  for (const auto& rec : records) lines += tp::record_to_json(rec).dump() + "\n";
  tp::atomic_write(out, lines);
  std::cout << records.size() << " records -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& gens, const std::string& refs,
             const std::string& wordlist, const std::string& out,
             const std::string& csv_out) {
  std::vector<nlohmann::json> gen_lines = tp::read_jsonl(gens);
  std::vector<std::vector<std::string>> ref_lists = tp::load_references(refs);
  if (gen_lines.size() != ref_lists.size())
    throw tp::validation_error("LengthMismatch",
                               std::to_string(gen_lines.size()) + " generations vs " +
                                   std::to_string(ref_lists.size()) + " references");
  tp::EvalCorpus corpus;
  for (size_t i = 0; i < gen_lines.size(); ++i) {
    std::string cand = gen_lines[i].contains("output_text")
                           ? gen_lines[i].at("output_text").get<std::string>()
                           : gen_lines[i].at("candidate").get<std::string>();
    corpus.items.push_back({cand, ref_lists[i]});
  }
  tp::MetricReport report = tp::evaluate(corpus, tp::load_wordlist(wordlist));
  std::string json = tp::report_to_json(report).dump(2) + "\n";
  if (!out.empty()) tp::atomic_write(out, json);
  std::cout << json;
  if (!csv_out.empty()) {
    tp::atomic_write(csv_out, std::string(tp::kSummaryCsvHeader) + "\n" +
                                  tp::report_csv_row(0.0, report) + "\n");
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  tp::ExperimentConfig cfg = tp::ExperimentConfig::load(config_path);
  bool first = true;
  for (uint64_t seed : cfg.seeds) {
    std::string dir = first ? out_dir : out_dir + "/seed_" + std::to_string(seed);
    std::vector<tp::SweepRow> rows = tp::run_sweep(cfg, dir, seed);
    std::cout << "seed " << seed << ":\n" << tp::kSummaryCsvHeader << "\n";
    for (const auto& row : rows)
      std::cout << tp::report_csv_row(row.fraction, row.report) << "\n";
    first = false;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ToxPrune: toxic subword pruning for constrained decoding"};
  app.require_subcommand(1);

  std::string vocab, merges, wordlist, corpus, model, pruneset, prompts, refs,
      gens, out, csv_out, config, bias_wordlist;
  double fraction = 1.0, alpha = 0.1, bias = 4.0;
  uint64_t seed = 0;
  int order = 3;
  SamplingFlags flags;

  auto* build = app.add_subcommand("build-prunelist", "expand a word list into a prune set");
  build->add_option("--vocab", vocab)->required();
  build->add_option("--merges", merges)->required();
  build->add_option("--wordlist", wordlist)->required();
  build->add_option("--fraction", fraction, "fraction of subwords to ban");
  build->add_option("--seed", seed, "selection shuffle seed");
  build->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train-lm", "train the toy n-gram model");
  train->add_option("--vocab", vocab)->required();
  train->add_option("--merges", merges)->required();
  train->add_option("--corpus", corpus)->required();
  train->add_option("--order", order);
  train->add_option("--alpha", alpha);
  train->add_option("--out", out)->required();

  auto* gen = app.add_subcommand("generate", "decode prompts under an optional prune set");
  gen->add_option("--vocab", vocab)->required();
  gen->add_option("--merges", merges)->required();
  gen->add_option("--model", model)->required();
  gen->add_option("--pruneset", pruneset);
  gen->add_option("--prompts", prompts)->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--bias-wordlist", bias_wordlist,
                  "wrap the model with a logit bias on these words' subwords");
  gen->add_option("--bias", bias, "logit offset for --bias-wordlist");
  add_sampling_flags(gen, flags);

  auto* ev = app.add_subcommand("eval", "score generations against references");
  ev->add_option("--gens", gens)->required();
  ev->add_option("--refs", refs)->required();
  ev->add_option("--wordlist", wordlist)->required();
  ev->add_option("--out", out);
  ev->add_option("--csv", csv_out);

  auto* sweep = app.add_subcommand("sweep", "run the fraction-sweep experiment");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (build->parsed())
      return cmd_build_prunelist(vocab, merges, wordlist, fraction, seed, out);
    if (train->parsed())
      return cmd_train_lm(vocab, merges, corpus, order, alpha, out);
    if (gen->parsed())
      return cmd_generate(vocab, merges, model, pruneset, prompts, out, flags,
                          bias_wordlist, bias);
    if (ev->parsed()) return cmd_eval(gens, refs, wordlist, out, csv_out);
    if (sweep->parsed()) return cmd_sweep(config, out);
  } catch (const tp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
