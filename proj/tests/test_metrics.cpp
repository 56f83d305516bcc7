#include <algorithm>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace toxprune;
namespace tu = testutil;

TEST_CASE("distinct_n hand fixtures") {
  CHECK(distinct_n({"a b a"}, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(distinct_n({"a b", "a b"}, 2) == doctest::Approx(0.5));
  CHECK(distinct_n({"w x", "y z"}, 1) == 1.0);
  CHECK(distinct_n({}, 1) == 0.0);
  CHECK(distinct_n({"a"}, 2) == 0.0);  // no bigram exists
  // tokenization lowercases
  CHECK(distinct_n({"A a"}, 1) == doctest::Approx(0.5));
}

TEST_CASE("bleu identity corpus scores 100") {
  EvalCorpus corpus;
  corpus.items = {{"the cat sat on the mat", {"the cat sat on the mat"}},
                  {"a long sentence with many words", {"a long sentence with many words"}}};
  BleuScores b = bleu(corpus);
  for (double s : b.cumulative) CHECK(s == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("bleu with no unigram overlap hits the epsilon floor") {
  EvalCorpus corpus;
  corpus.items = {{"x y z", {"a b c"}}};
  BleuScores b = bleu(corpus);
  CHECK(b.cumulative[0] < 1e-5);
  CHECK(b.bleu < 1e-5);
}

TEST_CASE("bleu_n is non-increasing in n") {
  EvalCorpus corpus;
  corpus.items = {{"the cat sat on the mat today", {"the cat sat on a mat today"}},
                  {"i like green eggs and ham", {"i like eggs and green ham"}}};
  BleuScores b = bleu(corpus);
  for (size_t i = 1; i < b.cumulative.size(); ++i)
    CHECK(b.cumulative[i] <= b.cumulative[i - 1] + 1e-12);
}

TEST_CASE("rouge hand fixtures") {
  EvalCorpus identical;
  identical.items = {{"a b c", {"a b c"}}};
  RougeScores r = rouge(identical);
  CHECK(r.rouge_1 == doctest::Approx(1.0));
  CHECK(r.rouge_2 == doctest::Approx(1.0));
  CHECK(r.rouge_l == doctest::Approx(1.0));

  EvalCorpus lcs_case;
  lcs_case.items = {{"a c", {"a b c"}}};
  RougeScores r2 = rouge(lcs_case);
  // LCS "a c": precision 1, recall 2/3, F1 = 0.8
  CHECK(r2.rouge_l == doctest::Approx(0.8).epsilon(1e-12));

  EvalCorpus disjoint;
  disjoint.items = {{"x y", {"a b"}}};
  RougeScores r3 = rouge(disjoint);
  CHECK(r3.rouge_1 == 0.0);
  CHECK(r3.rouge_2 == 0.0);
  CHECK(r3.rouge_l == 0.0);
}

TEST_CASE("rouge picks the best-matching reference per item") {
  EvalCorpus corpus;
  corpus.items = {{"a b c", {"x y z", "a b c"}}};
  RougeScores r = rouge(corpus);
  CHECK(r.rouge_l == doctest::Approx(1.0));
}

TEST_CASE("lexical toxicity whole-word matching") {
  std::vector<std::string> words{"fu", "damn"};
  CHECK(lexical_toxicity({"clean text here"}, words) == 0.0);
  CHECK(lexical_toxicity({"well damn it", "oh FU then"}, words) == 1.0);
  CHECK(lexical_toxicity({"FUmble recovered"}, words) == 0.0);  // substring, no hit
  CHECK(lexical_toxicity({"damn!"}, words) == 1.0);             // punctuation boundary
  CHECK(lexical_toxicity({"damn's"}, words) == 0.0);            // apostrophe binds
  CHECK_THROWS_WITH_AS(lexical_toxicity({"x"}, {}),
                       doctest::Contains("EmptyWordList"), Error);
}

TEST_CASE("toxicity is monotone in the word list") {
  std::vector<std::string> cands{"a damn day", "sunny weather", "you fool"};
  double small = lexical_toxicity(cands, {"damn"});
  double big = lexical_toxicity(cands, {"damn", "fool"});
  CHECK(big >= small);
}

TEST_CASE("metrics are permutation-invariant over items") {
  EvalCorpus corpus;
  corpus.items = {{"the cat sat", {"the cat sat down"}},
                  {"a damn fine day", {"a very fine day"}},
                  {"hello world again", {"hello world"}}};
  EvalCorpus shuffled = corpus;
  std::swap(shuffled.items[0], shuffled.items[2]);

  std::vector<std::string> words{"damn"};
  MetricReport a = evaluate(corpus, words);
  MetricReport b = evaluate(shuffled, words);
  CHECK(a.bleu == doctest::Approx(b.bleu).epsilon(1e-12));
  CHECK(a.rouge_l == doctest::Approx(b.rouge_l).epsilon(1e-12));
  CHECK(a.distinct_1 == doctest::Approx(b.distinct_1).epsilon(1e-12));
  CHECK(a.distinct_2 == doctest::Approx(b.distinct_2).epsilon(1e-12));
  CHECK(a.toxicity_rate == doctest::Approx(b.toxicity_rate).epsilon(1e-12));
}

TEST_CASE("golden MetricReport matches the oracle-pinned fixture") {
  EvalCorpus corpus;
  for (const auto& j : read_jsonl(tu::golden_path("metrics_fixture.jsonl"))) {
    corpus.items.push_back({j.at("candidate").get<std::string>(),
                            j.at("references").get<std::vector<std::string>>()});
  }
  MetricReport r = evaluate(corpus, {"stupid", "fool", "idiot"});

  nlohmann::json golden =
      nlohmann::json::parse(tu::read_file(tu::golden_path("metrics_golden.json")));
  auto near = [&](const char* key, double v) {
    CHECK(v == doctest::Approx(golden.at(key).get<double>()).epsilon(1e-9));
  };
  near("bleu_1", r.bleu_1);
  near("bleu_2", r.bleu_2);
  near("bleu_3", r.bleu_3);
  near("bleu_4", r.bleu_4);
  near("bleu", r.bleu);
  near("rouge_1", r.rouge_1);
  near("rouge_2", r.rouge_2);
  near("rouge_l", r.rouge_l);
  near("distinct_1", r.distinct_1);
  near("distinct_2", r.distinct_2);
  near("toxicity_rate", r.toxicity_rate);
  CHECK(r.n_items == golden.at("n_items").get<int>());
}

TEST_CASE("evaluate validates the corpus") {
  CHECK_THROWS_WITH_AS(evaluate(EvalCorpus{}, {"w"}),
                       doctest::Contains("EmptyCorpus"), Error);
  EvalCorpus no_refs;
  no_refs.items = {{"x", {}}};
  CHECK_THROWS_WITH_AS(evaluate(no_refs, {"w"}),
                       doctest::Contains("EmptyCorpus"), Error);
}
