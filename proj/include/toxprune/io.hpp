#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxprune/decoding.hpp"
#include "toxprune/errors.hpp"
#include "toxprune/metrics.hpp"

namespace toxprune {

inline nlohmann::json record_to_json(const GenerationRecord& rec) {
  nlohmann::json j;
  j["prompt"] = rec.prompt_ids;
  j["output_text"] = rec.output_text;
  j["output_ids"] = rec.output_ids;
  j["strategy"] = strategy_name(rec.config.strategy);
  j["k"] = rec.config.k;
  j["p"] = rec.config.p;
  j["beam_width"] = rec.config.beam_width;
  j["seed"] = rec.config.rng_seed;
  j["pruneset_fingerprint"] = rec.pruneset_fingerprint;
  j["support_sizes"] = rec.per_step_support_size;
  return j;
}

inline GenerationRecord record_from_json(const nlohmann::json& j) {
  GenerationRecord rec;
  rec.prompt_ids = j.at("prompt").get<TokenIdSeq>();
  rec.output_text = j.at("output_text").get<std::string>();
  rec.output_ids = j.at("output_ids").get<TokenIdSeq>();
  rec.config.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  rec.config.k = j.at("k").get<int>();
  rec.config.p = j.at("p").get<double>();
  rec.config.beam_width = j.at("beam_width").get<int>();
  rec.config.rng_seed = j.at("seed").get<uint64_t>();
  rec.pruneset_fingerprint = j.at("pruneset_fingerprint").get<std::string>();
  rec.per_step_support_size = j.at("support_sizes").get<std::vector<int>>();
  return rec;
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileNotFound", "cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("MalformedFile",
                       path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Write via a temp file + rename so partial output never lands.
inline void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw data_error("FileNotFound", "cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["bleu_1"] = r.bleu_1;
  j["bleu_2"] = r.bleu_2;
  j["bleu_3"] = r.bleu_3;
  j["bleu_4"] = r.bleu_4;
  j["bleu"] = r.bleu;
  j["rouge_1"] = r.rouge_1;
  j["rouge_2"] = r.rouge_2;
  j["rouge_l"] = r.rouge_l;
  j["distinct_1"] = r.distinct_1;
  j["distinct_2"] = r.distinct_2;
  j["toxicity_rate"] = r.toxicity_rate;
  j["n_items"] = r.n_items;
  return j;
}

inline const char* kSummaryCsvHeader =
    "fraction,B-1,B-2,B-3,B-4,B,R-1,R-2,R-L,D-1,D-2,Toxicity";

/// One CSV row in the fixed column order of the summary table.
inline std::string report_csv_row(double fraction, const MetricReport& r) {
  std::string row = format_double(fraction, 2);
  for (double v : {r.bleu_1, r.bleu_2, r.bleu_3, r.bleu_4, r.bleu})
    row += "," + format_double(v, 4);
  for (double v : {r.rouge_1, r.rouge_2, r.rouge_l, r.distinct_1, r.distinct_2,
                   r.toxicity_rate})
    row += "," + format_double(v, 6);
  return row;
}

}  // namespace toxprune
