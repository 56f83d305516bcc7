#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toxprune/toxprune.hpp"

namespace testutil {

inline std::string data_dir() { return TOXPRUNE_DATA_DIR; }
inline std::string golden_dir() { return TOXPRUNE_GOLDEN_DIR; }
inline std::string cli_path() { return TOXPRUNE_CLI_PATH; }

inline std::string data_path(const std::string& name) {
  return (std::filesystem::path(data_dir()) / name).string();
}
inline std::string golden_path(const std::string& name) {
  return (std::filesystem::path(golden_dir()) / name).string();
}

inline toxprune::Vocabulary load_toy_vocab() {
  return toxprune::load_vocab(data_path("toy_vocab.json"), data_path("toy_merges.txt"));
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("toxprune_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string dir() const { return path_.string(); }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Minimal hand-auditable vocabulary: merges ("l","o") then ("lo","w</w>").
inline toxprune::Vocabulary make_low_vocab(TempDir& tmp) {
  write_file(tmp.file("vocab.json"), R"({
    "<bos>": 0, "<eos>": 1, "<unk>": 2,
    "l": 3, "o": 4, "w": 5,
    "l</w>": 6, "o</w>": 7, "w</w>": 8,
    "lo": 9, "low</w>": 10,
    "__eow__": "</w>"
  })");
  write_file(tmp.file("merges.txt"), "l o\nlo w</w>\n");
  return toxprune::load_vocab(tmp.file("vocab.json"), tmp.file("merges.txt"));
}

/// ScriptedLM over a small vocab with random default/table vectors.
inline toxprune::ScriptedLM random_scripted_lm(std::mt19937& rng, int vocab_size,
                                               int table_entries = 4,
                                               int max_prefix_len = 3) {
  std::uniform_real_distribution<double> logit(-3.0, 3.0);
  std::uniform_int_distribution<int> tok(0, vocab_size - 1);
  std::uniform_int_distribution<int> len(0, max_prefix_len);
  auto vec = [&] {
    toxprune::LogitVector v(static_cast<size_t>(vocab_size));
    for (auto& x : v) x = logit(rng);
    return v;
  };
  toxprune::ScriptedLM lm(vec());
  for (int i = 0; i < table_entries; ++i) {
    toxprune::TokenIdSeq prefix;
    int n = len(rng);
    for (int j = 0; j < n; ++j) prefix.push_back(tok(rng));
    lm.set(prefix, vec());
  }
  return lm;
}

}  // namespace testutil
