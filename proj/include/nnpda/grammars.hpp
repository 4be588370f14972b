#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnpda/core.hpp"

namespace nnpda {

// paren: balanced strings over '1' = '(' and '0' = ')'.
// anbn: 1^n 0^n, n >= 1.
// palindrome: W c W' over {a, b}, W' the reverse of W.
enum class Grammar { paren, anbn, palindrome };

const char* to_string(Grammar g);
Grammar parse_grammar(std::string_view s);

// paren and anbn use {1, 0} with end symbol 'e'; palindrome uses {a, b, c}.
Alphabet grammar_alphabet(Grammar g);

bool label(Grammar g, std::string_view s);

// True while some suffix can still make the string legal. The first symbol
// that makes this false is where trap-state supervision stops a string.
bool viable_prefix(Grammar g, std::string_view prefix);

struct LabeledEntry {
  std::string text;
  bool legal = false;
  int stage = 0;

  bool operator==(const LabeledEntry&) const = default;
};

struct LabeledDataset {
  Grammar grammar = Grammar::paren;
  std::vector<LabeledEntry> entries;

  Alphabet alphabet() const { return grammar_alphabet(grammar); }
  int stage_count() const;
  std::vector<LabeledEntry> stage(int s) const;
  std::size_t legal_count() const;

  // "y1100" / "n10" lines; "#stage N" switches the stage of what follows.
  std::string to_text() const;
  static LabeledDataset parse(Grammar g, std::string_view text);
  static LabeledDataset load(Grammar g, const std::string& path);
};

struct DatasetSpec {
  std::size_t exhaustive_up_to = 0;  // every string of length 1..n
  std::size_t random_count = 0;      // half legal, half illegal
  std::size_t random_min_len = 0;
  std::size_t random_max_len = 0;
  // Extra copies of the legal strings of exactly this length (0: none).
  std::size_t legal_of_length = 0;
  int stage = 0;
};

LabeledDataset build_dataset(Grammar g, const std::vector<DatasetSpec>& specs,
                             std::uint64_t seed);

// The training sets of the three experiments: paren 30 + 20 random, the
// 27-string 1^n0^n listing, palindrome 39 + 4 then 363 + 8.
LabeledDataset standard_dataset(Grammar g, std::uint64_t seed);
LabeledDataset anbn_fixture();

// All strings over `symbols` with length in [min_len, max_len], shortlex
// order. at() makes the range shardable.
class StringEnumerator {
 public:
  StringEnumerator(std::vector<char> symbols, std::size_t max_len, std::size_t min_len = 0);
  std::uint64_t count() const { return count_; }
  std::string at(std::uint64_t index) const;
  std::vector<std::string> all() const;

 private:
  std::vector<char> symbols_;
  std::size_t min_len_, max_len_;
  std::uint64_t count_ = 0;
};

std::uint64_t count_strings(std::size_t alphabet_size, std::size_t max_len,
                            std::size_t min_len = 0);

}  // namespace nnpda
