#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nnpda {

using SymbolIndex = std::size_t;

// Ordered set of single-character tokens. The optional end symbol, when
// present, is always the last token.
class Alphabet {
 public:
  Alphabet() = default;
  Alphabet(std::vector<char> symbols, std::optional<char> end_symbol);

  // Alphabet file: one token per line, '#' comments, "end: <token>" marks the
  // end symbol.
  static Alphabet parse(std::string_view text);
  static Alphabet load(const std::string& path);
  std::string to_text() const;

  std::size_t size() const { return symbols_.size(); }
  const std::vector<char>& symbols() const { return symbols_; }
  char symbol(SymbolIndex i) const { return symbols_.at(i); }
  bool contains(char c) const;
  SymbolIndex index_of(char c) const;

  bool has_end() const { return end_.has_value(); }
  std::optional<char> end_symbol() const { return end_; }
  SymbolIndex end_index() const;

  // Symbols a string may contain (everything except the end symbol).
  std::vector<char> string_symbols() const;

  std::vector<SymbolIndex> encode(std::string_view s) const;
  std::string decode(std::span<const SymbolIndex> indices) const;

  bool operator==(const Alphabet&) const = default;

 private:
  std::vector<char> symbols_;
  std::optional<char> end_;
};

// One-hot vector for `symbol`.
std::vector<double> encode_input(char symbol, const Alphabet& alphabet);
std::vector<double> one_hot(SymbolIndex index, std::size_t size);

struct NetworkShape {
  std::size_t n_state = 0;
  std::size_t n_input = 0;
  std::size_t n_read = 0;
  std::size_t n_action = 1;

  // n_read == n_input + 1 adds a reading neuron for the empty stack.
  bool has_empty_neuron() const { return n_read == n_input + 1; }
  void validate() const;

  bool operator==(const NetworkShape&) const = default;
};

// Maps each component to its nearest grid level. Exact ties go to the
// larger level.
std::vector<double> decode_state_label(std::span<const double> vector,
                                       std::span<const double> levels);

double nearest_level(double x, std::span<const double> levels);

}  // namespace nnpda
