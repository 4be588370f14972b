#include "nnpda/grammars.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nnpda {

const char* to_string(Grammar g) {
  switch (g) {
    case Grammar::paren: return "paren";
    case Grammar::anbn: return "anbn";
    case Grammar::palindrome: return "palindrome";
  }
  return "?";
}

Grammar parse_grammar(std::string_view s) {
  if (s == "paren") return Grammar::paren;
  if (s == "anbn") return Grammar::anbn;
  if (s == "palindrome") return Grammar::palindrome;
  throw std::invalid_argument("unknown grammar '" + std::string(s) + "'");
}

Alphabet grammar_alphabet(Grammar g) {
  if (g == Grammar::palindrome) return Alphabet({'a', 'b', 'c'}, std::nullopt);
  return Alphabet({'1', '0', 'e'}, 'e');
}

namespace {

void check_symbols(Grammar g, std::string_view s) {
  const std::string_view allowed = g == Grammar::palindrome ? "abc" : "10";
  for (char c : s)
    if (allowed.find(c) == std::string_view::npos)
      throw std::invalid_argument(std::string("symbol '") + c + "' is not in the " +
                                  to_string(g) + " alphabet");
}

}  // namespace

bool label(Grammar g, std::string_view s) {
  check_symbols(g, s);
  switch (g) {
    case Grammar::paren: {
      long depth = 0;
      for (char c : s) {
        depth += c == '1' ? 1 : -1;
        if (depth < 0) return false;
      }
      return depth == 0;
    }
    case Grammar::anbn: {
      std::size_t n = 0;
      while (n < s.size() && s[n] == '1') ++n;
      if (n == 0 || s.size() != 2 * n) return false;
      return s.substr(n).find('1') == std::string_view::npos;
    }
    case Grammar::palindrome: {
      auto c = s.find('c');
      if (c == std::string_view::npos) return false;
      std::string_view w = s.substr(0, c), rest = s.substr(c + 1);
      if (w.size() != rest.size()) return false;
      return std::equal(w.begin(), w.end(), rest.rbegin());
    }
  }
  return false;
}

bool viable_prefix(Grammar g, std::string_view p) {
  check_symbols(g, p);
  switch (g) {
    case Grammar::paren: {
      long depth = 0;
      for (char c : p) {
        depth += c == '1' ? 1 : -1;
        if (depth < 0) return false;
      }
      return true;
    }
    case Grammar::anbn: {
      std::size_t ones = 0;
      while (ones < p.size() && p[ones] == '1') ++ones;
      std::string_view zeros = p.substr(ones);
      if (zeros.find('1') != std::string_view::npos) return false;
      return zeros.size() <= ones && !(ones == 0 && !zeros.empty());
    }
    case Grammar::palindrome: {
      auto c = p.find('c');
      if (c == std::string_view::npos) return true;
      std::string_view w = p.substr(0, c), rest = p.substr(c + 1);
      if (rest.size() > w.size()) return false;
      return std::equal(rest.begin(), rest.end(), w.rbegin());
    }
  }
  return false;
}

int LabeledDataset::stage_count() const {
  int n = 0;
  for (const auto& e : entries) n = std::max(n, e.stage + 1);
  return n;
}

std::vector<LabeledEntry> LabeledDataset::stage(int s) const {
  std::vector<LabeledEntry> out;
  for (const auto& e : entries)
    if (e.stage == s) out.push_back(e);
  return out;
}

std::size_t LabeledDataset::legal_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.legal; }));
}

std::string LabeledDataset::to_text() const {
  std::string out;
  int current = 0;
  for (const auto& e : entries) {
    if (e.stage != current) {
      out += "#stage " + std::to_string(e.stage) + "\n";
      current = e.stage;
    }
    out += e.legal ? 'y' : 'n';
    out += e.text;
    out += '\n';
  }
  return out;
}

LabeledDataset LabeledDataset::parse(Grammar g, std::string_view text) {
  LabeledDataset ds;
  ds.grammar = g;
  std::istringstream in{std::string(text)};
  std::string line;
  int stage = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip whitespace and a trailing comma (the printed listing uses them).
    line.erase(std::remove_if(line.begin(), line.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               line.end());
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#stage", 0) == 0) stage = std::stoi(line.substr(6));
      continue;
    }
    if (line.back() == ',') line.pop_back();
    if (line[0] != 'y' && line[0] != 'n')
      throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                  ": label must be 'y' or 'n'");
    LabeledEntry e{line.substr(1), line[0] == 'y', stage};
    check_symbols(g, e.text);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

LabeledDataset LabeledDataset::load(Grammar g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(g, ss.str());
}

std::uint64_t count_strings(std::size_t alphabet_size, std::size_t max_len,
                            std::size_t min_len) {
  std::uint64_t total = 0, pow = 1;
  for (std::size_t len = 0; len <= max_len; ++len) {
    if (len >= min_len) total += pow;
    pow *= alphabet_size;
  }
  return total;
}

StringEnumerator::StringEnumerator(std::vector<char> symbols, std::size_t max_len,
                                   std::size_t min_len)
    : symbols_(std::move(symbols)), min_len_(min_len), max_len_(max_len) {
  if (symbols_.empty()) throw std::invalid_argument("cannot enumerate over no symbols");
  count_ = min_len_ > max_len_ ? 0 : count_strings(symbols_.size(), max_len_, min_len_);
}

std::string StringEnumerator::at(std::uint64_t index) const {
  if (index >= count_) throw std::out_of_range("string index out of range");
  const std::uint64_t base = symbols_.size();
  std::uint64_t pow = 1;
  for (std::size_t i = 0; i < min_len_; ++i) pow *= base;
  std::size_t len = min_len_;
  while (index >= pow) {
    index -= pow;
    pow *= base;
    ++len;
  }
  std::string s(len, symbols_[0]);
  for (std::size_t i = len; i-- > 0;) {
    s[i] = symbols_[index % base];
    index /= base;
  }
  return s;
}

std::vector<std::string> StringEnumerator::all() const {
  std::vector<std::string> out;
  out.reserve(count_);
  for (std::uint64_t i = 0; i < count_; ++i) out.push_back(at(i));
  return out;
}

namespace {

std::string random_string(std::mt19937_64& rng, const std::vector<char>& symbols,
                          std::size_t len) {
  std::uniform_int_distribution<std::size_t> pick(0, symbols.size() - 1);
  std::string s(len, ' ');
  for (auto& c : s) c = symbols[pick(rng)];
  return s;
}

// Random legal string of length close to `len` (exact when the grammar has
// one of that length).
std::string random_legal(Grammar g, std::mt19937_64& rng, std::size_t len) {
  switch (g) {
    case Grammar::paren: {
      std::size_t pairs = len / 2;
      // Shuffle pairs of brackets and keep the first ordering that balances.
      while (true) {
        std::string s = std::string(pairs, '1') + std::string(pairs, '0');
        std::shuffle(s.begin(), s.end(), rng);
        if (label(g, s)) return s;
      }
    }
    case Grammar::anbn: {
      std::size_t n = std::max<std::size_t>(1, len / 2);
      return std::string(n, '1') + std::string(n, '0');
    }
    case Grammar::palindrome: {
      std::string w = random_string(rng, {'a', 'b'}, (len - 1) / 2);
      return w + "c" + std::string(w.rbegin(), w.rend());
    }
  }
  return {};
}

}  // namespace

LabeledDataset build_dataset(Grammar g, const std::vector<DatasetSpec>& specs,
                             std::uint64_t seed) {
  LabeledDataset ds;
  ds.grammar = g;
  std::mt19937_64 rng(seed);
  const auto symbols = grammar_alphabet(g).string_symbols();
  for (const auto& spec : specs) {
    std::set<std::string> seen;
    auto add = [&](const std::string& s) {
      ds.entries.push_back({s, label(g, s), spec.stage});
      seen.insert(s);
    };
    if (spec.exhaustive_up_to > 0) {
      StringEnumerator en(symbols, spec.exhaustive_up_to, 1);
      for (std::uint64_t i = 0; i < en.count(); ++i) add(en.at(i));
    }
    if (spec.legal_of_length > 0) {
      StringEnumerator en(symbols, spec.legal_of_length, spec.legal_of_length);
      for (std::uint64_t i = 0; i < en.count(); ++i) {
        std::string s = en.at(i);
        if (label(g, s)) add(s);
      }
    }
    if (spec.random_count > 0) {
      if (spec.random_min_len > spec.random_max_len || spec.random_max_len == 0)
        throw std::invalid_argument("bad random length range");
      std::uniform_int_distribution<std::size_t> len_dist(spec.random_min_len,
                                                          spec.random_max_len);
      const std::size_t want_legal = spec.random_count / 2;
      const std::size_t want_illegal = spec.random_count - want_legal;
      std::size_t legal = 0, illegal = 0, attempts = 0;
      while ((legal < want_legal || illegal < want_illegal) && attempts++ < 1000000) {
        const std::size_t len = len_dist(rng);
        std::string s = legal < want_legal ? random_legal(g, rng, len)
                                           : random_string(rng, symbols, len);
        if (s.size() < spec.random_min_len || s.size() > spec.random_max_len) continue;
        if (seen.count(s)) continue;
        const bool is_legal = label(g, s);
        if (is_legal && legal < want_legal) {
          add(s);
          ++legal;
        } else if (!is_legal && illegal < want_illegal) {
          add(s);
          ++illegal;
        }
      }
      if (legal < want_legal || illegal < want_illegal)
        throw std::runtime_error("could not draw enough distinct random strings");
    }
  }
  return ds;
}

LabeledDataset anbn_fixture() {
  static constexpr const char* kListing =
      "n1 n11 n1000 y1100 n1011 y10 y10 y1100 n110010 y10 n0 n100 n1111 y11110000 n1101 "
      "y10 y10 y1100 n110100 n00 n1001 n1110 y1111100000 y10 y1100 n101100 n1010";
  std::string text(kListing);
  std::replace(text.begin(), text.end(), ' ', '\n');
  return LabeledDataset::parse(Grammar::anbn, text);
}

LabeledDataset standard_dataset(Grammar g, std::uint64_t seed) {
  switch (g) {
    case Grammar::paren:
      return build_dataset(g, {{4, 20, 5, 8, 0, 0}}, seed);
    case Grammar::anbn:
      return anbn_fixture();
    case Grammar::palindrome:
      return build_dataset(g, {{3, 0, 0, 0, 5, 0}, {5, 0, 0, 0, 7, 1}}, seed);
  }
  return {};
}

}  // namespace nnpda
