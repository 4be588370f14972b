#include "nnpda/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nnpda {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

char parse_token(const std::string& t, int line_no) {
  if (t.size() != 1 || !std::isprint(static_cast<unsigned char>(t[0])) ||
      std::isspace(static_cast<unsigned char>(t[0])))
    throw std::invalid_argument("alphabet line " + std::to_string(line_no) +
                                ": token must be one printable character, got '" +
                                t + "'");
  return t[0];
}

}  // namespace

Alphabet::Alphabet(std::vector<char> symbols, std::optional<char> end_symbol)
    : symbols_(std::move(symbols)), end_(end_symbol) {
  if (symbols_.size() < 2)
    throw std::invalid_argument("alphabet needs at least two symbols");
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    for (std::size_t j = i + 1; j < symbols_.size(); ++j)
      if (symbols_[i] == symbols_[j])
        throw std::invalid_argument(std::string("duplicate alphabet symbol '") +
                                    symbols_[i] + "'");
  if (end_ && symbols_.back() != *end_)
    throw std::invalid_argument("end symbol must be the last alphabet symbol");
}

Alphabet Alphabet::parse(std::string_view text) {
  std::vector<char> symbols;
  std::optional<char> end;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    // A lone '#' token is not allowed; '#' always starts a comment.
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("end:", 0) == 0) {
      if (end) throw std::invalid_argument("alphabet declares two end symbols");
      end = parse_token(trim(std::string_view(t).substr(4)), line_no);
      continue;
    }
    symbols.push_back(parse_token(t, line_no));
  }
  if (end) {
    // The end symbol may be listed explicitly or only via "end:".
    auto it = std::find(symbols.begin(), symbols.end(), *end);
    if (it != symbols.end()) symbols.erase(it);
    symbols.push_back(*end);
  }
  return Alphabet(std::move(symbols), end);
}

Alphabet Alphabet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open alphabet file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Alphabet::to_text() const {
  std::string out;
  for (char c : symbols_) {
    if (end_ && c == *end_) continue;
    out += c;
    out += '\n';
  }
  if (end_) out += std::string("end: ") + *end_ + "\n";
  return out;
}

bool Alphabet::contains(char c) const {
  return std::find(symbols_.begin(), symbols_.end(), c) != symbols_.end();
}

SymbolIndex Alphabet::index_of(char c) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), c);
  if (it == symbols_.end())
    throw std::invalid_argument(std::string("unknown symbol '") + c + "'");
  return static_cast<SymbolIndex>(it - symbols_.begin());
}

SymbolIndex Alphabet::end_index() const {
  if (!end_) throw std::logic_error("alphabet has no end symbol");
  return symbols_.size() - 1;
}

std::vector<char> Alphabet::string_symbols() const {
  std::vector<char> out = symbols_;
  if (end_) out.pop_back();
  return out;
}

std::vector<SymbolIndex> Alphabet::encode(std::string_view s) const {
  std::vector<SymbolIndex> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(index_of(c));
  return out;
}

std::string Alphabet::decode(std::span<const SymbolIndex> indices) const {
  std::string out;
  out.reserve(indices.size());
  for (auto i : indices) out += symbol(i);
  return out;
}

std::vector<double> one_hot(SymbolIndex index, std::size_t size) {
  std::vector<double> v(size, 0.0);
  v.at(index) = 1.0;
  return v;
}

std::vector<double> encode_input(char symbol, const Alphabet& alphabet) {
  return one_hot(alphabet.index_of(symbol), alphabet.size());
}

void NetworkShape::validate() const {
  if (n_state == 0 || n_input == 0)
    throw std::invalid_argument("network shape needs state and input neurons");
  if (n_action != 1) throw std::invalid_argument("exactly one action neuron is supported");
  if (n_read != n_input && n_read != n_input + 1)
    throw std::invalid_argument("n_read must equal n_input or n_input + 1");
  if (n_state > 20) throw std::invalid_argument("too many state neurons");
}

double nearest_level(double x, std::span<const double> levels) {
  if (levels.empty()) throw std::invalid_argument("quantization grid is empty");
  double best = levels[0];
  double best_d = std::abs(x - best);
  for (double l : levels.subspan(1)) {
    double d = std::abs(x - l);
    if (d < best_d || (d == best_d && l > best)) {
      best = l;
      best_d = d;
    }
  }
  return best;
}

std::vector<double> decode_state_label(std::span<const double> vector,
                                       std::span<const double> levels) {
  if (levels.empty()) throw std::invalid_argument("quantization grid is empty");
  std::vector<double> out;
  out.reserve(vector.size());
  for (double x : vector) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite state component");
    out.push_back(nearest_level(x, levels));
  }
  return out;
}

}  // namespace nnpda
