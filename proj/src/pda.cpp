#include "nnpda/pda.hpp"

#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nnpda {

const char* to_string(DiscreteAction a) {
  switch (a) {
    case DiscreteAction::pop: return "pop";
    case DiscreteAction::noop: return "noop";
    case DiscreteAction::push: return "push";
  }
  return "?";
}

DiscreteAction parse_discrete_action(std::string_view s) {
  if (s == "push" || s == "1") return DiscreteAction::push;
  if (s == "pop" || s == "-1") return DiscreteAction::pop;
  if (s == "noop" || s == "0") return DiscreteAction::noop;
  throw std::invalid_argument("unknown action '" + std::string(s) + "'");
}

const char* to_string(PdaVerdict v) {
  switch (v) {
    case PdaVerdict::legal: return "legal";
    case PdaVerdict::illegal: return "illegal";
    case PdaVerdict::trap: return "trap";
    case PdaVerdict::pop_empty: return "pop_empty";
  }
  return "?";
}

StateId DiscretePda::add_state(std::string label) {
  if (find_state(label)) throw std::invalid_argument("duplicate state label " + label);
  state_labels.push_back(std::move(label));
  return static_cast<StateId>(state_labels.size() - 1);
}

std::optional<StateId> DiscretePda::find_state(std::string_view label) const {
  for (std::size_t i = 0; i < state_labels.size(); ++i)
    if (state_labels[i] == label) return static_cast<StateId>(i);
  return std::nullopt;
}

void DiscretePda::add_rule(TransitionKey key, Transition t) {
  auto [it, inserted] = transitions.emplace(key, t);
  if (!inserted && !(it->second == t))
    throw std::invalid_argument("nondeterministic rule for state " +
                                state_labels.at(key.state));
}

const Transition* DiscretePda::find(const TransitionKey& key) const {
  auto it = transitions.find(key);
  return it == transitions.end() ? nullptr : &it->second;
}

void DiscretePda::validate() const {
  auto n = static_cast<StateId>(state_labels.size());
  if (n == 0) throw std::invalid_argument("pda has no states");
  if (start < 0 || start >= n) throw std::invalid_argument("pda start state out of range");
  for (auto s : accepting)
    if (s < 0 || s >= n) throw std::invalid_argument("accepting state out of range");
  for (auto s : traps)
    if (s < 0 || s >= n) throw std::invalid_argument("trap state out of range");
  for (const auto& [k, t] : transitions) {
    if (k.state < 0 || k.state >= n) throw std::invalid_argument("rule source out of range");
    if (k.input >= alphabet.size()) throw std::invalid_argument("rule input out of range");
    if (k.reading != kEmptyReading && k.reading >= alphabet.size())
      throw std::invalid_argument("rule reading out of range");
    if (t.next != kDeadState && (t.next < 0 || t.next >= n))
      throw std::invalid_argument("rule target out of range");
  }
}

namespace {

std::string reading_name(const Alphabet& a, SymbolIndex r) {
  return r == kEmptyReading ? std::string("phi") : std::string(1, a.symbol(r));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto c = s.find(',', pos);
    out.push_back(trim(s.substr(pos, c == std::string_view::npos ? s.npos : c - pos)));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

}  // namespace

std::string DiscretePda::to_text() const {
  std::ostringstream out;
  out << "pda 1\n";
  out << "alphabet:";
  for (char c : alphabet.string_symbols()) out << ' ' << c;
  out << '\n';
  if (alphabet.has_end()) out << "end: " << *alphabet.end_symbol() << '\n';
  out << "states:";
  for (const auto& l : state_labels) out << ' ' << l;
  out << '\n';
  out << "start: " << state_labels.at(start) << '\n';
  out << "accept:";
  for (auto s : accepting) out << ' ' << state_labels.at(s);
  out << '\n';
  out << "trap:";
  for (auto s : traps) out << ' ' << state_labels.at(s);
  out << '\n';
  out << "empty_stack: " << (require_empty_stack ? "required" : "ignored") << '\n';
  for (const auto& [k, t] : transitions) {
    out << state_labels.at(k.state) << " , " << alphabet.symbol(k.input) << " , "
        << reading_name(alphabet, k.reading) << " -> "
        << (t.next == kDeadState ? std::string("dead") : state_labels.at(t.next)) << " , "
        << to_string(t.action) << '\n';
  }
  return out.str();
}

DiscretePda DiscretePda::parse(std::string_view text) {
  DiscretePda pda;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::vector<char> symbols;
  std::optional<char> end;
  bool have_alphabet = false;
  std::string start_label;
  std::vector<std::string> accept_labels, trap_labels;
  struct RawRule {
    std::string from, input, reading, to, action;
    int line;
  };
  std::vector<RawRule> rules;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("pda line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("pda ", 0) == 0) {
      if (trim(t.substr(4)) != "1") fail("unsupported pda format version");
      continue;
    }
    auto arrow = t.find("->");
    if (arrow == std::string::npos) {
      auto colon = t.find(':');
      if (colon == std::string::npos) fail("expected 'key: value' or a rule");
      std::string key = trim(t.substr(0, colon));
      auto values = split_ws(t.substr(colon + 1));
      if (key == "alphabet") {
        for (auto& v : values) {
          if (v.size() != 1) fail("alphabet tokens are single characters");
          symbols.push_back(v[0]);
        }
        have_alphabet = true;
      } else if (key == "end") {
        if (values.size() != 1 || values[0].size() != 1) fail("bad end symbol");
        end = values[0][0];
      } else if (key == "states") {
        for (auto& v : values) pda.add_state(v);
      } else if (key == "start") {
        if (values.size() != 1) fail("start needs one state");
        start_label = values[0];
      } else if (key == "accept") {
        accept_labels = values;
      } else if (key == "trap") {
        trap_labels = values;
      } else if (key == "empty_stack") {
        if (values.size() != 1 || (values[0] != "required" && values[0] != "ignored"))
          fail("empty_stack must be 'required' or 'ignored'");
        pda.require_empty_stack = values[0] == "required";
      } else {
        fail("unknown key '" + key + "'");
      }
      continue;
    }
    auto lhs = split_commas(std::string_view(t).substr(0, arrow));
    auto rhs = split_commas(std::string_view(t).substr(arrow + 2));
    if (lhs.size() != 3 || rhs.size() != 2) fail("rule must be 'state , input , reading -> state , action'");
    rules.push_back({lhs[0], lhs[1], lhs[2], rhs[0], rhs[1], line_no});
  }
  if (!have_alphabet) throw std::invalid_argument("pda file lacks an alphabet line");
  if (end) symbols.push_back(*end);
  pda.alphabet = Alphabet(symbols, end);
  auto state_of = [&](const std::string& l) {
    auto s = pda.find_state(l);
    if (!s) throw std::invalid_argument("unknown state '" + l + "'");
    return *s;
  };
  if (start_label.empty()) throw std::invalid_argument("pda file lacks a start state");
  pda.start = state_of(start_label);
  for (auto& l : accept_labels) pda.accepting.insert(state_of(l));
  for (auto& l : trap_labels) pda.traps.insert(state_of(l));
  for (const auto& r : rules) {
    line_no = r.line;
    if (r.input.size() != 1) fail("input must be one symbol");
    TransitionKey key{state_of(r.from), pda.alphabet.index_of(r.input[0]), kEmptyReading};
    if (r.reading != "phi") {
      if (r.reading.size() != 1) fail("reading must be one symbol or 'phi'");
      key.reading = pda.alphabet.index_of(r.reading[0]);
    }
    Transition tr{r.to == "dead" ? kDeadState : state_of(r.to),
                  parse_discrete_action(r.action)};
    pda.add_rule(key, tr);
  }
  pda.validate();
  return pda;
}

DiscretePda DiscretePda::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pda file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PdaRun run_pda_indices(const DiscretePda& pda, const std::vector<SymbolIndex>& string) {
  PdaRun run;
  StateId state = pda.start;
  std::vector<SymbolIndex> stack;
  auto step = [&](SymbolIndex input) -> bool {
    if (pda.traps.count(state)) return true;  // absorbing
    TransitionKey key{state, input, stack.empty() ? kEmptyReading : stack.back()};
    const Transition* t = pda.find(key);
    if (!t) {
      state = kDeadState;
      return false;
    }
    switch (t->action) {
      case DiscreteAction::push: stack.push_back(input); break;
      case DiscreteAction::pop:
        if (stack.empty()) {
          run.verdict = PdaVerdict::pop_empty;
          state = kDeadState;
          return false;
        }
        stack.pop_back();
        break;
      case DiscreteAction::noop: break;
    }
    state = t->next;
    return state != kDeadState;
  };
  bool alive = true;
  for (auto s : string) {
    if (!(alive = step(s))) break;
  }
  if (alive && pda.alphabet.has_end()) alive = step(pda.alphabet.end_index());
  run.final_state = state;
  run.final_stack_height = stack.size();
  if (!alive) {
    if (run.verdict != PdaVerdict::pop_empty) run.verdict = PdaVerdict::illegal;
    return run;
  }
  if (pda.traps.count(state)) {
    run.verdict = PdaVerdict::trap;
  } else if (pda.accepting.count(state) && (!pda.require_empty_stack || stack.empty())) {
    run.verdict = PdaVerdict::legal;
  } else {
    run.verdict = PdaVerdict::illegal;
  }
  return run;
}

PdaRun run_pda(const DiscretePda& pda, std::string_view string) {
  return run_pda_indices(pda, pda.alphabet.encode(string));
}

DiscretePda random_pda(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed,
                       double density) {
  if (n_states == 0 || n_symbols == 0 || n_symbols > 8)
    throw std::invalid_argument("random_pda needs 1..8 symbols and at least one state");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick_state(0, static_cast<int>(n_states) - 1);
  std::uniform_int_distribution<int> pick_action(-1, 1);
  std::vector<char> symbols;
  for (std::size_t i = 0; i < n_symbols; ++i) symbols.push_back(static_cast<char>('a' + i));
  symbols.push_back('e');
  DiscretePda pda;
  pda.alphabet = Alphabet(symbols, 'e');
  for (std::size_t q = 0; q < n_states; ++q) pda.add_state(std::to_string(q + 1));
  pda.start = 0;
  const std::size_t n = pda.alphabet.size();
  for (std::size_t q = 0; q < n_states; ++q) {
    if (u(rng) < 0.4 || q + 1 == n_states) pda.accepting.insert(static_cast<StateId>(q));
    for (SymbolIndex in = 0; in < n; ++in) {
      // Pushed symbols never include the end symbol that stops the string.
      for (SymbolIndex r = 0; r <= n_symbols; ++r) {
        const SymbolIndex reading = r == n_symbols ? kEmptyReading : r;
        if (u(rng) >= density) continue;
        Transition t;
        t.next = u(rng) < 0.1 ? kDeadState : pick_state(rng);
        t.action = static_cast<DiscreteAction>(pick_action(rng));
        pda.add_rule({static_cast<StateId>(q), in, reading}, t);
      }
    }
  }
  pda.validate();
  return pda;
}

}  // namespace nnpda
