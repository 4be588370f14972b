#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nnpda/core.hpp"

namespace nnpda {

// Reading symbol for the discrete machine: a stack symbol index or the empty
// stack.
inline constexpr SymbolIndex kEmptyReading = static_cast<SymbolIndex>(-1);

using StateId = int;
inline constexpr StateId kDeadState = -1;

enum class DiscreteAction : int { pop = -1, noop = 0, push = 1 };

const char* to_string(DiscreteAction a);
DiscreteAction parse_discrete_action(std::string_view s);

struct TransitionKey {
  StateId state = 0;
  SymbolIndex input = 0;
  SymbolIndex reading = kEmptyReading;

  auto operator<=>(const TransitionKey&) const = default;
};

struct Transition {
  StateId next = 0;  // kDeadState: the machine rejects from here on
  DiscreteAction action = DiscreteAction::noop;

  bool operator==(const Transition&) const = default;
};

enum class PdaVerdict { legal, illegal, trap, pop_empty };
const char* to_string(PdaVerdict v);

// Deterministic pushdown automaton over one shared input/stack alphabet, where
// a push always pushes the current input symbol with unit length. A string is
// accepted when it ends in an accepting state (with an empty stack when
// `require_empty_stack`). A missing transition rejects.
struct DiscretePda {
  Alphabet alphabet;
  std::vector<std::string> state_labels;
  StateId start = 0;
  std::set<StateId> accepting;
  std::set<StateId> traps;
  bool require_empty_stack = true;
  std::map<TransitionKey, Transition> transitions;

  std::size_t state_count() const { return state_labels.size(); }
  StateId add_state(std::string label);
  std::optional<StateId> find_state(std::string_view label) const;
  // Throws on a duplicate key with a different outcome.
  void add_rule(TransitionKey key, Transition t);
  const Transition* find(const TransitionKey& key) const;
  void validate() const;

  // PDA text format (see README).
  std::string to_text() const;
  static DiscretePda parse(std::string_view text);
  static DiscretePda load(const std::string& path);
};

struct PdaRun {
  PdaVerdict verdict = PdaVerdict::illegal;
  StateId final_state = kDeadState;
  std::size_t final_stack_height = 0;
};

// Discrete simulation with a unit-length symbol stack. The alphabet's end
// symbol, when declared, is appended.
PdaRun run_pda(const DiscretePda& pda, std::string_view string);
PdaRun run_pda_indices(const DiscretePda& pda, const std::vector<SymbolIndex>& string);

// Random deterministic machine for oracle tests: `n_states` states over
// `n_symbols` string symbols plus an end symbol 'e'. Each (state, input,
// reading) rule exists with probability `density`; about one rule in ten goes
// to the dead state.
DiscretePda random_pda(std::size_t n_states, std::size_t n_symbols, std::uint64_t seed,
                       double density = 0.85);

inline bool accepted(PdaVerdict v) { return v == PdaVerdict::legal; }

}  // namespace nnpda
