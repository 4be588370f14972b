#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnpda/controller.hpp"
#include "nnpda/pda.hpp"

namespace nnpda {

// +1 above a_star, -1 below -a_star, else 0.
int quantize_action(double a, double a_star = 0.5);
// Ternary copy of full-order linear action weights.
std::vector<int> quantize_action_weights(const WeightSet& w, double w_star = 0.5);

enum class StateScheme { levels, binary, kmeans };
const char* to_string(StateScheme s);
StateScheme parse_state_scheme(std::string_view s);

struct KMeansFit {
  std::vector<std::vector<double>> centers;
  double average_distance = 0.0;  // mean Euclidean distance to the nearest center
};

// Lloyd iterations from a k-means++ start. Deterministic for a given seed.
KMeansFit fit_kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                     std::uint64_t seed = 1, std::size_t max_iter = 200);

class StateQuantizer {
 public:
  static StateQuantizer levels(std::vector<double> grid);
  static StateQuantizer five_level() { return levels({0.0, 0.25, 0.5, 0.75, 1.0}); }
  static StateQuantizer binary();
  static StateQuantizer kmeans(KMeansFit fit);

  StateScheme scheme() const { return scheme_; }
  // Representative vector of the cell `s` falls in: grid values, 0/1, or the
  // nearest center.
  std::vector<double> quantize(std::span<const double> s) const;
  std::string label(std::span<const double> s) const;
  const KMeansFit& fit() const { return fit_; }

 private:
  StateScheme scheme_ = StateScheme::binary;
  std::vector<double> grid_;
  KMeansFit fit_;
};

std::string format_state_label(std::span<const double> v);

// Extraction error: the search discovered more (state, reading) pairs than
// allowed. `frontier` lists the pairs still waiting to be expanded.
class NonClosureError : public std::runtime_error {
 public:
  NonClosureError(const std::string& msg, std::vector<std::string> frontier)
      : std::runtime_error(msg), frontier(std::move(frontier)) {}
  std::vector<std::string> frontier;
};

enum class TrapRule { none, last_neuron_low };

struct ExtractOptions {
  double action_threshold = 0.5;
  double epsilon = 0.0;  // unused by the discrete stack; kept for traces
  TrapRule trap_rule = TrapRule::none;
  bool absorbing_traps = true;
  std::size_t max_pairs = 4096;
};

struct Leak {
  StateId from;
  TransitionKey key;
  Transition to;
};

struct Extraction {
  DiscretePda pda;
  std::vector<std::vector<double>> representatives;  // per state
  std::vector<Leak> leaks;  // transitions out of trap states seen in the raw dynamics
  std::size_t pairs_expanded = 0;
};

// Explores the quantized dynamics from (initial state, empty stack). Node
// identity is (state label, top reading); reachability through pops is
// tracked exactly with same-level summaries, so the result contains every
// (state, reading) pair the discrete machine can reach.
Extraction extract_pda(const WeightSet& w, const Alphabet& alphabet, const StateQuantizer& q,
                       const ExtractOptions& opts = {});

// Generic reachability over a transition oracle. Returns the reachable
// (state, reading) keys in discovery order.
using TransitionOracle =
    std::function<std::optional<Transition>(StateId, SymbolIndex input, SymbolIndex reading)>;
// Nothing is explored after `end_input`; its rules are still queried.
std::vector<std::pair<StateId, SymbolIndex>> reachable_pairs(
    StateId start, std::size_t n_inputs, std::optional<SymbolIndex> end_input,
    const TransitionOracle& oracle, std::size_t max_pairs = SIZE_MAX);

// States visited by the network on `strings`, for fitting k-means.
std::vector<std::vector<double>> collect_states(const WeightSet& w, const Alphabet& alphabet,
                                                const std::vector<std::string>& strings,
                                                double epsilon);

// Keep only rules whose (state, reading) can occur.
DiscretePda restrict_to_reachable(const DiscretePda& pda);

// Drop rules that can never lead to acceptance: pops on an empty stack, rules
// into the dead state, and states that cannot reach an accepting state.
DiscretePda trim_pda(const DiscretePda& pda);

// Partition-refinement minimization with each (input, reading, action)
// triple as one letter; states split first by accept/trap class.
DiscretePda reduce_pda(const DiscretePda& pda);

// States renumbered by breadth-first discovery from the start state (inputs
// then readings in index order). Labels become "1", "2", ...
DiscretePda canonical_form(const DiscretePda& pda);

// Restrict, trim, reduce, canonicalize, then compare rule tables.
bool isomorphic(const DiscretePda& a, const DiscretePda& b);

struct AgreementReport {
  std::uint64_t checked = 0;
  std::uint64_t disagreements = 0;
  std::vector<std::string> examples;  // first few disagreeing strings
  bool ok() const { return disagreements == 0; }
};

// Every string of length 1..max_len over the string symbols of `pda`'s
// alphabet: network classification vs run_pda.
AgreementReport compare_network_to_pda(const WeightSet& w, const DiscretePda& pda,
                                       std::size_t max_len,
                                       ClassifyRule rule = ClassifyRule::state_and_stack,
                                       double epsilon = kDefaultEpsilon);
// Same for two machines over the same alphabet.
AgreementReport compare_pdas(const DiscretePda& a, const DiscretePda& b, std::size_t max_len);

struct DotOptions {
  std::string name = "pda";
};

// Deterministic DOT. Edge labels read "(input, reading, action)" with the
// action as 1, 0 or -1 and the empty stack as φ.
std::string export_dot(const DiscretePda& pda, const DotOptions& opts = {});

}  // namespace nnpda
