#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnpda/core.hpp"

namespace nnpda {

// Pops landing this close to a segment boundary remove the whole segment.
inline constexpr double kBoundaryTolerance = 1e-12;
inline constexpr double kDefaultEpsilon = 0.1;

struct StackSegment {
  SymbolIndex symbol = 0;
  double length = 0.0;

  bool operator==(const StackSegment&) const = default;
};

enum class ActionKind { push, pop, noop, pop_empty };

const char* to_string(ActionKind kind);

struct ActionOutcome {
  ActionKind kind = ActionKind::noop;
  // |A| - L for a pop that exhausted the stack, else 0.
  double deficit = 0.0;
  // Segments (or segment pieces) taken off the top, topmost first.
  std::vector<StackSegment> removed;
};

// Contents of the depth-1 window at the top of the stack.
struct StackReading {
  std::vector<double> vector;        // per-symbol mass
  std::optional<SymbolIndex> r1;     // topmost symbol in the window
  std::optional<SymbolIndex> r2;     // bottommost symbol in the window
  std::size_t section_count = 0;     // maximal same-symbol runs in the window
  double mass = 0.0;                 // sum of vector

  // Reading as fed to the controller: symbol masses, plus the unfilled depth
  // of the window when the empty-stack neuron is in use.
  std::vector<double> neural(bool with_empty_neuron) const;
};

// Bottom-to-top list of analog-length segments. Operations return new values;
// the *_in_place variants exist for the training hot path.
class ContinuousStack {
 public:
  ContinuousStack() = default;

  // Builds a stack verbatim from bottom-to-top segments (lengths must be > 0).
  static ContinuousStack from_segments(std::vector<StackSegment> segments);

  const std::vector<StackSegment>& segments() const { return segments_; }
  double total_length() const { return total_length_; }
  bool empty() const { return segments_.empty(); }
  double segment_sum() const;

  ActionOutcome apply_in_place(double action, SymbolIndex input, double epsilon);
  std::pair<ContinuousStack, ActionOutcome> apply(double action, SymbolIndex input,
                                                  double epsilon) const;

  StackReading read(std::size_t alphabet_size) const;

  bool operator==(const ContinuousStack&) const = default;

 private:
  std::vector<StackSegment> segments_;
  double total_length_ = 0.0;
};

ActionOutcome apply_action(ContinuousStack& stack, double action, SymbolIndex input,
                           double epsilon);

struct TraceAction {
  double action = 0.0;
  SymbolIndex input = 0;
};

struct TraceStep {
  ContinuousStack stack;
  StackReading reading;
  ActionOutcome outcome;  // default (noop) for the initial row
};

// Folds apply_action + read over `actions`; the first row is the initial stack.
std::vector<TraceStep> replay_trace(const ContinuousStack& initial,
                                    std::span<const TraceAction> actions,
                                    std::size_t alphabet_size, double epsilon);

// "sym:len,sym:len" with six decimals, bottom to top.
std::string format_segments(const ContinuousStack& stack, const Alphabet& alphabet);

// TSV rows "step\tinput\taction\tsegments"; row 0 is the initial stack.
std::string format_trace_tsv(std::span<const TraceStep> steps,
                             std::span<const TraceAction> actions,
                             const Alphabet& alphabet);

}  // namespace nnpda
