#include "nnpda/stack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nnpda {

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::push: return "push";
    case ActionKind::pop: return "pop";
    case ActionKind::noop: return "noop";
    case ActionKind::pop_empty: return "pop_empty";
  }
  return "?";
}

std::vector<double> StackReading::neural(bool with_empty_neuron) const {
  std::vector<double> out = vector;
  if (with_empty_neuron) out.push_back(std::max(0.0, 1.0 - mass));
  return out;
}

ContinuousStack ContinuousStack::from_segments(std::vector<StackSegment> segments) {
  ContinuousStack s;
  for (const auto& seg : segments) {
    if (!(seg.length > 0.0) || !std::isfinite(seg.length))
      throw std::invalid_argument("stack segment length must be positive");
    s.total_length_ += seg.length;
  }
  s.segments_ = std::move(segments);
  return s;
}

double ContinuousStack::segment_sum() const {
  double sum = 0.0;
  for (const auto& seg : segments_) sum += seg.length;
  return sum;
}

ActionOutcome ContinuousStack::apply_in_place(double action, SymbolIndex input,
                                              double epsilon) {
  if (!(std::abs(action) <= 1.0 + 1e-12))
    throw std::invalid_argument("stack action outside [-1, 1]");
  if (epsilon < 0.0 || epsilon >= 0.5)
    throw std::invalid_argument("epsilon must lie in [0, 0.5)");

  ActionOutcome out;
  if (action > epsilon) {
    out.kind = ActionKind::push;
    segments_.push_back({input, action});
    total_length_ = total_length_ + action;
    return out;
  }
  if (action >= -epsilon) {
    out.kind = ActionKind::noop;
    return out;
  }

  double remaining = -action;
  while (remaining > 0.0 && !segments_.empty()) {
    StackSegment& top = segments_.back();
    if (top.length <= remaining + kBoundaryTolerance) {
      out.removed.push_back(top);
      remaining -= top.length;
      segments_.pop_back();
    } else {
      out.removed.push_back({top.symbol, remaining});
      top.length -= remaining;
      remaining = 0.0;
    }
  }
  if (segments_.empty() && remaining > kBoundaryTolerance &&
      -action > total_length_ + kBoundaryTolerance) {
    out.kind = ActionKind::pop_empty;
    out.deficit = -action - total_length_;
    total_length_ = 0.0;
    return out;
  }
  out.kind = ActionKind::pop;
  total_length_ = total_length_ + action;
  if (segments_.empty()) total_length_ = std::max(total_length_, 0.0);
  return out;
}

std::pair<ContinuousStack, ActionOutcome> ContinuousStack::apply(double action,
                                                                 SymbolIndex input,
                                                                 double epsilon) const {
  ContinuousStack next = *this;
  ActionOutcome outcome = next.apply_in_place(action, input, epsilon);
  return {std::move(next), std::move(outcome)};
}

ActionOutcome apply_action(ContinuousStack& stack, double action, SymbolIndex input,
                           double epsilon) {
  return stack.apply_in_place(action, input, epsilon);
}

StackReading ContinuousStack::read(std::size_t alphabet_size) const {
  StackReading r;
  r.vector.assign(alphabet_size, 0.0);
  double depth = 1.0;
  std::optional<SymbolIndex> prev;
  for (auto it = segments_.rbegin(); it != segments_.rend() && depth > 0.0; ++it) {
    double take = std::min(it->length, depth);
    if (take <= 0.0) break;
    r.vector.at(it->symbol) += take;
    r.mass += take;
    depth -= take;
    if (!r.r1) r.r1 = it->symbol;
    r.r2 = it->symbol;
    if (!prev || *prev != it->symbol) ++r.section_count;
    prev = it->symbol;
  }
  return r;
}

std::vector<TraceStep> replay_trace(const ContinuousStack& initial,
                                    std::span<const TraceAction> actions,
                                    std::size_t alphabet_size, double epsilon) {
  std::vector<TraceStep> steps;
  steps.reserve(actions.size() + 1);
  steps.push_back({initial, initial.read(alphabet_size), {}});
  ContinuousStack stack = initial;
  for (const auto& a : actions) {
    ActionOutcome outcome = stack.apply_in_place(a.action, a.input, epsilon);
    steps.push_back({stack, stack.read(alphabet_size), std::move(outcome)});
  }
  return steps;
}

std::string format_segments(const ContinuousStack& stack, const Alphabet& alphabet) {
  std::string out;
  char buf[64];
  for (const auto& seg : stack.segments()) {
    if (!out.empty()) out += ',';
    std::snprintf(buf, sizeof buf, "%c:%.6f", alphabet.symbol(seg.symbol), seg.length);
    out += buf;
  }
  return out;
}

std::string format_trace_tsv(std::span<const TraceStep> steps,
                             std::span<const TraceAction> actions,
                             const Alphabet& alphabet) {
  std::string out = "step\tinput\taction\tsegments\n";
  char buf[64];
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    if (i == 0) {
      out += "-\t0.000000\t";
    } else {
      out += alphabet.symbol(actions[i - 1].input);
      std::snprintf(buf, sizeof buf, "\t%.6f\t", actions[i - 1].action);
      out += buf;
    }
    out += format_segments(steps[i].stack, alphabet);
    out += '\n';
  }
  return out;
}

}  // namespace nnpda
