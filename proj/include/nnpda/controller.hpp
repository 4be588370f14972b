#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nnpda/core.hpp"
#include "nnpda/pda.hpp"
#include "nnpda/stack.hpp"

namespace nnpda {

// second: state and action nets see S_j * (R (+) I)_k.
// third: they see S_j * R_k * I_l.
// full_order: third-order state net; the action net sees P_J * R_k * I_l over
// all 2^N_S binary corners J.
enum class WeightOrder { second, third, full_order };
enum class ActionActivation { bipolar, linear };  // f = 2g - 1, or f = x

const char* to_string(WeightOrder o);
const char* to_string(ActionActivation a);
WeightOrder parse_weight_order(std::string_view s);
ActionActivation parse_action_activation(std::string_view s);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Controller parameters, stored in one flat vector laid out as
// [w_state | w_action | theta_s | theta_a?]. Training treats every entry,
// biases included, as one weight.
class WeightSet {
 public:
  WeightSet() = default;
  WeightSet(WeightOrder order, NetworkShape shape, ActionActivation action_activation);

  WeightOrder order() const { return order_; }
  const NetworkShape& shape() const { return shape_; }
  ActionActivation action_activation() const { return action_activation_; }
  bool has_theta_a() const { return action_activation_ != ActionActivation::linear; }

  // Length of the context vector X each weight row multiplies: N_R + N_I for
  // second order, N_R * N_I otherwise.
  std::size_t context_size() const;
  // Rows of the action tensor: N_S, or 2^N_S for full order.
  std::size_t action_rows() const;

  std::size_t w_state_size() const { return shape_.n_state * shape_.n_state * context_size(); }
  std::size_t w_action_size() const { return action_rows() * context_size(); }
  std::size_t w_action_offset() const { return w_state_size(); }
  std::size_t theta_s_offset() const { return w_action_offset() + w_action_size(); }
  std::size_t theta_a_offset() const { return theta_s_offset() + shape_.n_state; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> w_state() { return {params_.data(), w_state_size()}; }
  std::span<const double> w_state() const { return {params_.data(), w_state_size()}; }
  std::span<double> w_action() { return {params_.data() + w_action_offset(), w_action_size()}; }
  std::span<const double> w_action() const {
    return {params_.data() + w_action_offset(), w_action_size()};
  }
  std::span<double> theta_s() { return {params_.data() + theta_s_offset(), shape_.n_state}; }
  std::span<const double> theta_s() const {
    return {params_.data() + theta_s_offset(), shape_.n_state};
  }
  double theta_a() const { return has_theta_a() ? params_[theta_a_offset()] : 0.0; }
  void set_theta_a(double v);

  // Context index of (reading k, input l); for second order pass l as the
  // concatenated position instead.
  std::size_t context_index(std::size_t k, std::size_t l) const {
    return k * shape_.n_input + l;
  }
  double& ws(std::size_t i, std::size_t j, std::size_t c) {
    return params_[(i * shape_.n_state + j) * context_size() + c];
  }
  double ws(std::size_t i, std::size_t j, std::size_t c) const {
    return params_[(i * shape_.n_state + j) * context_size() + c];
  }
  double& wa(std::size_t row, std::size_t c) {
    return params_[w_action_offset() + row * context_size() + c];
  }
  double wa(std::size_t row, std::size_t c) const {
    return params_[w_action_offset() + row * context_size() + c];
  }

  const std::vector<double>& initial_state() const { return initial_state_; }
  void set_initial_state(std::vector<double> s);

  // Clamp full-order linear action weights to [-1, 1].
  void truncate_action_weights();
  void check_finite() const;

  bool operator==(const WeightSet&) const = default;

 private:
  WeightOrder order_ = WeightOrder::third;
  NetworkShape shape_;
  ActionActivation action_activation_ = ActionActivation::bipolar;
  std::vector<double> params_;
  std::vector<double> initial_state_;
};

// Uniform initialisation on [-range, range], biases included.
WeightSet random_weights(WeightOrder order, NetworkShape shape, ActionActivation act,
                         std::uint64_t seed, double range);

// Product-form soft indicator of every binary corner of `s`. Bit m of J
// (least significant first) selects s_m (1) or 1 - s_m (0).
struct ExtendedState {
  std::vector<double> p;
  static bool bit(std::size_t corner, std::size_t m) { return (corner >> m) & 1u; }
};

ExtendedState extended_state(std::span<const double> s);
// d P_J / d S_m as a 2^n x n row-major matrix, via leave-one-out products.
std::vector<double> extended_state_jacobian(std::span<const double> s);

// Context vector X for a reading/input pair.
std::vector<double> context_vector(const WeightSet& w, std::span<const double> reading,
                                   std::span<const double> input);

struct StepResult {
  std::vector<double> next_s;
  double next_a = 0.0;
};

StepResult step(const WeightSet& w, std::span<const double> s, std::span<const double> reading,
                std::span<const double> input);

// Everything RTRL needs from one forward step.
struct StepJacobian {
  std::vector<double> next_s;
  double next_a = 0.0;
  std::vector<double> context;       // X
  std::vector<double> action_basis;  // S, or P for full order
  std::vector<double> g_prime;       // S'(1 - S')
  double f_prime = 1.0;
  std::vector<double> ds_ds;  // d net_i / d S_j        (N_S x N_S)
  std::vector<double> ds_dr;  // d net_i / d R_k        (N_S x N_R)
  std::vector<double> da_ds;  // d net_a / d S_m        (N_S)
  std::vector<double> da_dr;  // d net_a / d R_k        (N_R)
};

StepJacobian step_with_jacobian(const WeightSet& w, std::span<const double> s,
                                std::span<const double> reading, std::span<const double> input);

enum class ClassifyRule { h_measure, state_and_stack };
const char* to_string(ClassifyRule r);
ClassifyRule parse_classify_rule(std::string_view s);

struct RunStep {
  SymbolIndex input = 0;
  std::vector<double> state;  // S after this input
  double action = 0.0;        // A produced by this input
  ActionOutcome outcome;
  ContinuousStack stack;      // only when tracing
  std::vector<double> reading;
};

struct PopEmptyEvent {
  std::size_t step = 0;
  double deficit = 0.0;
};

struct RunResult {
  std::vector<double> final_state;
  double final_action = 0.0;
  ContinuousStack stack;
  std::vector<RunStep> steps;  // filled when tracing
  std::vector<PopEmptyEvent> pop_empty;
  // Output of the last state neuron before and after the end symbol.
  double final_s_last() const { return final_state.back(); }
};

struct RunOptions {
  double epsilon = kDefaultEpsilon;
  bool trace = false;
};

// Runs the controller and the continuous stack over `string` (end symbol
// appended when the alphabet declares one). R^0 is the empty-stack reading,
// A^0 = 0, S^0 = weights.initial_state().
RunResult run_sequence(const WeightSet& w, const Alphabet& alphabet,
                       std::span<const SymbolIndex> string, const RunOptions& opts = {});

// Deficits at or below this size are treated as float noise when classifying.
inline constexpr double kPopEmptyClassifyTolerance = 1e-6;

bool classify(const RunResult& run, ClassifyRule rule, bool pop_empty_rejects = true);
double h_measure(double s_ns, double l);

// Third- or full-order weights whose saturated behaviour reproduces `pda`.
// The start state occupies neuron 0. A single non-start accepting state sits
// on the last neuron; otherwise the last neuron is an accept flag. Requires
// the empty-stack reading neuron.
WeightSet construct_from_pda(const DiscretePda& pda, NetworkShape shape, double gain = 20.0,
                             WeightOrder order = WeightOrder::third);
// Smallest state-neuron count construct_from_pda needs for `pda`.
std::size_t required_state_neurons(const DiscretePda& pda);

}  // namespace nnpda
