#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nnpda/controller.hpp"
#include "nnpda/grammars.hpp"
#include "nnpda/kernels.hpp"

namespace nnpda {

// Thrown when a weight, state or sensitivity stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// unified: E = (v + L - S_last)^2 at the end of the string.
// trap_state: supervise the last state neuron as a trap flag and the stack
// length separately; a string stops at the symbol that makes it unviable.
enum class Objective { unified, trap_state };

// What to do when a pop meets an empty stack during training.
// stop_and_grow_stack: stop the string, push L^t up by the deficit.
// illegal_only_skip: stop illegal strings without a correction; legal
//   strings continue.
// stop_with_hint: stop; grow the stack for legal strings, shrink it further
//   for illegal ones.
// ignore: keep going as if nothing happened.
enum class PopEmptyPolicy { stop_and_grow_stack, illegal_only_skip, stop_with_hint, ignore };
enum class UpdateMode { stochastic, batch };
enum class KernelMode { automatic, serial, parallel };

const char* to_string(Objective o);
const char* to_string(PopEmptyPolicy p);
const char* to_string(UpdateMode m);
const char* to_string(KernelMode m);

struct LengthStage {
  std::size_t max_len = 0;
  std::size_t epochs = 0;  // 0 on the last stage: until training ends

  bool operator==(const LengthStage&) const = default;
};

struct TrainingConfig {
  Grammar grammar = Grammar::paren;
  WeightOrder order = WeightOrder::second;
  ActionActivation action_activation = ActionActivation::bipolar;
  std::size_t n_state = 3;
  bool empty_neuron = false;  // extra reading neuron for the empty stack

  Objective objective = Objective::unified;
  ClassifyRule rule = ClassifyRule::h_measure;
  bool pop_empty_rejects = true;  // when classifying
  PopEmptyPolicy pop_empty = PopEmptyPolicy::stop_and_grow_stack;
  UpdateMode mode = UpdateMode::stochastic;
  KernelMode kernels = KernelMode::automatic;

  std::optional<double> eta;  // default 0.5 stochastic, 0.05 batch
  double epsilon = kDefaultEpsilon;
  double legal_rate_multiplier = 5.0;
  // Size of the +-dL/dW correction made when a pop meets an empty stack.
  double pop_empty_step = 1.0;
  std::size_t interleave = 5;  // one legal string after every k illegal; 0 off
  bool shuffle = true;
  double init_range = 1.0;
  std::uint64_t seed = 1;

  std::size_t max_epochs = 500;
  // Epochs for each dataset stage; empty means one stage of max_epochs.
  std::vector<std::size_t> stage_epochs;
  std::vector<LengthStage> length_schedule;
  bool stop_when_perfect = true;

  double learning_rate() const { return eta.value_or(mode == UpdateMode::batch ? 0.05 : 0.5); }
  NetworkShape shape() const;
  void validate() const;

  // Flat "key = value" file; unknown keys are errors.
  std::string to_text() const;
  static TrainingConfig parse(std::string_view text);
  static TrainingConfig load(const std::string& path);

  bool operator==(const TrainingConfig&) const = default;
};

// Forward pass plus sensitivities, one input symbol at a time.
class RtrlTracker {
 public:
  RtrlTracker(const WeightSet& w, KernelMode kernels = KernelMode::automatic);

  void reset();
  // Advance with the current reading R^t and its sensitivity (set through
  // reading_sensitivity()). Returns the raw action A^{t+1}.
  double advance(std::span<const double> reading, SymbolIndex input);

  const std::vector<double>& state() const { return s_; }
  double action() const { return a_; }
  SensitivitySet& sensitivities() { return sens_; }
  const SensitivitySet& sensitivities() const { return sens_; }

 private:
  const WeightSet* w_;
  bool parallel_;
  std::vector<double> s_;
  std::vector<double> input_;
  double a_ = 0.0;
  SensitivitySet sens_, next_;
};

// Gradient-free helpers the tests use as independent checks.
double unified_target(bool legal, double s_last, double l);
double unified_error(bool legal, double s_last, double l);

struct StringOutcome {
  double error = 0.0;
  bool pop_empty = false;
  bool trapped = false;
  std::size_t steps = 0;
};

// Runs one labelled string and adds the weight change direction (before the
// learning rate) to `delta`.
StringOutcome accumulate_string(const WeightSet& w, const LabeledEntry& entry,
                                const TrainingConfig& cfg, std::vector<double>& delta);

struct EpochMetrics {
  std::size_t epoch = 0;
  int stage = 0;
  double mean_error = 0.0;
  double train_accuracy = 0.0;
  std::size_t pop_empty_count = 0;
};

std::string metrics_header();
std::string format_metrics(const EpochMetrics& m);

struct TrainResult {
  WeightSet weights;
  std::vector<EpochMetrics> history;
  bool converged = false;  // reached full accuracy on the last stage
};

struct TrainOptions {
  std::optional<WeightSet> initial;  // resume from these weights
  std::size_t start_epoch = 0;
  std::function<void(const EpochMetrics&, const WeightSet&)> on_epoch;
};

TrainResult train(const LabeledDataset& data, const TrainingConfig& cfg,
                  const TrainOptions& opts = {});

WeightSet initial_weights(const TrainingConfig& cfg);

// Accuracy of `w` on `entries` under the config's classification settings.
double dataset_accuracy(const WeightSet& w, Grammar g, const std::vector<LabeledEntry>& entries,
                        double epsilon, ClassifyRule rule, bool pop_empty_rejects = true);

// Every string of length 1..max_len the network gets wrong, in shortlex
// order (at most `limit`).
std::vector<std::string> misclassified_strings(const WeightSet& w, Grammar g,
                                               std::size_t max_len, double epsilon,
                                               ClassifyRule rule, bool pop_empty_rejects,
                                               std::size_t limit = SIZE_MAX);

// Adds misclassified strings (the "error set") to the training data.
LabeledDataset augment_with_errors(const LabeledDataset& data,
                                   const std::vector<std::string>& errors, int stage);

struct AugmentOptions {
  std::size_t max_rounds = 8;
  std::size_t first_test_len = 8;  // grows by one each round
  std::size_t max_test_len = 12;
  std::size_t max_added = 64;  // per round
};

struct AugmentRound {
  std::size_t test_len = 0;
  double train_accuracy = 0.0;
  std::vector<std::string> errors;
};

struct AugmentResult {
  WeightSet weights;
  LabeledDataset data;
  std::vector<AugmentRound> rounds;
  bool terminated = false;  // the last round found no errors
};

// Train, test exhaustively, add the errors, retrain from the current weights.
AugmentResult augment_retrain_loop(const LabeledDataset& data, const TrainingConfig& cfg,
                                   const AugmentOptions& opts = {});

}  // namespace nnpda
