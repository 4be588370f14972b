#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nnpda/controller.hpp"
#include "nnpda/grammars.hpp"

namespace nnpda {

// d(quantity)/d(parameter p) for every parameter, stored [p][component].
struct SensitivitySet {
  std::size_t params = 0, n_state = 0, n_read = 0;
  std::vector<double> ds;  // d S_i
  std::vector<double> da;  // d A
  std::vector<double> dr;  // d R_k
  std::vector<double> dl;  // d L

  SensitivitySet() = default;
  SensitivitySet(std::size_t p, std::size_t ns, std::size_t nr);
  void reset();
  bool finite() const;

  double* ds_row(std::size_t p) { return ds.data() + p * n_state; }
  const double* ds_row(std::size_t p) const { return ds.data() + p * n_state; }
  double* dr_row(std::size_t p) { return dr.data() + p * n_read; }
  const double* dr_row(std::size_t p) const { return dr.data() + p * n_read; }
};

// One RTRL step: from the sensitivities of S^t, R^t (in `in`) and the step
// Jacobian, compute d S^{t+1} and d A^{t+1} into `out`. `s_prev` is S^t.
// `action_gate` multiplies dA (0 when the action was clipped). dL and dR are
// left for the caller, which knows the stack.
void propagate_sensitivities_serial(const WeightSet& w, const StepJacobian& jac,
                                    std::span<const double> s_prev, double action_gate,
                                    const SensitivitySet& in, SensitivitySet& out);
void propagate_sensitivities_parallel(const WeightSet& w, const StepJacobian& jac,
                                      std::span<const double> s_prev, double action_gate,
                                      const SensitivitySet& in, SensitivitySet& out);

struct ClassifyCounts {
  std::uint64_t total = 0, correct = 0;
  std::uint64_t legal = 0, legal_correct = 0;
  std::uint64_t illegal = 0, illegal_correct = 0;
  std::vector<std::string> errors;  // first misclassified strings, in order

  double accuracy() const { return total ? double(correct) / double(total) : 1.0; }
  bool operator==(const ClassifyCounts&) const = default;
};

struct ClassifySettings {
  double epsilon = kDefaultEpsilon;
  ClassifyRule rule = ClassifyRule::h_measure;
  bool pop_empty_rejects = true;
  std::size_t keep_errors = 32;
};

ClassifyCounts classify_range_serial(const WeightSet& w, Grammar g,
                                     const StringEnumerator& strings,
                                     const ClassifySettings& settings);
ClassifyCounts classify_range_parallel(const WeightSet& w, Grammar g,
                                       const StringEnumerator& strings,
                                       const ClassifySettings& settings);

bool openmp_enabled();
int max_threads();
void set_threads(int n);  // n <= 0 leaves the runtime default

}  // namespace nnpda
