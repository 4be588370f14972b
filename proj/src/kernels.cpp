#include "nnpda/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nnpda {

SensitivitySet::SensitivitySet(std::size_t p, std::size_t ns, std::size_t nr)
    : params(p), n_state(ns), n_read(nr) {
  reset();
}

void SensitivitySet::reset() {
  ds.assign(params * n_state, 0.0);
  da.assign(params, 0.0);
  dr.assign(params * n_read, 0.0);
  dl.assign(params, 0.0);
}

bool SensitivitySet::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(ds) && ok(da) && ok(dr) && ok(dl);
}

namespace {

struct Layout {
  std::size_t ns, nr, nc, w_action, theta_s, theta_a, end;
  bool has_theta_a;
};

Layout layout_of(const WeightSet& w) {
  return {w.shape().n_state, w.shape().n_read,   w.context_size(),
          w.w_action_offset(), w.theta_s_offset(), w.theta_a_offset(),
          w.parameter_count(), w.has_theta_a()};
}

// Sensitivity update for parameter p. Shared by both kernels so they agree
// bit for bit.
inline void propagate_one(std::size_t p, const Layout& ly, const StepJacobian& jac,
                          std::span<const double> s_prev, double action_gate,
                          const SensitivitySet& in, SensitivitySet& out) {
  const double* ds_in = in.ds_row(p);
  const double* dr_in = in.dr_row(p);
  double* ds_out = out.ds_row(p);

  // Explicit dependence of net_i / net_a on p.
  std::size_t explicit_i = ly.ns;  // none
  double explicit_s = 0.0, explicit_a = 0.0;
  if (p < ly.w_action) {
    const std::size_t c = p % ly.nc, j = (p / ly.nc) % ly.ns;
    explicit_i = p / (ly.nc * ly.ns);
    explicit_s = s_prev[j] * jac.context[c];
  } else if (p < ly.theta_s) {
    const std::size_t q = p - ly.w_action;
    explicit_a = jac.action_basis[q / ly.nc] * jac.context[q % ly.nc];
  } else if (p < ly.theta_a) {
    explicit_i = p - ly.theta_s;
    explicit_s = 1.0;
  } else {
    explicit_a = 1.0;
  }

  for (std::size_t i = 0; i < ly.ns; ++i) {
    const double* row_s = jac.ds_ds.data() + i * ly.ns;
    const double* row_r = jac.ds_dr.data() + i * ly.nr;
    double acc = i == explicit_i ? explicit_s : 0.0;
    for (std::size_t j = 0; j < ly.ns; ++j) acc += row_s[j] * ds_in[j];
    for (std::size_t k = 0; k < ly.nr; ++k) acc += row_r[k] * dr_in[k];
    ds_out[i] = jac.g_prime[i] * acc;
  }
  double acc = explicit_a;
  for (std::size_t m = 0; m < ly.ns; ++m) acc += jac.da_ds[m] * ds_in[m];
  for (std::size_t k = 0; k < ly.nr; ++k) acc += jac.da_dr[k] * dr_in[k];
  out.da[p] = action_gate * jac.f_prime * acc;
}

}  // namespace

void propagate_sensitivities_serial(const WeightSet& w, const StepJacobian& jac,
                                    std::span<const double> s_prev, double action_gate,
                                    const SensitivitySet& in, SensitivitySet& out) {
  const Layout ly = layout_of(w);
  for (std::size_t p = 0; p < ly.end; ++p)
    propagate_one(p, ly, jac, s_prev, action_gate, in, out);
}

void propagate_sensitivities_parallel(const WeightSet& w, const StepJacobian& jac,
                                      std::span<const double> s_prev, double action_gate,
                                      const SensitivitySet& in, SensitivitySet& out) {
  const Layout ly = layout_of(w);
  const auto n = static_cast<std::ptrdiff_t>(ly.end);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p)
    propagate_one(static_cast<std::size_t>(p), ly, jac, s_prev, action_gate, in, out);
}

namespace {

void classify_one(const WeightSet& w, Grammar g, const Alphabet& alphabet,
                  const std::string& s, const ClassifySettings& settings, ClassifyCounts& c,
                  std::vector<std::pair<std::uint64_t, std::string>>& errors,
                  std::uint64_t index) {
  const bool legal = label(g, s);
  const auto symbols = alphabet.encode(s);
  const RunResult run = run_sequence(w, alphabet, symbols, {settings.epsilon, false});
  const bool ok = classify(run, settings.rule, settings.pop_empty_rejects) == legal;
  ++c.total;
  (legal ? c.legal : c.illegal)++;
  if (ok) {
    ++c.correct;
    (legal ? c.legal_correct : c.illegal_correct)++;
  } else if (errors.size() < settings.keep_errors) {
    errors.emplace_back(index, s);
  }
}

void merge_counts(ClassifyCounts& into, const ClassifyCounts& c) {
  into.total += c.total;
  into.correct += c.correct;
  into.legal += c.legal;
  into.legal_correct += c.legal_correct;
  into.illegal += c.illegal;
  into.illegal_correct += c.illegal_correct;
}

}  // namespace

ClassifyCounts classify_range_serial(const WeightSet& w, Grammar g,
                                     const StringEnumerator& strings,
                                     const ClassifySettings& settings) {
  const Alphabet alphabet = grammar_alphabet(g);
  ClassifyCounts counts;
  std::vector<std::pair<std::uint64_t, std::string>> errors;
  for (std::uint64_t i = 0; i < strings.count(); ++i)
    classify_one(w, g, alphabet, strings.at(i), settings, counts, errors, i);
  for (auto& e : errors) counts.errors.push_back(std::move(e.second));
  return counts;
}

ClassifyCounts classify_range_parallel(const WeightSet& w, Grammar g,
                                       const StringEnumerator& strings,
                                       const ClassifySettings& settings) {
  const Alphabet alphabet = grammar_alphabet(g);
  ClassifyCounts counts;
  std::vector<std::pair<std::uint64_t, std::string>> errors;
  const auto n = static_cast<std::int64_t>(strings.count());
#pragma omp parallel
  {
    ClassifyCounts local;
    std::vector<std::pair<std::uint64_t, std::string>> local_errors;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::uint64_t>(i);
      classify_one(w, g, alphabet, strings.at(idx), settings, local, local_errors, idx);
    }
#pragma omp critical
    {
      merge_counts(counts, local);
      errors.insert(errors.end(), local_errors.begin(), local_errors.end());
    }
  }
  // Static scheduling gives each thread a contiguous block, so the first
  // keep_errors after sorting are the global first ones.
  std::sort(errors.begin(), errors.end());
  if (errors.size() > settings.keep_errors) errors.resize(settings.keep_errors);
  for (auto& e : errors) counts.errors.push_back(std::move(e.second));
  return counts;
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace nnpda
