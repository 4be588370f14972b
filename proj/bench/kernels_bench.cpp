#include <benchmark/benchmark.h>

#include "nnpda/kernels.hpp"

using namespace nnpda;

namespace {

struct SensFixture {
  WeightSet w;
  StepJacobian jac;
  std::vector<double> s;
  SensitivitySet in, out;

  explicit SensFixture(std::size_t ns) {
    NetworkShape sh{ns, 3, 4, 1};
    w = random_weights(WeightOrder::full_order, sh, ActionActivation::linear, 3, 0.5);
    s.assign(ns, 0.5);
    const std::vector<double> r{0.2, 0.3, 0.1, 0.4}, i{0, 1, 0};
    jac = step_with_jacobian(w, s, r, i);
    in = SensitivitySet(w.parameter_count(), ns, 4);
    out = in;
    for (std::size_t k = 0; k < in.ds.size(); ++k) in.ds[k] = 1e-3 * double(k % 7);
  }
};

void BM_SensitivitySerial(benchmark::State& st) {
  SensFixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    propagate_sensitivities_serial(f.w, f.jac, f.s, 1.0, f.in, f.out);
    benchmark::DoNotOptimize(f.out.ds.data());
  }
  st.counters["params"] = double(f.w.parameter_count());
}

void BM_SensitivityParallel(benchmark::State& st) {
  SensFixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    propagate_sensitivities_parallel(f.w, f.jac, f.s, 1.0, f.in, f.out);
    benchmark::DoNotOptimize(f.out.ds.data());
  }
  st.counters["params"] = double(f.w.parameter_count());
}

const WeightSet& classify_weights() {
  static const WeightSet w = random_weights(WeightOrder::second, NetworkShape{3, 3, 3, 1},
                                            ActionActivation::bipolar, 11, 2.0);
  return w;
}

void BM_ClassifySerial(benchmark::State& st) {
  const StringEnumerator strings({'1', '0'}, static_cast<std::size_t>(st.range(0)), 1);
  for (auto _ : st)
    benchmark::DoNotOptimize(classify_range_serial(classify_weights(), Grammar::paren, strings, {}));
  st.counters["strings"] = double(strings.count());
}

void BM_ClassifyParallel(benchmark::State& st) {
  const StringEnumerator strings({'1', '0'}, static_cast<std::size_t>(st.range(0)), 1);
  for (auto _ : st)
    benchmark::DoNotOptimize(classify_range_parallel(classify_weights(), Grammar::paren, strings, {}));
  st.counters["strings"] = double(strings.count());
  st.counters["threads"] = max_threads();
}

}  // namespace

BENCHMARK(BM_SensitivitySerial)->Arg(3)->Arg(5)->Arg(7);
BENCHMARK(BM_SensitivityParallel)->Arg(3)->Arg(5)->Arg(7);
BENCHMARK(BM_ClassifySerial)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyParallel)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
