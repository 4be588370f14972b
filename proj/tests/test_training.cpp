#include <random>

#include "doctest.h"
#include "nnpda/training.hpp"

using namespace nnpda;

namespace {

struct Frozen {
  std::vector<std::vector<double>> readings;
  std::vector<SymbolIndex> inputs;
};

Frozen make_frozen(const WeightSet& w, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> sym(0, w.shape().n_input - 1);
  Frozen f;
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<double> r(w.shape().n_read);
    for (auto& x : r) x = u(rng);
    f.readings.push_back(r);
    f.inputs.push_back(sym(rng));
  }
  return f;
}

// Forward pass with the readings held fixed; L is the plain sum of actions.
std::pair<double, double> frozen_forward(const WeightSet& w, const Frozen& f) {
  std::vector<double> s = w.initial_state();
  double l = 0.0;
  for (std::size_t t = 0; t < f.inputs.size(); ++t) {
    const auto in = one_hot(f.inputs[t], w.shape().n_input);
    const auto st = step(w, s, f.readings[t], in);
    s = st.next_s;
    l += st.next_a;
  }
  return {s.back(), l};
}

void check_gradient(WeightOrder order, ActionActivation act, std::size_t ns, std::size_t len,
                    bool legal, std::uint64_t seed) {
  NetworkShape shape{ns, 3, 4, 1};
  WeightSet w = random_weights(order, shape, act, seed, 1.0);
  if (act == ActionActivation::linear) {
    // Keep |A| well inside the clip.
    for (double& x : w.w_action()) x *= 0.2;
  }
  const Frozen f = make_frozen(w, len, seed + 7);

  RtrlTracker tracker(w, KernelMode::serial);
  for (std::size_t t = 0; t < len; ++t) {
    const double a = tracker.advance(f.readings[t], f.inputs[t]);
    REQUIRE(std::abs(a) < 1.0);
  }
  const auto [s0, l0] = frozen_forward(w, f);
  CHECK(tracker.state().back() == doctest::Approx(s0).epsilon(1e-14));
  const double v = unified_target(legal, s0, l0);
  const double e0 = v + l0 - s0;
  const auto& sens = tracker.sensitivities();

  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t p = 0; p < w.parameter_count(); ++p) {
    const double rtrl = 2.0 * e0 * (sens.dl[p] - sens.ds[p * ns + ns - 1]);
    WeightSet wp = w, wm = w;
    wp.params()[p] += h;
    wm.params()[p] -= h;
    const auto [sp, lp] = frozen_forward(wp, f);
    const auto [sm, lm] = frozen_forward(wm, f);
    const double ep = v + lp - sp, em = v + lm - sm;
    const double fd = (ep * ep - em * em) / (2 * h);
    const double scale = std::max(1e-6, std::max(std::abs(fd), std::abs(rtrl)));
    if (std::abs(fd - rtrl) / scale > 1e-4) {
      INFO("param " << p << " fd " << fd << " rtrl " << rtrl);
      CHECK(std::abs(fd - rtrl) / scale <= 1e-4);
    }
    ++checked;
  }
  CHECK(checked == w.parameter_count());
}

}  // namespace

TEST_CASE("rtrl gradient matches finite differences, second order") {
  for (std::size_t len = 1; len <= 4; ++len) check_gradient(WeightOrder::second, ActionActivation::bipolar, 3, len, true, 11 + len);
  check_gradient(WeightOrder::second, ActionActivation::bipolar, 3, 4, false, 5);
}

TEST_CASE("rtrl gradient matches finite differences, third order") {
  for (std::size_t len = 1; len <= 4; ++len) check_gradient(WeightOrder::third, ActionActivation::bipolar, 4, len, true, 21 + len);
}

TEST_CASE("rtrl gradient matches finite differences, full order") {
  for (std::size_t len = 1; len <= 4; ++len) check_gradient(WeightOrder::full_order, ActionActivation::linear, 3, len, true, 31 + len);
  check_gradient(WeightOrder::full_order, ActionActivation::bipolar, 3, 3, true, 41);
}

TEST_CASE("serial and parallel sensitivity kernels agree bit for bit") {
  NetworkShape shape{4, 3, 4, 1};
  WeightSet w = random_weights(WeightOrder::full_order, shape, ActionActivation::linear, 3, 1.0);
  for (double& x : w.w_action()) x *= 0.2;
  const Frozen f = make_frozen(w, 6, 9);
  RtrlTracker a(w, KernelMode::serial), b(w, KernelMode::parallel);
  for (std::size_t t = 0; t < 6; ++t) {
    a.advance(f.readings[t], f.inputs[t]);
    b.advance(f.readings[t], f.inputs[t]);
    CHECK(a.sensitivities().ds == b.sensitivities().ds);
    CHECK(a.sensitivities().da == b.sensitivities().da);
  }
}

TEST_CASE("unified target") {
  CHECK(unified_target(true, 0.2, 3.0) == 1.0);
  CHECK(unified_target(false, 0.2, 0.5) == doctest::Approx(-0.3));
  CHECK(unified_target(false, 0.8, 0.1) == 0.0);
}

TEST_CASE("small steps do not increase the error") {
  // No no-op band and no pop-empty policy, so E is smooth in W.
  TrainingConfig cfg;
  cfg.grammar = Grammar::paren;
  cfg.order = WeightOrder::second;
  cfg.n_state = 3;
  cfg.seed = 1;
  cfg.epsilon = 0.0;
  cfg.pop_empty = PopEmptyPolicy::ignore;
  for (const LabeledEntry& entry : {LabeledEntry{"1100", true, 0}, LabeledEntry{"1100", false, 0},
                                    LabeledEntry{"1010", false, 0}, LabeledEntry{"0110", true, 0}}) {
    WeightSet w = initial_weights(cfg);
    std::vector<double> delta(w.parameter_count(), 0.0);
    double e = accumulate_string(w, entry, cfg, delta).error;
    std::size_t increases = 0;
    for (int it = 0; it < 100; ++it) {
      double norm = 0.0;
      auto p = w.params();
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] += 1e-3 * delta[i];
        norm += 1e-6 * delta[i] * delta[i];
      }
      std::fill(delta.begin(), delta.end(), 0.0);
      const double next = accumulate_string(w, entry, cfg, delta).error;
      if (next > e && std::sqrt(norm) >= 1e-9) ++increases;
      e = next;
    }
    CHECK_MESSAGE(increases == 0, entry.text);
  }
}

TEST_CASE("trap supervision stops at the first dead prefix") {
  TrainingConfig cfg;
  cfg.grammar = Grammar::palindrome;
  cfg.order = WeightOrder::full_order;
  cfg.action_activation = ActionActivation::linear;
  cfg.n_state = 3;
  cfg.empty_neuron = true;
  cfg.objective = Objective::trap_state;
  cfg.pop_empty = PopEmptyPolicy::ignore;
  const WeightSet w = initial_weights(cfg);
  std::vector<double> delta(w.parameter_count(), 0.0);
  const auto o = accumulate_string(w, {"acab", false, 0}, cfg, delta);
  CHECK(o.trapped);
  CHECK(o.steps == 4);
  const auto full = accumulate_string(w, {"bacab", true, 0}, cfg, delta);
  CHECK_FALSE(full.trapped);
  CHECK(full.steps == 5);
}

TEST_CASE("config text") {
  TrainingConfig cfg;
  cfg.grammar = Grammar::palindrome;
  cfg.stage_epochs = {200, 200};
  cfg.eta = 0.1;
  CHECK(TrainingConfig::parse(cfg.to_text()) == cfg);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("grammar = paren\nspeed = 3\n"),
                       doctest::Contains("speed"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("eta = 0.1\neta = 0.2\n"),
                       doctest::Contains("eta"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("n_state = many\n"), doctest::Contains("n_state"),
                       std::invalid_argument);
  CHECK_THROWS(TrainingConfig::parse("order = second\naction_activation = linear\n").validate());
  CHECK(TrainingConfig::parse("# comment\n\nmode = batch\n").learning_rate() == 0.05);
}

TEST_CASE("resuming continues the same run") {
  TrainingConfig cfg;
  cfg.grammar = Grammar::paren;
  cfg.eta = 0.1;
  cfg.seed = 2;
  cfg.max_epochs = 6;
  cfg.stop_when_perfect = false;
  const auto data = standard_dataset(Grammar::paren, 1);
  const auto straight = train(data, cfg);
  cfg.max_epochs = 3;
  const auto first = train(data, cfg);
  cfg.max_epochs = 6;
  TrainOptions opts;
  opts.initial = first.weights;
  opts.start_epoch = 3;
  const auto rest = train(data, cfg, opts);
  CHECK(rest.weights == straight.weights);
  REQUIRE(rest.history.size() == 3);
  CHECK(rest.history[0].epoch == 3);
  CHECK(rest.history[2].mean_error == straight.history[5].mean_error);
}

TEST_CASE("error set augmentation keeps true labels") {
  const auto d = augment_with_errors(anbn_fixture(), {"111000", "1101"}, 0);
  REQUIRE(d.entries.size() == 29);
  CHECK(d.entries[27].legal);
  CHECK_FALSE(d.entries[28].legal);
}
