#include <cmath>
#include <random>

#include "doctest.h"
#include "nnpda/controller.hpp"
#include "nnpda/extraction.hpp"
#include "nnpda/model.hpp"

using namespace nnpda;

namespace {

std::string data(const char* name) { return std::string(NNPDA_DATA_DIR) + "/" + name; }

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

WeightSet constructed(const DiscretePda& pda, WeightOrder order = WeightOrder::third) {
  NetworkShape sh{required_state_neurons(pda), pda.alphabet.size(), pda.alphabet.size() + 1, 1};
  return construct_from_pda(pda, sh, 20.0, order);
}

}  // namespace

TEST_CASE("extended state sums to one") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10000; ++t) {
    const auto s = random_unit(rng, 1 + t % 5);
    double sum = 0.0;
    for (double p : extended_state(s).p) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  const std::vector<double> corner{1.0, 0.0, 1.0};
  CHECK(extended_state(corner).p[0b101] == 1.0);
}

TEST_CASE("extended state jacobian matches finite differences") {
  std::mt19937_64 rng(9);
  const double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    auto s = random_unit(rng, 3);
    // Saturated components use one-sided differences.
    if (t % 4 == 1) s[0] = 0.0;
    if (t % 4 == 2) s[1] = 1.0;
    const auto jac = extended_state_jacobian(s);
    for (std::size_t m = 0; m < 3; ++m) {
      auto up = s, dn = s;
      double span = 2 * h;
      up[m] = std::min(1.0, s[m] + h);
      dn[m] = std::max(0.0, s[m] - h);
      span = up[m] - dn[m];
      const auto pu = extended_state(up).p, pd = extended_state(dn).p;
      for (std::size_t j = 0; j < pu.size(); ++j) {
        const double fd = (pu[j] - pd[j]) / span;
        const double an = jac[j * 3 + m];
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("third order step matches a naive oracle") {
  NetworkShape sh{2, 2, 2, 1};
  const auto w = random_weights(WeightOrder::third, sh, ActionActivation::bipolar, 4, 1.0);
  const std::vector<double> s{0.3, 0.8}, r{0.25, 0.75}, in{0, 1};
  const auto out = step(w, s, r, in);
  const auto& p = w.params();
  for (std::size_t i = 0; i < 2; ++i) {
    double net = p[w.theta_s_offset() + i];
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) net += p[((i * 2 + j) * 2 + k) * 2 + l] * s[j] * r[k] * in[l];
    CHECK(std::abs(out.next_s[i] - 1.0 / (1.0 + std::exp(-net))) <= 1e-12);
  }
  double net_a = p[w.theta_a_offset()];
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t l = 0; l < 2; ++l)
        net_a += p[w.w_action_offset() + (j * 2 + k) * 2 + l] * s[j] * r[k] * in[l];
  CHECK(std::abs(out.next_a - (2.0 / (1.0 + std::exp(-net_a)) - 1.0)) <= 1e-12);
}

TEST_CASE("second order sees the concatenated reading and input") {
  NetworkShape sh{2, 3, 3, 1};
  auto w = random_weights(WeightOrder::second, sh, ActionActivation::bipolar, 2, 1.0);
  CHECK(w.context_size() == 6);
  const std::vector<double> r{0.5, 0.5, 0}, in{0, 0, 1};
  CHECK(context_vector(w, r, in) == std::vector<double>{0.5, 0.5, 0, 0, 0, 1});
}

TEST_CASE("full order linear action stays in [-1, 1]") {
  std::mt19937_64 rng(17);
  NetworkShape sh{3, 3, 4, 1};
  for (int t = 0; t < 10000; ++t) {
    auto w = random_weights(WeightOrder::full_order, sh, ActionActivation::linear, t, 3.0);
    for (double x : w.w_action()) REQUIRE(std::abs(x) <= 1.0);
    const auto s = random_unit(rng, 3);
    auto r = random_unit(rng, 4);
    double sum = 0;
    for (auto x : r) sum += x;
    for (auto& x : r) x /= sum;
    std::vector<double> in(3, 0.0);
    in[t % 3] = 1.0;
    CHECK(std::abs(step(w, s, r, in).next_a) <= 1.0);
  }
  CHECK_THROWS(WeightSet(WeightOrder::third, sh, ActionActivation::linear));
}

TEST_CASE("constructed bracket machine") {
  const auto pda = DiscretePda::load(data("balanced.pda"));
  const auto w = constructed(pda);
  const auto run = run_sequence(w, pda.alphabet, pda.alphabet.encode("10"), {kDefaultEpsilon, true});
  REQUIRE(run.steps.size() == 3);
  CHECK(run.steps[1].stack.total_length() <= 1e-6);
  // Before the end symbol the machine sits in state 2.
  CHECK(run.steps[1].state[1] > 0.99);
  CHECK(classify(run, ClassifyRule::state_and_stack));
  const auto rep = compare_network_to_pda(w, pda, 10);
  CHECK(rep.checked == 2046);
  CHECK(rep.disagreements == 0);
}

TEST_CASE("constructed centre-marked machine") {
  const auto pda = DiscretePda::load(data("center_palindrome.pda"));
  for (auto order : {WeightOrder::third, WeightOrder::full_order}) {
    const auto w = constructed(pda, order);
    const auto run = run_sequence(w, pda.alphabet, pda.alphabet.encode("bacab"));
    // Full order pays the product of saturated sigmoids in every P_J.
    CHECK(run.stack.total_length() <= (order == WeightOrder::third ? 1e-6 : 2e-3));
    CHECK(classify(run, ClassifyRule::state_and_stack));
    const auto rep = compare_network_to_pda(w, pda, order == WeightOrder::third ? 10 : 7);
    CHECK(rep.disagreements == 0);
  }
}

TEST_CASE("constructed random machines") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pda = random_pda(2, 2, seed);
    CHECK_MESSAGE(compare_network_to_pda(constructed(pda), pda, 6).ok(), seed);
  }
}

TEST_CASE("classification rules") {
  RunResult run;
  run.final_state = {0.0, 0.9};
  CHECK(classify(run, ClassifyRule::h_measure));
  run.stack = ContinuousStack::from_segments({{0, 0.45}});
  CHECK_FALSE(classify(run, ClassifyRule::h_measure));
  CHECK(classify(run, ClassifyRule::state_and_stack));
  run.pop_empty.push_back({1, 1e-7});
  CHECK(classify(run, ClassifyRule::state_and_stack));
  run.pop_empty.push_back({2, 0.01});
  CHECK_FALSE(classify(run, ClassifyRule::state_and_stack));
  CHECK(classify(run, ClassifyRule::state_and_stack, false));
}

TEST_CASE("model text round trip is exact") {
  NetworkShape sh{3, 3, 4, 1};
  for (auto order : {WeightOrder::second, WeightOrder::third, WeightOrder::full_order}) {
    const auto act = order == WeightOrder::full_order ? ActionActivation::linear : ActionActivation::bipolar;
    Model m{Alphabet({'a', 'b', 'c'}, std::nullopt), random_weights(order, sh, act, 3, 1.0), 0.05,
            ClassifyRule::state_and_stack, false};
    m.weights.set_initial_state({0.125, 1.0 / 3.0, 0.0});
    const auto text = save_model_text(m);
    CHECK(parse_model_text(text) == m);
    CHECK(save_model_text(parse_model_text(text)) == text);
  }
  CHECK_THROWS(parse_model_text("nnpda-model 9\n"));
}
