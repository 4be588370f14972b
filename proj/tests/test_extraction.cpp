#include <regex>

#include "doctest.h"
#include "nnpda/extraction.hpp"

using namespace nnpda;

namespace {

std::string data(const char* name) { return std::string(NNPDA_DATA_DIR) + "/" + name; }

WeightSet constructed(const DiscretePda& pda, WeightOrder order = WeightOrder::third) {
  NetworkShape sh{required_state_neurons(pda), pda.alphabet.size(), pda.alphabet.size() + 1, 1};
  return construct_from_pda(pda, sh, 20.0, order);
}

}  // namespace

TEST_CASE("action quantization thresholds") {
  CHECK(quantize_action(0.51) == 1);
  CHECK(quantize_action(0.5) == 0);
  CHECK(quantize_action(-0.5) == 0);
  CHECK(quantize_action(-0.51) == -1);
  CHECK(quantize_action(0.0) == 0);
  CHECK(quantize_action(0.3, 0.2) == 1);
}

TEST_CASE("full order action weights quantize to -1, 0, 1") {
  NetworkShape sh{2, 3, 4, 1};
  auto w = WeightSet(WeightOrder::full_order, sh, ActionActivation::linear);
  w.wa(0, 0) = 0.9;
  w.wa(1, 1) = -0.7;
  w.wa(2, 2) = 0.5;
  w.wa(3, 3) = -0.2;
  const auto q = quantize_action_weights(w);
  CHECK(q[0] == 1);
  CHECK(q[w.context_size() + 1] == -1);
  CHECK(q[2 * w.context_size() + 2] == 0);
  CHECK(q[3 * w.context_size() + 3] == 0);
  const auto third = WeightSet(WeightOrder::third, sh, ActionActivation::bipolar);
  CHECK_THROWS(quantize_action_weights(third));
}

TEST_CASE("constructed centre-marked action weights quantize to themselves") {
  const auto pda = DiscretePda::load(data("center_palindrome.pda"));
  const auto w = constructed(pda, WeightOrder::full_order);
  const auto q = quantize_action_weights(w);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(q[i] == w.w_action()[i]);
}

TEST_CASE("state quantizers") {
  const std::vector<double> s{0.13, 0.6, 0.9};
  CHECK(StateQuantizer::five_level().quantize(s) == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(StateQuantizer::five_level().label(s) == "(0.25, 0.5, 1)");
  CHECK(StateQuantizer::binary().quantize(s) == std::vector<double>{0, 1, 1});
  const std::vector<double> states{0.0079, 0.9952, 0.0160, 0.9580};
  CHECK(StateQuantizer::binary().quantize(states) == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("k-means picks clear clusters") {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i) {
    pts.push_back({0.01 * i, 0.0});
    pts.push_back({1.0, 1.0 - 0.01 * i});
  }
  const auto fit = fit_kmeans(pts, 2, 3);
  REQUIRE(fit.centers.size() == 2);
  CHECK(fit.average_distance < 0.06);
  const auto q = StateQuantizer::kmeans(fit);
  CHECK(q.label(std::vector<double>{0.0, 0.0}) != q.label(std::vector<double>{1.0, 1.0}));
  CHECK(fit_kmeans(pts, 2, 3).centers == fit.centers);
  CHECK_THROWS(fit_kmeans(pts, 0));
}

TEST_CASE("round trip through construction and extraction") {
  for (const char* f : {"balanced.pda", "center_palindrome.pda"}) {
    const auto pda = DiscretePda::load(data(f));
    const auto ex = extract_pda(constructed(pda), pda.alphabet, StateQuantizer::binary());
    CHECK(ex.leaks.empty());
    CHECK_MESSAGE(isomorphic(reduce_pda(ex.pda), pda), f);
  }
}

TEST_CASE("random machines survive construction and extraction") {
  int n = 0;
  for (std::uint64_t seed = 0; n < 50; ++seed) {
    const auto pda = random_pda(2 + seed % 3, 2 + (seed / 3) % 2, seed);
    const auto ex = extract_pda(constructed(pda), pda.alphabet, StateQuantizer::binary());
    const auto reduced = reduce_pda(trim_pda(restrict_to_reachable(ex.pda)));
    const auto rep = compare_pdas(reduced, pda, 8);
    CHECK_MESSAGE(rep.ok(), "seed ", seed);
    ++n;
  }
}

TEST_CASE("reduction merges equivalent states") {
  auto pda = DiscretePda::parse(R"(alphabet: a b
end: e
states: 1 2 3 4
start: 1
accept: 4
1 , a , phi -> 2 , push
1 , b , phi -> 3 , push
2 , b , a -> 4 , pop
2 , b , b -> 4 , pop
3 , b , a -> 4 , pop
3 , b , b -> 4 , pop
4 , e , phi -> 4 , noop
)");
  const auto red = reduce_pda(pda);
  CHECK(red.state_count() == 3);
  CHECK(compare_pdas(red, pda, 6).ok());
  CHECK(canonical_form(red).to_text() == canonical_form(reduce_pda(red)).to_text());
}

TEST_CASE("non-closure names the frontier") {
  const auto pda = DiscretePda::load(data("center_palindrome.pda"));
  ExtractOptions opts;
  opts.max_pairs = 2;
  try {
    extract_pda(constructed(pda), pda.alphabet, StateQuantizer::binary(), opts);
    FAIL("expected NonClosureError");
  } catch (const NonClosureError& e) {
    CHECK_FALSE(e.frontier.empty());
  }
}

TEST_CASE("dot export") {
  const auto pda = DiscretePda::load(data("balanced.pda"));
  const auto dot = export_dot(pda);
  CHECK(dot == export_dot(DiscretePda::parse(pda.to_text())));
  CHECK(dot.rfind("digraph pda {", 0) == 0);
  CHECK(dot.find("(1, φ, 1)") != std::string::npos);
  CHECK(dot.find("(1, 1, 1)") != std::string::npos);
  CHECK(dot.find("(0, 1, -1)") != std::string::npos);
  CHECK(dot.find("doublecircle") != std::string::npos);
  const std::regex node("\\n  s[0-9]+ \\[label");
  CHECK(std::distance(std::sregex_iterator(dot.begin(), dot.end(), node), std::sregex_iterator()) == 4);
}
