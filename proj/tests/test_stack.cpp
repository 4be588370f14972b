#include <cmath>
#include <random>

#include "doctest.h"
#include "nnpda/stack.hpp"

using namespace nnpda;

namespace {

const Alphabet kAbc({'a', 'b', 'c'}, std::nullopt);

std::vector<double> lengths(const ContinuousStack& s) {
  std::vector<double> out;
  for (const auto& seg : s.segments()) out.push_back(seg.length);
  return out;
}

void check_lengths(const ContinuousStack& s, std::vector<double> expected, double tol) {
  const auto got = lengths(s);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expected[i]) <= tol);
}

std::vector<TraceAction> actions(const std::string& inputs, std::vector<double> a) {
  std::vector<TraceAction> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back({a[i], kAbc.index_of(inputs[i])});
  return out;
}

}  // namespace

TEST_CASE("push appends a segment and grows the length") {
  ContinuousStack s;
  auto o = s.apply_in_place(0.7, 0, 0.1);
  CHECK(o.kind == ActionKind::push);
  CHECK(s.total_length() == 0.7);
  s.apply_in_place(0.2, 0, 0.1);
  // Same-symbol pushes stay separate segments.
  CHECK(s.segments().size() == 2);
}

TEST_CASE("pop removes mass from the top, splitting a segment") {
  auto s = ContinuousStack::from_segments({{0, 0.6}, {1, 0.8}});
  auto o = s.apply_in_place(-1.0, 2, 0.1);
  CHECK(o.kind == ActionKind::pop);
  check_lengths(s, {0.4}, 1e-12);
  REQUIRE(o.removed.size() == 2);
  CHECK(o.removed[0] == StackSegment{1, 0.8});
}

TEST_CASE("small actions are no-ops") {
  auto s = ContinuousStack::from_segments({{0, 0.5}});
  CHECK(s.apply_in_place(0.05, 1, 0.1).kind == ActionKind::noop);
  CHECK(s.apply_in_place(-0.1, 1, 0.1).kind == ActionKind::noop);
  CHECK(s.total_length() == 0.5);
}

TEST_CASE("pop-empty clamps and reports the deficit") {
  auto s = ContinuousStack::from_segments({{0, 0.3}});
  auto o = s.apply_in_place(-0.5, 1, 0.1);
  CHECK(o.kind == ActionKind::pop_empty);
  CHECK(o.deficit == doctest::Approx(0.2));
  CHECK(s.empty());
  CHECK(s.total_length() == 0.0);
}

TEST_CASE("bad actions and thresholds throw") {
  ContinuousStack s;
  CHECK_THROWS(s.apply_in_place(1.5, 0, 0.1));
  CHECK_THROWS(s.apply_in_place(0.5, 0, 0.5));
  CHECK_THROWS(s.apply_in_place(0.5, 0, -0.1));
}

TEST_CASE("reading covers depth one from the top") {
  auto s = ContinuousStack::from_segments({{0, 0.5}, {1, 0.7}});
  auto r = s.read(3);
  CHECK(r.vector[0] == doctest::Approx(0.3));
  CHECK(r.vector[1] == doctest::Approx(0.7));
  CHECK(r.section_count == 2);
  CHECK(*r.r1 == 1);
  CHECK(*r.r2 == 0);
  CHECK(r.mass == doctest::Approx(1.0));
  // Partly empty window: the extra neuron holds the unfilled depth.
  auto t = ContinuousStack::from_segments({{2, 0.4}}).read(3);
  CHECK(t.neural(true) == std::vector<double>{0, 0, 0.4, 0.6});
  CHECK(ContinuousStack().read(3).neural(true) == std::vector<double>{0, 0, 0, 1});
  CHECK(ContinuousStack().read(3).neural(false) == std::vector<double>{0, 0, 0});
}

TEST_CASE("two-section reading derivative is delta(r1) - delta(r2)") {
  const double h = 1e-5;
  auto read_after = [&](double push) {
    auto s = ContinuousStack::from_segments({{0, 0.5}});
    s.apply_in_place(push, 1, 0.0);
    return s.read(3).vector;
  };
  const auto plus = read_after(0.7 + h), minus = read_after(0.7 - h);
  CHECK(std::abs((plus[1] - minus[1]) / (2 * h) - 1.0) <= 1e-4);
  CHECK(std::abs((plus[0] - minus[0]) / (2 * h) + 1.0) <= 1e-4);
  CHECK(std::abs((plus[2] - minus[2]) / (2 * h)) <= 1e-4);

  auto read_after_pop = [&](double pop) {
    auto s = ContinuousStack::from_segments({{0, 0.6}, {1, 0.8}});
    s.apply_in_place(pop, 2, 0.0);
    return s.read(3).vector;
  };
  const auto p2 = read_after_pop(-0.3 + h), m2 = read_after_pop(-0.3 - h);
  CHECK(std::abs((p2[1] - m2[1]) / (2 * h) - 1.0) <= 1e-4);
  CHECK(std::abs((p2[0] - m2[0]) / (2 * h) + 1.0) <= 1e-4);
}

TEST_CASE("length recursion is exact and the window mass is min(1, L)") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> len(0.05, 1.0), act(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> sym(0, 2), depth(0, 6);
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<StackSegment> segs(depth(rng));
    for (auto& s : segs) s = {sym(rng), len(rng)};
    auto stack = ContinuousStack::from_segments(segs);
    const double before = stack.total_length();
    const double a = act(rng);
    const auto o = stack.apply_in_place(a, sym(rng), 0.0);
    if (o.kind == ActionKind::pop_empty) continue;
    CHECK(stack.total_length() == before + a);
    CHECK(std::abs(stack.read(3).mass - std::min(1.0, stack.total_length())) <= 1e-9);
  }
}

TEST_CASE("push then equal pop restores the segments") {
  auto s = ContinuousStack::from_segments({{0, 0.25}, {1, 0.5}});
  const auto before = s;
  s.apply_in_place(0.625, 2, 0.1);
  s.apply_in_place(-0.625, 0, 0.1);
  CHECK(s.segments() == before.segments());
}

TEST_CASE("replay acabc") {
  const auto steps = replay_trace({}, actions("acabc", {1.0, 0.1323, -0.9869, 0.7667, 0.9684}), 3, 0.0);
  REQUIRE(steps.size() == 6);
  check_lengths(steps[1].stack, {1.0}, 1e-4);
  check_lengths(steps[2].stack, {1.0, 0.1323}, 1e-4);
  check_lengths(steps[3].stack, {0.1454}, 1e-4);
  check_lengths(steps[4].stack, {0.1454, 0.7667}, 1e-4);
  check_lengths(steps[5].stack, {0.1454, 0.7667, 0.9684}, 1e-4);
  CHECK(std::abs(steps[5].stack.total_length() - 1.8805) <= 1e-4);
}

TEST_CASE("replay bacab") {
  const auto steps = replay_trace({}, actions("bacab", {1.0, 0.9540, 0.0625, -0.9989, -0.9858}), 3, 0.0);
  check_lengths(steps[3].stack, {1.0, 0.9540, 0.0625}, 1e-4);
  check_lengths(steps[4].stack, {1.0, 0.0176}, 1e-4);
  check_lengths(steps[5].stack, {0.0318}, 1e-4);
  CHECK(steps[5].stack.segments()[0].symbol == kAbc.index_of('b'));
}

TEST_CASE("replay bacba") {
  const auto steps = replay_trace({}, actions("bacba", {1.0, 0.9540, 0.0625, 0.6850, 0.9524}), 3, 0.0);
  check_lengths(steps[5].stack, {1.0, 0.9540, 0.0625, 0.6850, 0.9524}, 1e-4);
  CHECK(std::abs(steps[5].stack.total_length() - 3.6539) <= 1e-4);
}

TEST_CASE("replay ababcbaba") {
  const auto steps = replay_trace(
      {}, actions("ababcbaba", {1.0, 0.9716, 0.9936, 0.9932, 0.0810, -0.9981, -0.8207, -0.8674, -0.2757}),
      3, 0.0);
  // Printed values carry four decimals; one column drifts by exactly 1e-4.
  const double tol = 1e-4 + 1e-9;
  check_lengths(steps[6].stack, {1.0, 0.9716, 0.9936, 0.0761}, tol);
  check_lengths(steps[7].stack, {1.0, 0.9716, 0.2491}, tol);
  check_lengths(steps[8].stack, {1.0, 0.3533}, tol);
  check_lengths(steps[9].stack, {1.0, 0.0776}, tol);
  CHECK(std::abs(steps[9].stack.total_length() - 1.0776) <= tol);
}

TEST_CASE("trace tsv") {
  const auto acts = actions("ab", {0.5, -0.25});
  const auto steps = replay_trace({}, acts, 3, 0.1);
  const auto tsv = format_trace_tsv(steps, acts, kAbc);
  CHECK(tsv.rfind("step\tinput\taction\tsegments\n", 0) == 0);
  CHECK(tsv.find("a:0.250000") != std::string::npos);
}
