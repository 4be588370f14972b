#include <cmath>
#include "doctest.h"
#include "nnpda/kernels.hpp"

using namespace nnpda;

TEST_CASE("serial and parallel classification agree") {
  NetworkShape sh{3, 3, 3, 1};
  const auto w = random_weights(WeightOrder::second, sh, ActionActivation::bipolar, 11, 2.0);
  const StringEnumerator strings({'1', '0'}, 10, 1);
  ClassifySettings cs;
  cs.keep_errors = 1000000;
  const auto a = classify_range_serial(w, Grammar::paren, strings, cs);
  for (int threads : {1, 2, 4}) {
    set_threads(threads);
    CHECK(classify_range_parallel(w, Grammar::paren, strings, cs) == a);
  }
  set_threads(0);
  CHECK(a.total == 2046);
  CHECK(a.legal + a.illegal == a.total);
  CHECK(a.legal_correct + a.illegal_correct == a.correct);
  CHECK(a.errors.size() == a.total - a.correct);
}

TEST_CASE("error list is capped and ordered") {
  NetworkShape sh{2, 3, 4, 1};
  const auto w = random_weights(WeightOrder::full_order, sh, ActionActivation::linear, 3, 1.0);
  const StringEnumerator strings({'a', 'b', 'c'}, 6, 1);
  ClassifySettings cs;
  cs.rule = ClassifyRule::state_and_stack;
  cs.keep_errors = 5;
  const auto s = classify_range_serial(w, Grammar::palindrome, strings, cs);
  const auto p = classify_range_parallel(w, Grammar::palindrome, strings, cs);
  CHECK(s == p);
  CHECK(s.errors.size() <= 5);
}

TEST_CASE("sensitivity set layout") {
  SensitivitySet s(7, 3, 4);
  CHECK(s.ds.size() == 21);
  CHECK(s.dr.size() == 28);
  CHECK(s.da.size() == 7);
  s.ds_row(2)[1] = 1.5;
  CHECK(s.ds[7] == 1.5);
  s.reset();
  CHECK(s.ds[7] == 0.0);
  s.dl[0] = std::nan("");
  CHECK_FALSE(s.finite());
}
