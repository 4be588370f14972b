#include <stdexcept>

#include "doctest.h"
#include "nnpda/grammars.hpp"
#include "nnpda/pda.hpp"

using namespace nnpda;

namespace {
std::string data(const char* name) { return std::string(NNPDA_DATA_DIR) + "/" + name; }
}  // namespace

TEST_CASE("bracket machine recognises balanced brackets") {
  const auto pda = DiscretePda::load(data("balanced.pda"));
  CHECK(pda.state_count() == 4);
  CHECK(run_pda(pda, "10").verdict == PdaVerdict::legal);
  CHECK(run_pda(pda, "1100").verdict == PdaVerdict::legal);
  CHECK(run_pda(pda, "110").verdict == PdaVerdict::illegal);
  CHECK(run_pda(pda, "0").verdict == PdaVerdict::pop_empty);
  CHECK(run_pda(pda, "").verdict == PdaVerdict::illegal);
  for (const auto& s : StringEnumerator({'1', '0'}, 10, 1).all())
    CHECK_MESSAGE(accepted(run_pda(pda, s).verdict) == label(Grammar::paren, s), s);
}

TEST_CASE("centre-marked machine recognises w c w-reversed") {
  const auto pda = DiscretePda::load(data("center_palindrome.pda"));
  CHECK(run_pda(pda, "bacab").verdict == PdaVerdict::legal);
  CHECK(run_pda(pda, "c").verdict == PdaVerdict::legal);
  CHECK(run_pda(pda, "acab").verdict == PdaVerdict::trap);
  CHECK(run_pda(pda, "ab").verdict == PdaVerdict::illegal);
  for (const auto& s : StringEnumerator({'a', 'b', 'c'}, 7, 1).all())
    CHECK_MESSAGE(accepted(run_pda(pda, s).verdict) == label(Grammar::palindrome, s), s);
}

TEST_CASE("pda text round trip") {
  for (const char* f : {"balanced.pda", "center_palindrome.pda"}) {
    const auto pda = DiscretePda::load(data(f));
    const auto again = DiscretePda::parse(pda.to_text());
    CHECK(again.to_text() == pda.to_text());
    CHECK(again.transitions == pda.transitions);
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pda = random_pda(3, 2, seed);
    CHECK(DiscretePda::parse(pda.to_text()).to_text() == pda.to_text());
  }
}

TEST_CASE("pda parse errors") {
  CHECK_THROWS_WITH_AS(DiscretePda::parse("alphabet: a b\nstates: 1\nstart: 1\nfoo: 2\n"),
                       "pda line 4: unknown key 'foo'", std::invalid_argument);
  CHECK_THROWS_AS(DiscretePda::parse("states: 1\nstart: 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(DiscretePda::parse("alphabet: a b\nstates: 1\nstart: 1\n1 , a , phi -> 2 , push\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscretePda::parse("alphabet: a b\nstates: 1\nstart: 1\n"
                                     "1 , a , phi -> 1 , push\n1 , a , phi -> 1 , pop\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscretePda::parse("alphabet: a b\nstates: 1\nstart: 1\n1 , a , phi -> 1 , jump\n"),
                  std::invalid_argument);
}

TEST_CASE("missing rule rejects") {
  auto pda = DiscretePda::parse("alphabet: a b\nstates: 1 2\nstart: 1\naccept: 2\n"
                                "1 , a , phi -> 2 , noop\n");
  CHECK(run_pda(pda, "a").verdict == PdaVerdict::legal);
  CHECK(run_pda(pda, "aa").verdict == PdaVerdict::illegal);
  CHECK(run_pda(pda, "b").final_state == kDeadState);
}
