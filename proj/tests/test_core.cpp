#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "nnpda/core.hpp"

using namespace nnpda;

TEST_CASE("alphabet keeps the end symbol last") {
  Alphabet a({'1', '0', 'e'}, 'e');
  CHECK(a.size() == 3);
  CHECK(a.end_index() == 2);
  CHECK(a.string_symbols() == std::vector<char>{'1', '0'});
  CHECK_THROWS_AS(Alphabet({'1', 'e', '0'}, 'e'), std::invalid_argument);
  CHECK_THROWS_AS(Alphabet({'a', 'a'}, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(Alphabet({'a'}, std::nullopt), std::invalid_argument);
}

TEST_CASE("alphabet file parses with comments and end marker") {
  const auto a = Alphabet::parse("# brackets\n1\n0\nend: e\n");
  CHECK(a == Alphabet({'1', '0', 'e'}, 'e'));
  CHECK(Alphabet::parse(a.to_text()) == a);
  CHECK_THROWS_AS(Alphabet::parse("ab\nc\n"), std::invalid_argument);
}

TEST_CASE("encode rejects foreign symbols") {
  Alphabet a({'a', 'b', 'c'}, std::nullopt);
  CHECK(a.encode("cab") == std::vector<SymbolIndex>{2, 0, 1});
  CHECK(a.decode(a.encode("abba")) == "abba");
  CHECK_THROWS_WITH_AS(a.encode("ax"), "unknown symbol 'x'", std::invalid_argument);
}

TEST_CASE("one-hot input") {
  Alphabet a({'1', '0', 'e'}, 'e');
  CHECK(encode_input('0', a) == std::vector<double>{0, 1, 0});
  CHECK(one_hot(2, 3) == std::vector<double>{0, 0, 1});
}

TEST_CASE("network shape validation") {
  NetworkShape ok{3, 3, 4, 1};
  CHECK(ok.has_empty_neuron());
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS(NetworkShape{0, 3, 3, 1}.validate());
  CHECK_THROWS(NetworkShape{3, 3, 5, 1}.validate());
  CHECK_THROWS(NetworkShape{3, 3, 3, 2}.validate());
}

TEST_CASE("five level grid") {
  const std::vector<double> grid{0, 0.25, 0.5, 0.75, 1};
  const std::vector<double> v{0.13, 0.6, 0.9};
  CHECK(decode_state_label(v, grid) == std::vector<double>{0.25, 0.5, 1.0});
  // Exact midpoints go up.
  CHECK(nearest_level(0.125, grid) == 0.25);
  CHECK(nearest_level(0.625, grid) == 0.75);
  CHECK(nearest_level(-3.0, grid) == 0.0);
  const std::vector<double> bad{0.1, std::nan("")};
  CHECK_THROWS(decode_state_label(bad, grid));
  CHECK_THROWS(decode_state_label(v, std::vector<double>{}));
}

TEST_CASE("trained acabc states under the five level grid") {
  const std::vector<double> grid{0, 0.25, 0.5, 0.75, 1};
  const std::vector<double> s{0.0079, 0.9952, 0.0160, 0.9580};
  CHECK(decode_state_label(s, grid) == std::vector<double>{0, 1, 0, 1});
}
