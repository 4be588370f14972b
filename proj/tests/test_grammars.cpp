#include <stdexcept>

#include "doctest.h"
#include "nnpda/grammars.hpp"

using namespace nnpda;

TEST_CASE("labels") {
  CHECK(label(Grammar::paren, "1100"));
  CHECK(label(Grammar::paren, "1010"));
  CHECK_FALSE(label(Grammar::paren, "0110"));
  CHECK_FALSE(label(Grammar::paren, "110"));
  CHECK(label(Grammar::anbn, "111000"));
  CHECK_FALSE(label(Grammar::anbn, "1010"));
  CHECK_FALSE(label(Grammar::anbn, "1100100"));
  CHECK(label(Grammar::palindrome, "bacab"));
  CHECK(label(Grammar::palindrome, "c"));
  CHECK_FALSE(label(Grammar::palindrome, "bacba"));
  CHECK_FALSE(label(Grammar::palindrome, "acca"));
  CHECK_THROWS(label(Grammar::paren, "1x"));
}

TEST_CASE("viable prefixes") {
  CHECK(viable_prefix(Grammar::paren, "110"));
  CHECK_FALSE(viable_prefix(Grammar::paren, "100"));
  CHECK(viable_prefix(Grammar::anbn, "1110"));
  CHECK_FALSE(viable_prefix(Grammar::anbn, "101"));
  CHECK_FALSE(viable_prefix(Grammar::anbn, "0"));
  CHECK(viable_prefix(Grammar::palindrome, "abcb"));
  CHECK_FALSE(viable_prefix(Grammar::palindrome, "acab"));
  CHECK_FALSE(viable_prefix(Grammar::palindrome, "acc"));
}

TEST_CASE("experiment datasets") {
  const auto paren = standard_dataset(Grammar::paren, 1);
  CHECK(paren.entries.size() == 50);
  CHECK(paren.stage_count() == 1);
  const auto fixture = anbn_fixture();
  CHECK(fixture.entries.size() == 27);
  CHECK(fixture.legal_count() == 12);
  CHECK(standard_dataset(Grammar::anbn, 7).entries == fixture.entries);
  const auto pal = standard_dataset(Grammar::palindrome, 1);
  CHECK(pal.stage_count() == 2);
  for (const auto& e : paren.entries) CHECK(e.legal == label(Grammar::paren, e.text));
  for (const auto& e : pal.entries) CHECK(e.legal == label(Grammar::palindrome, e.text));
}

TEST_CASE("random part is balanced and seeded") {
  const auto a = standard_dataset(Grammar::paren, 3), b = standard_dataset(Grammar::paren, 3);
  CHECK(a.entries == b.entries);
  std::size_t legal = 0;
  for (std::size_t i = 30; i < a.entries.size(); ++i) {
    legal += a.entries[i].legal;
    CHECK(a.entries[i].text.size() >= 5);
    CHECK(a.entries[i].text.size() <= 8);
  }
  CHECK(legal == 10);
}

TEST_CASE("dataset text round trip") {
  const auto pal = standard_dataset(Grammar::palindrome, 2);
  const auto again = LabeledDataset::parse(Grammar::palindrome, pal.to_text());
  CHECK(again.entries == pal.entries);
  const auto d = LabeledDataset::parse(Grammar::paren, "y10\n n 1100 ,\n#stage 1\ny1010\n");
  REQUIRE(d.entries.size() == 3);
  CHECK(d.entries[1].text == "1100");
  CHECK(d.entries[2].stage == 1);
  CHECK_THROWS(LabeledDataset::parse(Grammar::paren, "x10\n"));
  CHECK_THROWS(LabeledDataset::parse(Grammar::paren, "y1a0\n"));
}

TEST_CASE("enumeration") {
  CHECK(count_strings(2, 10, 1) == 2046);
  CHECK(count_strings(3, 10, 1) == 88572);
  CHECK(count_strings(3, 9, 1) == 29523);
  CHECK(count_strings(2, 16, 1) == 131070);
  StringEnumerator e({'1', '0'}, 3);
  CHECK(e.count() == 15);
  const auto all = e.all();
  CHECK(all.front().empty());
  CHECK(all[1] == "1");
  CHECK(all[3] == "11");
  CHECK(all.back() == "000");
  for (std::uint64_t i = 0; i < e.count(); ++i) CHECK(e.at(i) == all[i]);
}
