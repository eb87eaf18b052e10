#include <random>

#include <doctest.h>

#include "spanfill/error.hpp"
#include "spanfill/tagging.hpp"
#include "support/oracles.hpp"

using namespace spanfill;

namespace {

TokenSequence joseph_tokens() {
  return tokenize(Vocabulary({"my", "name", "is", "jo", "se", "ph", "sch", "moe"}), "My name is Joseph Schmoe");
}

// BEF* (BEG IN* AFT*)? written as a second, structurally different acceptor.
bool grammar_by_pattern(const std::vector<int>& y) {
  std::size_t i = 0;
  while (i < y.size() && y[i] == 0) ++i;
  if (i == y.size()) return true;
  if (y[i++] != 1) return false;
  while (i < y.size() && y[i] == 2) ++i;
  while (i < y.size() && y[i] == 3) ++i;
  return i == y.size();
}

bool accepted_by_mask(const std::vector<int>& y) {
  const auto& m = valid_transitions();
  if (y.empty()) return true;
  if (!m.start[y.front()] || !m.end[y.back()]) return false;
  for (std::size_t t = 0; t + 1 < y.size(); ++t) {
    if (!m.allowed[y[t]][y[t + 1]]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("tagging") {

TEST_CASE("joseph schmoe tags and inverse") {
  const TokenSequence tokens = joseph_tokens();
  const CharSpan joseph{11, 17};
  const TagSequence tags = span_to_tags(tokens, joseph);
  CHECK(tags == TagSequence{Tag::Bef, Tag::Bef, Tag::Bef, Tag::Beg, Tag::In, Tag::In, Tag::Aft, Tag::Aft});
  CHECK(tags_to_span(tokens, tags) == joseph);
}

TEST_CASE("absent span is all BEF") {
  const TokenSequence tokens = joseph_tokens();
  CHECK(span_to_tags(tokens, std::nullopt) == TagSequence(8, Tag::Bef));
  CHECK_FALSE(tags_to_span(tokens, TagSequence(8, Tag::Bef)).has_value());
}

TEST_CASE("single and full cover") {
  const TokenSequence tokens = tokenize(Vocabulary({"8", "7", "pm"}), "8pm");
  CHECK(span_to_tags(tokens, CharSpan{0, 3}) == TagSequence{Tag::Beg, Tag::In});
  const TokenSequence seven = tokenize(Vocabulary({"7", "pm"}), "7pm");
  CHECK(tags_to_span(seven, {Tag::Beg, Tag::Aft}) == CharSpan{0, 1});
}

TEST_CASE("span inside a piece widens to the token cover") {
  const TokenSequence tokens = joseph_tokens();
  const CharSpan partial{12, 16};  // "osep"
  CHECK_FALSE(aligned_to_tokens(tokens, partial));
  CHECK(tags_to_span(tokens, span_to_tags(tokens, partial)) == CharSpan{11, 17});
}

TEST_CASE("span covering no token is an error") {
  const TokenSequence tokens = tokenize(Vocabulary({"a", "b"}), "a  b");
  CHECK_THROWS_AS(span_to_tags(tokens, CharSpan{1, 3}, "u7"), ValidationError);
}

TEST_CASE("ungrammatical tags are rejected") {
  const TokenSequence tokens = joseph_tokens();
  CHECK_THROWS_AS(tags_to_span(tokens, TagSequence(8, Tag::In)), ValidationError);
  CHECK_THROWS_AS(tags_to_span(tokens, TagSequence(3, Tag::Bef)), ShapeError);
}

TEST_CASE("transition mask") {
  const auto& m = valid_transitions();
  CHECK_FALSE(m.allowed[index(Tag::Beg)][index(Tag::Bef)]);
  CHECK(m.allowed[index(Tag::In)][index(Tag::Aft)]);
  int allowed = 0;
  for (const auto& row : m.allowed) {
    for (bool b : row) allowed += b ? 1 : 0;
  }
  CHECK(allowed == 7);
}

TEST_CASE("mask and grammar accept the same sequences up to length 6") {
  for (int T = 1; T <= 6; ++T) {
    for (const auto& y : oracle::all_sequences(T)) {
      TagSequence tags;
      for (int k : y) tags.push_back(tag_from_index(k));
      CHECK(accepted_by_mask(y) == grammar_by_pattern(y));
      CHECK(satisfies_grammar(tags) == grammar_by_pattern(y));
    }
  }
}

TEST_CASE("random spans always produce grammatical tags and round trip on token boundaries") {
  std::mt19937_64 rng(9);
  const Vocabulary v({"a", "b", "c", "ab", "bc"});
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    std::uniform_int_distribution<int> ch(0, 4);
    const int n = 1 + trial % 15;
    for (int i = 0; i < n; ++i) text += "abc  "[ch(rng)];
    if (text.find_first_not_of(' ') == std::string::npos) text[0] = 'a';
    const TokenSequence tokens = tokenize(v, text);
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    std::size_t i = pick(rng), j = pick(rng);
    if (i > j) std::swap(i, j);
    const CharSpan span{tokens[i].start, tokens[j].end};
    const TagSequence tags = span_to_tags(tokens, span);
    CHECK(satisfies_grammar(tags));
    CHECK(tags_to_span(tokens, tags) == span);
  }
}

}  // TEST_SUITE
