#include <filesystem>
#include <random>

#include <doctest.h>

#include "spanfill/error.hpp"
#include "spanfill/tokenizer.hpp"
#include "spanfill/utf8.hpp"

using namespace spanfill;

namespace {

Vocabulary joseph_vocab() { return Vocabulary({"my", "name", "is", "jo", "se", "ph", "sch", "moe"}); }

// original_text[start, end) case-folds to the token's surface.
bool offsets_faithful(const std::string& text, const TokenSequence& tokens) {
  const std::u32string chars = utf8::decode(text);
  for (const auto& t : tokens) {
    std::u32string slice = chars.substr(t.start, t.end - t.start);
    for (char32_t& c : slice) c = chars::fold(c);
    if (utf8::encode(slice) != t.surface()) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("joseph schmoe splits into eight pieces") {
  const std::string text = "My name is Joseph Schmoe";
  const TokenSequence tokens = tokenize(joseph_vocab(), text);
  REQUIRE(tokens.size() == 8);
  const std::vector<std::string> pieces = {"my", "name", "is", "jo", "##se", "##ph", "sch", "##moe"};
  const std::vector<bool> starts = {true, true, true, true, false, false, true, false};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(tokens[i].piece == pieces[i]);
    CHECK(tokens[i].word_start == starts[i]);
  }
  CHECK(tokens[3].start == 11);
  CHECK(tokens[5].end == 17);
  CHECK(offsets_faithful(text, tokens));
}

TEST_CASE("single character utterance") {
  const TokenSequence tokens = tokenize(Vocabulary({"7"}), "7");
  REQUIRE(tokens.size() == 1);
  CHECK(tokens[0].start == 0);
  CHECK(tokens[0].end == 1);
  CHECK(tokens[0].word_start);
  CHECK(tokens[0].id != Vocabulary::kUnk);
}

TEST_CASE("greedy longest match inside a word") {
  const TokenSequence tokens = tokenize(Vocabulary({"8", "p", "m", "pm"}), "8pm");
  REQUIRE(tokens.size() == 2);
  CHECK(tokens[0].piece == "8");
  CHECK(tokens[0].start == 0);
  CHECK(tokens[0].end == 1);
  CHECK(tokens[0].word_start);
  CHECK(tokens[1].piece == "##pm");
  CHECK(tokens[1].start == 1);
  CHECK(tokens[1].end == 3);
  CHECK_FALSE(tokens[1].word_start);
}

TEST_CASE("empty text and unknown characters") {
  CHECK(tokenize(joseph_vocab(), "").empty());
  CHECK(tokenize(joseph_vocab(), "   ").empty());
  const TokenSequence tokens = tokenize(joseph_vocab(), "my zq!");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[1].id == Vocabulary::kUnk);
  CHECK(tokens[1].end - tokens[1].start == 1);
  CHECK(tokens[3].piece == "!");
  CHECK(tokens[3].word_start);
}

TEST_CASE("offsets count characters, not bytes") {
  const std::string text = "Café at 7";
  const TokenSequence tokens = tokenize(Vocabulary({"café", "at", "7"}), text);
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[0].end == 4);
  CHECK(tokens[1].start == 5);
  CHECK(tokens[2].start == 8);
  CHECK(offsets_faithful(text, tokens));
}

TEST_CASE("induction merges the most frequent pair") {
  const std::vector<std::string> corpus = {"aaab", "aaab"};
  const Vocabulary v = induce_vocabulary(corpus, 5);
  const auto& p = v.pieces();
  CHECK(p.size() == 6);  // UNK + 5
  CHECK(std::find(p.begin(), p.end(), "a") != p.end());
  CHECK(std::find(p.begin(), p.end(), "b") != p.end());
  CHECK(p[3] == "aa");  // first merge after the two characters
}

TEST_CASE("induction edge cases") {
  const std::vector<std::string> one = {"x"};
  const Vocabulary v = induce_vocabulary(one, 1);
  CHECK(v.pieces() == std::vector<std::string>{"[UNK]", "x"});
  CHECK_THROWS_AS(induce_vocabulary(std::vector<std::string>{"abc"}, 2), ValidationError);
  CHECK_THROWS_AS(induce_vocabulary(std::vector<std::string>{}, 10), ValidationError);
}

TEST_CASE("induction never merges digits") {
  const std::vector<std::string> corpus = {"8pm", "8pm", "8pm", "9pm", "1200", "1200", "2020"};
  const Vocabulary v = induce_vocabulary(corpus, 50);
  for (const auto& piece : v.pieces()) {
    if (piece == Vocabulary::kUnkPiece) continue;
    if (piece.find_first_of("0123456789") != std::string::npos) CHECK(piece.size() == 1);
  }
  CHECK(tokenize(v, "1200").size() == 4);
}

TEST_CASE("induced vocabulary splits a rare name into several pieces") {
  const std::vector<std::string> corpus = {"my name is john", "jo here", "call me josh", "sebastian",
                                           "phil speaking", "ralph", "it is jo", "se", "table for jones",
                                           "joe", "rose", "sep"};
  const Vocabulary v = induce_vocabulary(corpus, 40);
  const std::string text = "My name is Joseph Schmoe";
  const TokenSequence tokens = tokenize(v, text);
  std::size_t joseph = 0;
  for (const auto& t : tokens) {
    if (t.start >= 11 && t.end <= 17) ++joseph;
  }
  CHECK(joseph >= 2);
  CHECK(offsets_faithful(text, tokens));
}

TEST_CASE("deterministic and faithful on random text") {
  std::mt19937_64 rng(4);
  const std::string alphabet = "abcdeXYZ019 .,!'-";
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string s;
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int k = 0; k < 20; ++k) {
      s += alphabet[pick(rng)];
    }
    corpus.push_back(s);
  }
  const Vocabulary v = induce_vocabulary(corpus, 60);
  CHECK(induce_vocabulary(corpus, 60) == v);
  for (const auto& s : corpus) {
    const auto tokens = tokenize(v, s);
    CHECK(tokens == tokenize(v, s));
    CHECK(offsets_faithful(s, tokens));
    for (std::size_t i = 1; i < tokens.size(); ++i) CHECK(tokens[i - 1].end <= tokens[i].start);
  }
}

TEST_CASE("vocabulary file round trip") {
  const auto file = std::filesystem::temp_directory_path() / "spanfill_vocab_test.txt";
  const Vocabulary v({"my", "name", "é", "##"});
  v.save(file);
  CHECK(Vocabulary::load(file) == v);
  std::filesystem::remove(file);
}

}  // TEST_SUITE
