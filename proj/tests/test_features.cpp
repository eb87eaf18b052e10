#include <doctest.h>

#include "spanfill/features.hpp"

using namespace spanfill;

TEST_SUITE("features") {

TEST_CASE("digit token") {
  const auto f = featurize(tokenize(Vocabulary({"7"}), "7"), true);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == TokenFeatures{true, true, true, 1, true});
}

TEST_CASE("continuation piece") {
  const auto tokens = tokenize(Vocabulary({"jo", "se", "ph"}), "joseph");
  const auto f = featurize(tokens, false);
  REQUIRE(f.size() == 3);
  CHECK(f[1] == TokenFeatures{true, false, false, 2, false});
}

TEST_CASE("punctuation") {
  const auto f = featurize(tokenize(Vocabulary({"!"}), "!"), true);
  CHECK(f[0] == TokenFeatures{false, false, true, 1, true});
}

TEST_CASE("feature vector scaling") {
  CHECK(feature_vector({true, true, true, 1, true}).isApprox(Eigen::Matrix<double, 5, 1>(1, 1, 1, 0.05, 1)));
  CHECK(feature_vector({}).isZero());
  CHECK(feature_vector({true, false, true, 40, false})(3) == 1.0);
}

TEST_CASE("invariants on mixed text") {
  const Vocabulary v({"8", "pm", "table", "for", "a", "b"});
  const auto tokens = tokenize(v, "Table for 8pm, ab-c 12 x");
  const auto f = featurize(tokens, true);
  REQUIRE(f.size() == tokens.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i].is_numeric) CHECK(f[i].is_alphanumeric);
    CHECK(f[i].is_word_start == tokens[i].word_start);
    CHECK(f[i].char_length == tokens[i].end - tokens[i].start);
    CHECK(f[i].slot_requested);
  }
}

}  // TEST_SUITE
