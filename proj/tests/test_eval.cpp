#include <filesystem>
#include <algorithm>
#include <fstream>
#include <random>

#include <doctest.h>

#include "spanfill/error.hpp"
#include "spanfill/eval.hpp"

using namespace spanfill;
using Spans = std::vector<std::optional<CharSpan>>;

TEST_SUITE("eval") {

TEST_CASE("exact match scoring") {
  const Spans gold{CharSpan{0, 1}, CharSpan{2, 5}, std::nullopt, CharSpan{3, 4}};
  const Spans pred{CharSpan{0, 1}, CharSpan{2, 4}, CharSpan{1, 2}, std::nullopt};
  const SlotScore s = score_slot(pred, gold);
  CHECK(s.true_positives == 1);
  CHECK(s.false_positives == 2);
  CHECK(s.false_negatives == 2);
  CHECK(s.precision == doctest::Approx(1.0 / 3));
  CHECK(s.recall == doctest::Approx(1.0 / 3));
  CHECK(s.f1 == doctest::Approx(1.0 / 3));
  CHECK_FALSE(s.vacuous);
}

TEST_CASE("perfect, empty and vacuous cases") {
  const Spans gold{CharSpan{0, 1}, std::nullopt};
  CHECK(score_slot(gold, gold).f1 == 1.0);
  const Spans none{std::nullopt, std::nullopt};
  const SlotScore v = score_slot(none, none);
  CHECK(v.vacuous);
  CHECK(v.f1 == 1.0);
  const SlotScore miss = score_slot(none, gold);
  CHECK(miss.f1 == 0.0);
  CHECK(miss.precision == 0.0);
  CHECK_FALSE(miss.vacuous);
  CHECK_THROWS_AS(score_slot(Spans{std::nullopt}, gold), ShapeError);
}

TEST_CASE("average f1") {
  CHECK(average_f1({{"a", 1.0}, {"b", 0.5}}) == 0.75);
  CHECK_THROWS_AS(average_f1({}), ValidationError);
}

TEST_CASE("error categories") {
  CHECK(classify(std::nullopt, std::nullopt) == std::nullopt);
  CHECK(classify(CharSpan{1, 3}, CharSpan{1, 3}) == std::nullopt);
  CHECK(classify(std::nullopt, CharSpan{1, 3}) == ErrorCategory::MissedSpan);
  CHECK(classify(CharSpan{1, 3}, std::nullopt) == ErrorCategory::SpuriousSpan);
  CHECK(classify(CharSpan{0, 1}, CharSpan{1, 3}) == ErrorCategory::NonOverlapping);
  CHECK(classify(CharSpan{0, 2}, CharSpan{1, 3}) == ErrorCategory::Overlapping);
  CHECK(classify(CharSpan{1, 4}, CharSpan{1, 3}) == ErrorCategory::Overlapping);
  CHECK(to_string(ErrorCategory::NonOverlapping) == "non-overlapping");
}

TEST_CASE("categories partition the cases and account for F1") {
  std::mt19937_64 rng(5);
  auto random_span = [&rng]() -> std::optional<CharSpan> {
    if (rng() % 3 == 0) return std::nullopt;
    const std::size_t a = rng() % 10, b = a + 1 + rng() % 4;
    return CharSpan{a, b};
  };
  Spans pred, gold;
  for (int i = 0; i < 2000; ++i) {
    pred.push_back(random_span());
    gold.push_back(random_span());
  }
  const ErrorBreakdown b = categorize_errors(pred, gold);
  const SlotScore s = score_slot(pred, gold);
  CHECK(b.total() == pred.size());
  CHECK(b.exact_matches == s.true_positives);
  CHECK(b.count(ErrorCategory::MissedSpan) + b.count(ErrorCategory::NonOverlapping) +
            b.count(ErrorCategory::Overlapping) ==
        s.false_negatives);
  CHECK(b.count(ErrorCategory::SpuriousSpan) + b.count(ErrorCategory::NonOverlapping) +
            b.count(ErrorCategory::Overlapping) ==
        s.false_positives);
}

TEST_CASE("highlighting") {
  CHECK(highlight("at 8pm", CharSpan{3, 4}, CharSpan{3, 6}) == "at [[{{8]]pm}}");
  CHECK(highlight("at 8pm", std::nullopt, CharSpan{3, 6}) == "at {{8pm}}");
  CHECK(highlight("Zoë x", CharSpan{0, 3}, std::nullopt) == "[[Zoë]] x");
  CHECK(highlight("ab", CharSpan{0, 1}, CharSpan{1, 2}) == "[[a]]{{b}}");
}

TEST_CASE("error records, report and exclusive errors") {
  const std::vector<Utterance> us{{"a", "for 2", {}, {{"people", 4, 5}}}, {"b", "hi", {}, {}}, {"c", "for 3", {}, {{"people", 4, 5}}}};
  const std::vector<SpanPrediction> p1{{"a", "people", std::nullopt, 0.9}, {"b", "people", CharSpan{0, 2}, 0.25}, {"c", "people", CharSpan{4, 5}, 0.8}};
  const std::vector<SpanPrediction> p2{{"a", "people", CharSpan{4, 5}, 0.9}, {"b", "people", CharSpan{0, 1}, 0.5}, {"c", "people", CharSpan{0, 5}, 0.5}};
  const auto e1 = collect_errors(p1, us);
  const auto e2 = collect_errors(p2, us);
  REQUIRE(e1.size() == 2);
  CHECK(e1[0].category == ErrorCategory::MissedSpan);
  CHECK(e1[1].category == ErrorCategory::SpuriousSpan);
  CHECK(error_report(e1) == "0.9000\tmissed\ta\tfor {{2}}\n0.2500\tspurious\tb\t[[hi]]\n");
  const auto only1 = exclusive_errors(e1, e2);
  REQUIRE(only1.size() == 1);
  CHECK(only1[0].id == "a");
  CHECK(error_report(std::vector<ErrorRecord>{}).empty());
  ReportOptions sample{1, 3};
  CHECK(error_report(e1, sample) == error_report(e1, sample));
  const std::string sampled = error_report(e1, sample);
  CHECK(std::count(sampled.begin(), sampled.end(), '\n') == 1);

  std::vector<SpanPrediction> shuffled = p1;
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS_AS(collect_errors(shuffled, us), ValidationError);
}

TEST_CASE("prediction file round trip") {
  const auto file = std::filesystem::temp_directory_path() / "spanfill_predictions.jsonl";
  const std::vector<SpanPrediction> p{{"a", "people", std::nullopt, 0.123456789012345}, {"b", "time", CharSpan{3, 6}, 1.0}};
  write_predictions(file, p);
  CHECK(read_predictions(file) == p);
  std::ofstream(file) << R"({"id":"a","slot":"x","start":1,"end":null,"confidence":1})" << "\n";
  CHECK_THROWS_AS(read_predictions(file), ParseError);
  std::filesystem::remove(file);
}

}  // TEST_SUITE
