#include "spanfill/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "spanfill/error.hpp"
#include "spanfill/random.hpp"
#include "spanfill/utf8.hpp"

namespace spanfill {

namespace {

void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError("prediction count " + std::to_string(a) + " != gold count " + std::to_string(b));
  }
}

std::vector<std::optional<CharSpan>> spans_of(std::span<const SpanPrediction> predicted) {
  std::vector<std::optional<CharSpan>> out;
  out.reserve(predicted.size());
  for (const auto& p : predicted) out.push_back(p.span);
  return out;
}

}  // namespace

SlotScore score_slot(std::span<const std::optional<CharSpan>> predicted, std::span<const std::optional<CharSpan>> gold) {
  require_aligned(predicted.size(), gold.size());
  SlotScore s;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && gold[i] && *predicted[i] == *gold[i]) {
      ++s.true_positives;
      continue;
    }
    if (predicted[i]) ++s.false_positives;
    if (gold[i]) ++s.false_negatives;
  }
  const std::size_t predicted_count = s.true_positives + s.false_positives;
  const std::size_t gold_count = s.true_positives + s.false_negatives;
  if (predicted_count == 0 && gold_count == 0) {
    s.vacuous = true;
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = predicted_count == 0 ? 0.0 : static_cast<double>(s.true_positives) / static_cast<double>(predicted_count);
  s.recall = gold_count == 0 ? 0.0 : static_cast<double>(s.true_positives) / static_cast<double>(gold_count);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

SlotScore score_slot(std::span<const SpanPrediction> predicted, std::span<const std::optional<CharSpan>> gold) {
  const auto spans = spans_of(predicted);
  return score_slot(std::span<const std::optional<CharSpan>>(spans), gold);
}

double average_f1(const std::map<std::string, double>& per_slot) {
  if (per_slot.empty()) throw ValidationError("cannot average F1 over zero slots");
  double sum = 0.0;
  for (const auto& [_, f1] : per_slot) sum += f1;
  return sum / static_cast<double>(per_slot.size());
}

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::MissedSpan: return "missed";
    case ErrorCategory::SpuriousSpan: return "spurious";
    case ErrorCategory::NonOverlapping: return "non-overlapping";
    case ErrorCategory::Overlapping: return "overlapping";
  }
  return "?";
}

std::optional<ErrorCategory> classify(const std::optional<CharSpan>& predicted, const std::optional<CharSpan>& gold) {
  if (!predicted && !gold) return std::nullopt;
  if (!predicted) return ErrorCategory::MissedSpan;
  if (!gold) return ErrorCategory::SpuriousSpan;
  if (*predicted == *gold) return std::nullopt;
  return predicted->overlaps(*gold) ? ErrorCategory::Overlapping : ErrorCategory::NonOverlapping;
}

ErrorBreakdown categorize_errors(std::span<const std::optional<CharSpan>> predicted,
                                 std::span<const std::optional<CharSpan>> gold) {
  require_aligned(predicted.size(), gold.size());
  ErrorBreakdown b;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (auto c = classify(predicted[i], gold[i])) {
      ++b.categories[static_cast<std::size_t>(*c) - 1];
    } else if (gold[i]) {
      ++b.exact_matches;
    } else {
      ++b.true_negatives;
    }
  }
  return b;
}

std::vector<ErrorRecord> collect_errors(std::span<const SpanPrediction> predicted, std::span<const Utterance> utterances) {
  require_aligned(predicted.size(), utterances.size());
  std::vector<ErrorRecord> out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& p = predicted[i];
    if (p.id != utterances[i].id) {
      throw ValidationError("prediction " + std::to_string(i) + " is for '" + p.id + "' but gold utterance is '" +
                            utterances[i].id + "'");
    }
    const auto gold = utterances[i].span_for(p.slot);
    if (auto c = classify(p.span, gold)) {
      out.push_back({p.id, p.slot, utterances[i].text, p.span, gold, p.confidence, *c});
    }
  }
  return out;
}

std::vector<ErrorRecord> exclusive_errors(std::span<const ErrorRecord> a, std::span<const ErrorRecord> b) {
  std::set<std::pair<std::string, std::string>> in_b;
  for (const auto& e : b) in_b.emplace(e.id, e.slot);
  std::vector<ErrorRecord> out;
  for (const auto& e : a) {
    if (in_b.count({e.id, e.slot}) == 0) out.push_back(e);
  }
  return out;
}

std::string highlight(const std::string& text, const std::optional<CharSpan>& predicted,
                      const std::optional<CharSpan>& gold) {
  const std::u32string chars = utf8::decode(text);
  std::string out;
  for (std::size_t i = 0; i <= chars.size(); ++i) {
    // Close before opening so adjacent spans render in order.
    if (gold && gold->end == i) out += "}}";
    if (predicted && predicted->end == i) out += "]]";
    if (predicted && predicted->start == i) out += "[[";
    if (gold && gold->start == i) out += "{{";
    if (i < chars.size()) out += utf8::encode(chars[i]);
  }
  return out;
}

std::string error_report(std::span<const ErrorRecord> errors, const ReportOptions& options) {
  std::vector<std::size_t> order(errors.size());
  std::iota(order.begin(), order.end(), 0);
  if (options.sample && *options.sample < order.size()) {
    SplitMix64 rng(options.seed);
    rng.shuffle(order);
    order.resize(*options.sample);
    std::sort(order.begin(), order.end());
  }
  std::string out;
  for (std::size_t i : order) {
    const auto& e = errors[i];
    char prob[32];
    std::snprintf(prob, sizeof prob, "%.4f", e.confidence);
    out += std::string(prob) + "\t" + std::string(to_string(e.category)) + "\t" + e.id + "\t" +
           highlight(e.text, e.predicted, e.gold) + "\n";
  }
  return out;
}

void write_predictions(const std::filesystem::path& file, std::span<const SpanPrediction> predictions) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError(file.string() + ": cannot write");
  for (const auto& p : predictions) {
    nlohmann::json j = {{"id", p.id}, {"slot", p.slot}, {"start", nullptr}, {"end", nullptr}, {"confidence", p.confidence}};
    if (p.span) {
      j["start"] = p.span->start;
      j["end"] = p.span->end;
    }
    out << j.dump() << '\n';
  }
}

std::vector<SpanPrediction> read_predictions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open predictions");
  std::vector<SpanPrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      SpanPrediction p;
      p.id = j.at("id").get<std::string>();
      p.slot = j.at("slot").get<std::string>();
      p.confidence = j.at("confidence").get<double>();
      const auto& start = j.at("start");
      const auto& end = j.at("end");
      if (start.is_null() != end.is_null()) throw ParseError(where + ": start and end must both be null or both set");
      if (!start.is_null()) p.span = CharSpan{start.get<std::size_t>(), end.get<std::size_t>()};
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace spanfill
