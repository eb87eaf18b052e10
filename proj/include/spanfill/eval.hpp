#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spanfill/data_model.hpp"

namespace spanfill {

struct SpanPrediction {
  std::string id;
  std::string slot;
  std::optional<CharSpan> span;
  double confidence = 0.0;  // probability of the decoded tag sequence

  friend bool operator==(const SpanPrediction&, const SpanPrediction&) = default;
};

struct SlotScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  /// No gold and no predicted spans at all: P, R and F1 are reported as 1.
  bool vacuous = false;
};

/// Exact-match span scoring. A predicted span counts only if it equals the gold span
/// character for character; a wrong span is both a false positive and a false negative.
SlotScore score_slot(std::span<const std::optional<CharSpan>> predicted, std::span<const std::optional<CharSpan>> gold);
SlotScore score_slot(std::span<const SpanPrediction> predicted, std::span<const std::optional<CharSpan>> gold);

/// Unweighted mean. Throws ValidationError when empty.
double average_f1(const std::map<std::string, double>& per_slot);

enum class ErrorCategory : int { MissedSpan = 1, SpuriousSpan = 2, NonOverlapping = 3, Overlapping = 4 };

std::string_view to_string(ErrorCategory category);

/// nullopt for exact matches and true negatives.
std::optional<ErrorCategory> classify(const std::optional<CharSpan>& predicted, const std::optional<CharSpan>& gold);

struct ErrorBreakdown {
  std::size_t exact_matches = 0;
  std::size_t true_negatives = 0;
  std::array<std::size_t, 4> categories{};  // indexed by ErrorCategory - 1

  std::size_t count(ErrorCategory c) const { return categories[static_cast<std::size_t>(c) - 1]; }
  std::size_t errors() const { return categories[0] + categories[1] + categories[2] + categories[3]; }
  std::size_t total() const { return exact_matches + true_negatives + errors(); }
};

ErrorBreakdown categorize_errors(std::span<const std::optional<CharSpan>> predicted,
                                 std::span<const std::optional<CharSpan>> gold);

struct ErrorRecord {
  std::string id;
  std::string slot;
  std::string text;
  std::optional<CharSpan> predicted;
  std::optional<CharSpan> gold;
  double confidence = 0.0;
  ErrorCategory category = ErrorCategory::MissedSpan;
};

/// Every non-exact-match case, in input order.
std::vector<ErrorRecord> collect_errors(std::span<const SpanPrediction> predicted, std::span<const Utterance> utterances);

/// Errors of `a` whose (id, slot) is not an error in `b`.
std::vector<ErrorRecord> exclusive_errors(std::span<const ErrorRecord> a, std::span<const ErrorRecord> b);

/// `text` with the predicted span wrapped in [[...]] and the gold span in {{...}}.
std::string highlight(const std::string& text, const std::optional<CharSpan>& predicted, const std::optional<CharSpan>& gold);

struct ReportOptions {
  std::optional<std::size_t> sample;  // random subset of this many lines
  std::uint64_t seed = 0;
};

/// One line per error: confidence, category, id, highlighted text. Empty when no errors.
std::string error_report(std::span<const ErrorRecord> errors, const ReportOptions& options = {});

void write_predictions(const std::filesystem::path& file, std::span<const SpanPrediction> predictions);
std::vector<SpanPrediction> read_predictions(const std::filesystem::path& file);

}  // namespace spanfill
