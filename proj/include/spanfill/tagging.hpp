#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spanfill/data_model.hpp"
#include "spanfill/tokenizer.hpp"

namespace spanfill {

/// Position of a token relative to the (single, optional) span. The numeric value
/// indexes the rows/columns of the CRF potentials.
enum class Tag : std::uint8_t { Bef = 0, Beg = 1, In = 2, Aft = 3 };

inline constexpr int kNumTags = 4;

inline constexpr int index(Tag t) { return static_cast<int>(t); }
inline constexpr Tag tag_from_index(int i) { return static_cast<Tag>(i); }

std::string_view to_string(Tag t);

using TagSequence = std::vector<Tag>;

std::string to_string(const TagSequence& tags);

/// Admissible tag bigrams of BEF* (BEG IN* AFT*)?. `allowed[from][to]`.
struct TransitionMask {
  std::array<std::array<bool, kNumTags>, kNumTags> allowed{};
  std::array<bool, kNumTags> start{};
  std::array<bool, kNumTags> end{};
};

const TransitionMask& valid_transitions();

bool satisfies_grammar(const TagSequence& tags);

/// Tags for the minimal contiguous token cover of `span`; all BEF when absent.
/// Throws ValidationError (mentioning `context`) when the span touches no token.
TagSequence span_to_tags(const TokenSequence& tokens, std::optional<CharSpan> span, std::string_view context = {});

/// Character span covered by the BEG/IN tokens. Throws ValidationError on a grammar violation.
std::optional<CharSpan> tags_to_span(const TokenSequence& tokens, const TagSequence& tags);

/// True when `span` starts and ends exactly on token boundaries.
bool aligned_to_tokens(const TokenSequence& tokens, CharSpan span);

}  // namespace spanfill
