#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spanfill {

/// Prefix marking a piece that continues a word rather than starting one.
inline constexpr std::string_view kContinuationMarker = "##";

struct Token {
  std::string piece;  // case-folded surface, prefixed with kContinuationMarker when !word_start
  int id = 0;
  std::size_t start = 0;  // character offsets into the original text
  std::size_t end = 0;
  bool word_start = false;

  /// Piece without the continuation marker.
  std::string_view surface() const;
  friend bool operator==(const Token&, const Token&) = default;
};

using TokenSequence = std::vector<Token>;

/// Subword inventory. Pieces are position-agnostic (a piece may start or continue a word);
/// id 0 is reserved for the unknown-character piece.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr std::string_view kUnkPiece = "[UNK]";

  Vocabulary();
  /// `pieces` excludes the UNK entry, which is always prepended.
  explicit Vocabulary(std::vector<std::string> pieces);

  std::size_t size() const { return pieces_.size(); }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::u32string_view folded) const;
  const std::vector<std::string>& pieces() const { return pieces_; }
  std::size_t max_piece_length() const { return max_length_; }

  /// One piece per line, line number = id.
  void save(const std::filesystem::path& file) const;
  static Vocabulary load(const std::filesystem::path& file);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.pieces_ == b.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::u32string, int> index_;
  std::size_t max_length_ = 0;
};

/// Greedy pair-merge induction: start from every character of the case-folded corpus,
/// then repeatedly merge the most frequent adjacent pair (ties: lexicographically
/// smallest pair) until `target_size` pieces exist or no pair is left. Digits never merge
/// with non-digits.
/// Throws ValidationError if the corpus is empty or has more distinct characters than
/// `target_size`.
Vocabulary induce_vocabulary(std::span<const std::string> corpus, std::size_t target_size);

/// Splits text into words (maximal letter/digit runs; every other non-space character is a
/// word of its own), then each word into pieces by greedy longest match.
TokenSequence tokenize(const Vocabulary& vocab, std::string_view text);

std::vector<int> token_ids(const TokenSequence& tokens);

}  // namespace spanfill
