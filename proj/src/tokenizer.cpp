#include "spanfill/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "spanfill/error.hpp"
#include "spanfill/utf8.hpp"

namespace spanfill {

std::string_view Token::surface() const {
  std::string_view p = piece;
  if (!word_start && p.starts_with(kContinuationMarker)) p.remove_prefix(kContinuationMarker.size());
  return p;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> pieces) {
  pieces_.reserve(pieces.size() + 1);
  pieces_.emplace_back(kUnkPiece);
  for (auto& p : pieces) {
    if (p.empty()) throw ValidationError("vocabulary contains an empty piece");
    if (p == kUnkPiece) continue;
    std::u32string key = utf8::decode(p);
    for (char32_t& c : key) c = chars::fold(c);
    const int id = static_cast<int>(pieces_.size());
    if (!index_.emplace(key, id).second) throw ValidationError("duplicate vocabulary piece '" + p + "'");
    max_length_ = std::max(max_length_, key.size());
    pieces_.push_back(std::move(p));
  }
}

std::optional<int> Vocabulary::find(std::u32string_view folded) const {
  auto it = index_.find(std::u32string(folded));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError(file.string() + ": cannot write");
  for (const auto& p : pieces_) out << p << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(file.string() + ": cannot open vocabulary");
  std::vector<std::string> pieces;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (lineno++ == 0) {
      if (line != kUnkPiece) throw ParseError(file.string() + ": line 1 must be " + std::string(kUnkPiece));
      continue;
    }
    pieces.push_back(line);
  }
  if (lineno == 0) throw ParseError(file.string() + ": empty vocabulary file");
  return Vocabulary(std::move(pieces));
}

namespace {

struct Word {
  std::size_t start = 0;
  std::size_t end = 0;
};

std::vector<Word> split_words(const std::u32string& text) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (chars::is_space(text[i])) {
      ++i;
    } else if (chars::is_alnum(text[i])) {
      std::size_t j = i;
      while (j < text.size() && chars::is_alnum(text[j])) ++j;
      words.push_back({i, j});
      i = j;
    } else {
      words.push_back({i, i + 1});
      ++i;
    }
  }
  return words;
}

using Symbols = std::vector<std::u32string>;

// Digits are never merged: "8pm" always splits as 8 / pm and every number splits into
// single digits, so unseen numbers segment exactly like the ones seen in training.
bool involves_digit(const std::u32string& left, const std::u32string& right) {
  return chars::is_digit(left.back()) || chars::is_digit(right.front());
}

}  // namespace

Vocabulary induce_vocabulary(std::span<const std::string> corpus, std::size_t target_size) {
  if (corpus.empty()) throw ValidationError("cannot induce a vocabulary from an empty corpus");

  // Word frequencies in first-seen order so the result depends only on corpus order.
  std::vector<std::pair<Symbols, std::size_t>> words;
  std::map<std::u32string, std::size_t> word_index;
  std::vector<std::u32string> pieces;
  std::map<std::u32string, bool> known;

  for (const auto& text : corpus) {
    std::u32string folded = utf8::decode(text);
    for (char32_t& c : folded) c = chars::fold(c);
    for (const Word& w : split_words(folded)) {
      std::u32string word = folded.substr(w.start, w.end - w.start);
      auto [it, inserted] = word_index.emplace(word, words.size());
      if (inserted) {
        Symbols symbols;
        for (char32_t c : word) {
          symbols.emplace_back(1, c);
          if (known.emplace(symbols.back(), true).second) pieces.push_back(symbols.back());
        }
        words.emplace_back(std::move(symbols), 0);
      }
      ++words[it->second].second;
    }
  }
  if (pieces.size() > target_size) {
    throw ValidationError("target vocabulary size " + std::to_string(target_size) + " is below the " +
                          std::to_string(pieces.size()) + " distinct characters of the corpus");
  }

  while (pieces.size() < target_size) {
    std::map<std::pair<std::u32string, std::u32string>, std::size_t> pair_counts;
    for (const auto& [symbols, freq] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        if (involves_digit(symbols[i], symbols[i + 1])) continue;
        pair_counts[{symbols[i], symbols[i + 1]}] += freq;
      }
    }
    // Highest count wins; std::map iteration order makes the smallest pair win ties.
    const std::pair<std::u32string, std::u32string>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr) break;
    const std::u32string left = best->first;
    const std::u32string right = best->second;
    const std::u32string merged = left + right;
    for (auto& [symbols, _] : words) {
      Symbols next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    if (known.emplace(merged, true).second) pieces.push_back(merged);
  }

  std::vector<std::string> encoded;
  encoded.reserve(pieces.size());
  for (const auto& p : pieces) encoded.push_back(utf8::encode(p));
  return Vocabulary(std::move(encoded));
}

TokenSequence tokenize(const Vocabulary& vocab, std::string_view text) {
  const std::u32string original = utf8::decode(text);
  std::u32string folded = original;
  for (char32_t& c : folded) c = chars::fold(c);

  TokenSequence tokens;
  for (const Word& w : split_words(folded)) {
    std::size_t pos = w.start;
    while (pos < w.end) {
      const std::size_t longest = std::min(vocab.max_piece_length(), w.end - pos);
      std::size_t len = 0;
      int id = Vocabulary::kUnk;
      for (std::size_t n = longest; n >= 1; --n) {
        if (auto found = vocab.find(std::u32string_view(folded).substr(pos, n))) {
          len = n;
          id = *found;
          break;
        }
      }
      if (len == 0) len = 1;
      Token t;
      t.id = id;
      t.start = pos;
      t.end = pos + len;
      t.word_start = pos == w.start;
      t.piece = utf8::encode(std::u32string_view(folded).substr(pos, len));
      if (!t.word_start) t.piece.insert(0, kContinuationMarker);
      tokens.push_back(std::move(t));
      pos += len;
    }
  }
  return tokens;
}

std::vector<int> token_ids(const TokenSequence& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.id);
  return ids;
}

}  // namespace spanfill
