#include "spanfill/tagging.hpp"

#include "spanfill/error.hpp"

namespace spanfill {

std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::Bef: return "BEF";
    case Tag::Beg: return "BEG";
    case Tag::In: return "IN";
    case Tag::Aft: return "AFT";
  }
  return "?";
}

std::string to_string(const TagSequence& tags) {
  std::string out = "[";
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i > 0) out += ",";
    out += to_string(tags[i]);
  }
  return out + "]";
}

const TransitionMask& valid_transitions() {
  static const TransitionMask mask = [] {
    TransitionMask m;
    auto allow = [&m](Tag from, Tag to) { m.allowed[index(from)][index(to)] = true; };
    allow(Tag::Bef, Tag::Bef);
    allow(Tag::Bef, Tag::Beg);
    allow(Tag::Beg, Tag::In);
    allow(Tag::Beg, Tag::Aft);
    allow(Tag::In, Tag::In);
    allow(Tag::In, Tag::Aft);
    allow(Tag::Aft, Tag::Aft);
    m.start[index(Tag::Bef)] = true;
    m.start[index(Tag::Beg)] = true;
    m.end.fill(true);
    return m;
  }();
  return mask;
}

bool satisfies_grammar(const TagSequence& tags) {
  // BEF* (BEG IN* AFT*)? as a four-state automaton.
  int state = 0;  // 0: in BEF*, 1: after BEG or IN, 2: in AFT*
  for (Tag t : tags) {
    switch (state) {
      case 0:
        if (t == Tag::Beg) state = 1;
        else if (t != Tag::Bef) return false;
        break;
      case 1:
        if (t == Tag::Aft) state = 2;
        else if (t != Tag::In) return false;
        break;
      default:
        if (t != Tag::Aft) return false;
    }
  }
  return true;
}

TagSequence span_to_tags(const TokenSequence& tokens, std::optional<CharSpan> span, std::string_view context) {
  TagSequence tags(tokens.size(), Tag::Bef);
  if (!span) return tags;
  std::optional<std::size_t> first;
  std::size_t last = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].start < span->end && span->start < tokens[i].end) {
      if (!first) first = i;
      last = i;
    }
  }
  if (!first) {
    throw ValidationError("utterance '" + std::string(context) + "': span [" + std::to_string(span->start) + "," +
                          std::to_string(span->end) + ") covers no token");
  }
  tags[*first] = Tag::Beg;
  for (std::size_t i = *first + 1; i <= last; ++i) tags[i] = Tag::In;
  for (std::size_t i = last + 1; i < tokens.size(); ++i) tags[i] = Tag::Aft;
  return tags;
}

std::optional<CharSpan> tags_to_span(const TokenSequence& tokens, const TagSequence& tags) {
  if (tags.size() != tokens.size()) {
    throw ShapeError("tag sequence length " + std::to_string(tags.size()) + " != token count " +
                     std::to_string(tokens.size()));
  }
  if (!satisfies_grammar(tags)) throw ValidationError("tag sequence " + to_string(tags) + " violates the tag grammar");
  std::optional<CharSpan> span;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Tag::Beg) span = CharSpan{tokens[i].start, tokens[i].end};
    if (tags[i] == Tag::In) span->end = tokens[i].end;
  }
  return span;
}

bool aligned_to_tokens(const TokenSequence& tokens, CharSpan span) {
  bool start_ok = false;
  bool end_ok = false;
  for (const auto& t : tokens) {
    start_ok = start_ok || t.start == span.start;
    end_ok = end_ok || t.end == span.end;
  }
  return start_ok && end_ok;
}

}  // namespace spanfill
