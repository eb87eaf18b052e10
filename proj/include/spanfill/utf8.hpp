#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace spanfill::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Throws ParseError on malformed input.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view chars);
std::string encode(char32_t c);

/// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view text);

/// Substring by scalar-value indices [start, end).
std::string substr(std::string_view text, std::size_t start, std::size_t end);

}  // namespace spanfill::utf8

namespace spanfill::chars {

bool is_space(char32_t c);
bool is_digit(char32_t c);
// Letters and digits. Outside ASCII this is an approximation: everything from
// U+00C0 upwards that is not in a known punctuation/symbol block counts as a letter.
bool is_alnum(char32_t c);
// Simple one-to-one lowercase mapping; never changes the number of characters.
char32_t fold(char32_t c);

}  // namespace spanfill::chars
