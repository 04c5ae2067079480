#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace factsum::text {

std::string trim(std::string_view s);

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD, one per byte.
std::u32string decode_utf8(std::string_view s);

std::size_t codepoint_count(std::string_view s);

/// Byte offset of the code point boundary `n` code points before the end of `s`.
std::size_t suffix_offset(std::string_view s, std::size_t n_codepoints);

std::string to_lower_ascii(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

/// Splits on '.', '!' or '?' followed by whitespace or end of text. Pieces are trimmed; empty pieces dropped.
std::vector<std::string> split_sentences(std::string_view s);

std::size_t word_count(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace factsum::text
