#include "factsum/text.hpp"

#include <cctype>

namespace factsum::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

/// Length of the UTF-8 sequence introduced by `lead`, or 0 when `lead` cannot start one.
std::size_t sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 0;
}

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        const std::size_t len = sequence_length(lead);
        bool ok = len != 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) ok = is_continuation(static_cast<unsigned char>(s[i + k]));
        if (!ok) {
            out.push_back(U'\uFFFD');
            ++i;
            continue;
        }
        char32_t cp = len == 1 ? lead : lead & (0x7F >> len);
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::size_t codepoint_count(std::string_view s) { return decode_utf8(s).size(); }

std::size_t suffix_offset(std::string_view s, std::size_t n_codepoints) {
    std::size_t pos = s.size();
    std::size_t taken = 0;
    while (pos > 0 && taken < n_codepoints) {
        std::size_t start = pos - 1;
        // Walk back over at most three continuation bytes to the lead byte.
        std::size_t steps = 0;
        while (start > 0 && steps < 3 && is_continuation(static_cast<unsigned char>(s[start]))) {
            --start;
            ++steps;
        }
        const std::size_t len = sequence_length(static_cast<unsigned char>(s[start]));
        if (len != pos - start) start = pos - 1; // malformed: count the byte alone
        pos = start;
        ++taken;
    }
    return pos;
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?') continue;
        const bool boundary = i + 1 == s.size() || is_space(static_cast<unsigned char>(s[i + 1]));
        if (!boundary) continue;
        auto piece = trim(s.substr(start, i + 1 - start));
        if (!piece.empty()) out.push_back(std::move(piece));
        start = i + 1;
    }
    auto tail = trim(s.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i != 0) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace factsum::text
