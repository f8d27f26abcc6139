#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace judgekit::text {

// UTF-8 handling here is deliberately small: iterate code points, classify
// whitespace, count. Inputs are judge rationales and model answers, which may
// mix Latin and CJK script.

inline bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

/// Decodes the code point starting at byte offset `i` and advances `i` past it.
/// Malformed sequences are consumed one byte at a time and returned verbatim.
inline uint32_t next_codepoint(std::string_view s, size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        ++i;
        return c;
    }
    size_t len = (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 1;
    if (i + len > s.size()) len = 1;
    uint32_t cp = 0;
    switch (len) {
        case 2: cp = c & 0x1F; break;
        case 3: cp = c & 0x0F; break;
        case 4: cp = c & 0x07; break;
        default:
            ++i;
            return c;
    }
    for (size_t k = 1; k < len; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if (!is_utf8_continuation(cc)) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += len;
    return cp;
}

/// Whitespace as used for normalization and character counting: ASCII
/// whitespace plus NBSP and the ideographic space.
inline bool is_space_codepoint(uint32_t cp) {
    switch (cp) {
        case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
        case 0x00A0: case 0x3000:
            return true;
        default:
            return false;
    }
}

/// Collapses every whitespace run to a single ASCII space and trims the ends.
inline std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    size_t i = 0;
    while (i < s.size()) {
        size_t start = i;
        uint32_t cp = next_codepoint(s, i);
        if (is_space_codepoint(cp)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.append(s.substr(start, i - start));
        }
    }
    return out;
}

inline size_t count_codepoints(std::string_view s) {
    size_t n = 0, i = 0;
    while (i < s.size()) {
        next_codepoint(s, i);
        ++n;
    }
    return n;
}

inline size_t count_codepoints_excluding_whitespace(std::string_view s) {
    size_t n = 0, i = 0;
    while (i < s.size()) {
        if (!is_space_codepoint(next_codepoint(s, i))) ++n;
    }
    return n;
}

inline size_t count_whitespace_tokens(std::string_view s) {
    size_t n = 0, i = 0;
    bool in_token = false;
    while (i < s.size()) {
        bool space = is_space_codepoint(next_codepoint(s, i));
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

/// Byte offset of the prefix holding the first `n_codepoints` code points.
inline size_t byte_offset_of_codepoint(std::string_view s, size_t n_codepoints) {
    size_t i = 0, seen = 0;
    while (i < s.size() && seen < n_codepoints) {
        next_codepoint(s, i);
        ++seen;
    }
    return i;
}

inline std::string lowercase_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

struct Token {
    std::string value;
    bool is_word = true;  // false: punctuation / symbol
};

/// Splits text into word tokens and punctuation tokens. A word is a maximal
/// run of ASCII alphanumerics (plus apostrophe); each non-ASCII code point is
/// its own word token, which approximates character-level tokens for CJK.
inline std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> tokens;
    std::string word;
    auto flush_word = [&] {
        if (!word.empty()) {
            tokens.push_back({word, true});
            word.clear();
        }
    };
    size_t i = 0;
    while (i < s.size()) {
        size_t start = i;
        uint32_t cp = next_codepoint(s, i);
        if (cp < 0x80) {
            char c = static_cast<char>(cp);
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
                word.push_back(c);
            } else {
                flush_word();
                if (!is_space_codepoint(cp)) tokens.push_back({std::string(1, c), false});
            }
        } else {
            flush_word();
            if (!is_space_codepoint(cp)) tokens.push_back({std::string(s.substr(start, i - start)), true});
        }
    }
    flush_word();
    return tokens;
}

inline std::vector<std::string> word_tokens_lower(std::string_view s) {
    std::vector<std::string> words;
    for (const Token& t : tokenize(s)) {
        if (t.is_word) words.push_back(lowercase_ascii(t.value));
    }
    return words;
}

/// First sentence of `s`, terminated by ASCII or CJK sentence punctuation
/// (terminator included). The whole string when no terminator is found.
inline std::string first_sentence(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = next_codepoint(s, i);
        if (cp == '.' || cp == '!' || cp == '?' || cp == 0x3002 /* 。 */ ||
            cp == 0xFF01 /* ！ */ || cp == 0xFF1F /* ？ */) {
            return std::string(s.substr(0, i));
        }
    }
    return std::string(s);
}

/// Length of the longest contiguous token run shared by `a` and `b`.
inline size_t longest_common_token_run(const std::vector<std::string>& a,
                                       const std::vector<std::string>& b) {
    size_t best = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) {
            size_t k = 0;
            while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
            if (k > best) best = k;
        }
    }
    return best;
}

}  // namespace judgekit::text
