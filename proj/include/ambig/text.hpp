#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ambig::text {

/// Unicode NFC normalization of UTF-8 text.
std::string nfc(std::string_view utf8);

/// Locale-independent lowercasing (root locale).
std::string lowercase(std::string_view utf8);

/// Decode UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<char32_t> decode(std::string_view utf8);
std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t> &cps);

bool is_space(char32_t cp);
bool is_punct(char32_t cp);
bool is_alnum(char32_t cp);

/// True if every code point is punctuation or a symbol.
bool is_punct_token(std::string_view utf8);

/// Split on ASCII/Unicode whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::string trim(std::string_view s);

}  // namespace ambig::text
